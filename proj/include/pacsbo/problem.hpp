#pragma once

#include "pacsbo/gp.hpp"
#include "pacsbo/random.hpp"
#include "pacsbo/rkhs_function.hpp"

#include <vector>

namespace pacsbo {

/// Synthetic benchmark with one constraint: reward h(.,0) is an RKHS
/// function, the constraint is h(.,1) = h(.,0) - threshold.
class SyntheticProblem {
public:
    SyntheticProblem(const GridDomain& grid, RkhsFunction reward, double threshold);

    /// Threshold leaving `safe_fraction` of the grid with h(.,1) >= 0.
    static SyntheticProblem with_safe_fraction(const GridDomain& grid, RkhsFunction reward, double safe_fraction);

    std::size_t num_functions() const { return 2; }
    const RkhsFunction& reward() const { return reward_; }
    double threshold() const { return threshold_; }
    double value(GridIndex a, std::size_t i) const;
    const Eigen::VectorXd& reward_on_grid() const { return reward_grid_; }
    bool unsafe(GridIndex a) const { return value(a, 1) < 0.0; }
    /// Best true reward over the safe grid points.
    double safe_optimum() const;

    /// Truth plus independent truncated-Gaussian noise per function index.
    std::vector<double> measure(GridIndex a, double sigma, Rng& rng) const;

private:
    RkhsFunction reward_;
    double threshold_;
    Eigen::VectorXd reward_grid_;
};

/// Three contiguous grid points (along the first dimension) whose true
/// constraint values all exceed `margin`, with the middle point drawn
/// uniformly among all admissible positions. The margin is halved until
/// some position qualifies.
std::vector<GridIndex> select_seed_set(const SyntheticProblem& problem, const GridDomain& grid, Rng& rng,
                                       double margin = 0.1);

/// Measures every seed point once and returns the resulting sample set.
SampleSet measure_seed_set(const SyntheticProblem& problem, const std::vector<GridIndex>& seed, double sigma,
                           Rng& rng);

}  // namespace pacsbo
