#include "pacsbo/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pacsbo {

SyntheticProblem::SyntheticProblem(const GridDomain& grid, RkhsFunction reward, double threshold)
    : reward_(std::move(reward)), threshold_(threshold), reward_grid_(evaluate_on_grid(reward_, grid)) {}

SyntheticProblem SyntheticProblem::with_safe_fraction(const GridDomain& grid, RkhsFunction reward,
                                                      double safe_fraction) {
    if (!(safe_fraction > 0.0 && safe_fraction <= 1.0)) {
        throw std::invalid_argument("safe_fraction must lie in (0, 1]");
    }
    const Eigen::VectorXd values = evaluate_on_grid(reward, grid);
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    const auto unsafe_count = static_cast<std::size_t>(
        std::floor((1.0 - safe_fraction) * static_cast<double>(sorted.size())));
    const double threshold = unsafe_count == 0 ? sorted.front() : sorted[unsafe_count];
    return SyntheticProblem(grid, std::move(reward), threshold);
}

double SyntheticProblem::value(GridIndex a, std::size_t i) const {
    const double r = reward_grid_(static_cast<Eigen::Index>(a));
    switch (i) {
        case 0: return r;
        case 1: return r - threshold_;
        default: throw std::out_of_range("SyntheticProblem: function index out of range");
    }
}

double SyntheticProblem::safe_optimum() const {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < reward_grid_.size(); ++a) {
        if (reward_grid_(a) >= threshold_) {
            best = std::max(best, reward_grid_(a));
        }
    }
    return best;
}

std::vector<double> SyntheticProblem::measure(GridIndex a, double sigma, Rng& rng) const {
    std::vector<double> out(num_functions());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = value(a, i) + truncated_normal(rng, sigma);
    }
    return out;
}

std::vector<GridIndex> select_seed_set(const SyntheticProblem& problem, const GridDomain& grid, Rng& rng,
                                       double margin) {
    const std::size_t first_res = grid.resolution()[0];
    if (first_res < 3) {
        throw std::invalid_argument("select_seed_set: need at least 3 points along the first dimension");
    }
    for (int attempt = 0; attempt < 40; ++attempt) {
        std::vector<GridIndex> admissible;
        for (GridIndex c = 0; c < grid.size(); ++c) {
            auto mi = grid.multi_index(c);
            if (mi[0] == 0 || mi[0] + 1 >= first_res) {
                continue;
            }
            bool ok = problem.value(c, 1) >= margin;
            for (int off : {-1, 1}) {
                auto nb = mi;
                nb[0] = static_cast<std::size_t>(static_cast<long>(nb[0]) + off);
                ok = ok && problem.value(grid.flat_index(nb), 1) >= margin;
            }
            if (ok) {
                admissible.push_back(c);
            }
        }
        if (!admissible.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, admissible.size() - 1);
            const GridIndex c = admissible[pick(rng)];
            auto mi = grid.multi_index(c);
            std::vector<GridIndex> seed;
            for (int off : {-1, 0, 1}) {
                auto nb = mi;
                nb[0] = static_cast<std::size_t>(static_cast<long>(nb[0]) + off);
                seed.push_back(grid.flat_index(nb));
            }
            std::sort(seed.begin(), seed.end());
            return seed;
        }
        margin *= 0.5;
    }
    throw std::runtime_error("select_seed_set: no three contiguous safe grid points");
}

SampleSet measure_seed_set(const SyntheticProblem& problem, const std::vector<GridIndex>& seed, double sigma,
                           Rng& rng) {
    SampleSet samples(problem.num_functions());
    for (GridIndex a : seed) {
        samples.append(a, problem.measure(a, sigma, rng));
    }
    return samples;
}

}  // namespace pacsbo
