#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace pacsbo {

class GridDomain;

enum class KernelFamily { Matern32 };

/// Stationary kernel hyperparameters. Output scale is fixed to one.
struct KernelConfig {
    KernelFamily family = KernelFamily::Matern32;
    double lengthscale = 0.1;

    void validate() const;
};

/// Matérn-3/2 as a function of Euclidean distance.
double matern32(double distance, double lengthscale);

/// k(a, b) = (1 + sqrt(3) d / l) exp(-sqrt(3) d / l).
/// Throws std::invalid_argument on dimension mismatch.
double kernel_eval(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelConfig& cfg);

/// Gram matrix between the rows of `a` and the rows of `b`.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelConfig& cfg);

/// Kernel restricted to the points of a uniform grid. Because the grid is a
/// lattice, k only depends on the per-dimension index offsets, so every value
/// is read from a table with one entry per offset vector.
class GridKernel {
public:
    GridKernel(const GridDomain& grid, const KernelConfig& cfg);

    double operator()(std::size_t a, std::size_t b) const;

    Eigen::MatrixXd gram(const std::vector<std::size_t>& idx) const;
    Eigen::MatrixXd cross(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const;

    const KernelConfig& config() const { return cfg_; }
    std::size_t dim() const { return res_.size(); }

private:
    KernelConfig cfg_;
    std::vector<std::size_t> res_;
    std::vector<std::size_t> table_stride_;
    std::vector<double> table_;
};

}  // namespace pacsbo
