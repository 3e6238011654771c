#pragma once
// Finitely supported laws on R and R^2, and distances between them.

#include <cstddef>
#include <utility>
#include <vector>

#include "ergolab/space.hpp"

namespace ergolab {

class EmpiricalDistribution {
public:
    EmpiricalDistribution() = default;

    /// Sorts by value, merges values within 1e-12 of a group's first value,
    /// drops zero masses; masses must be positive-or-zero and sum to 1.
    static EmpiricalDistribution from_atoms(std::vector<std::pair<double, double>> atoms);
    static EmpiricalDistribution from_atoms_2d(std::vector<std::pair<std::pair<double, double>, double>> atoms);
    static EmpiricalDistribution point_mass(double v) { return from_atoms({{v, 1.0}}); }
    /// n midpoints of [a, b], each of mass 1/n.
    static EmpiricalDistribution uniform_grid(double a, double b, std::size_t n);

    int dimension() const { return dim_; }
    std::size_t size() const { return mass_.size(); }
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& y() const { return y_; }
    const std::vector<double>& masses() const { return mass_; }

    double mean() const;
    double abs_mean() const;
    /// Law of lambda * X.
    EmpiricalDistribution scaled(double lambda) const;
    /// Marginal laws of a 2-d distribution.
    EmpiricalDistribution marginal_x() const;
    EmpiricalDistribution marginal_y() const;

private:
    int dim_ = 1;
    std::vector<double> x_, y_, mass_;
};

inline constexpr double kValueMergeTol = 1e-12;

EmpiricalDistribution law(const FiniteSystem& sys, const Observable& f);
EmpiricalDistribution joint_law(const FiniteSystem& sys, const Observable& f, const Observable& g);
/// Tensor product. Marginals with more than `max_marginal_atoms` atoms are
/// first snapped to that many equal-width bins (mass moves by at most half a
/// bin width), which keeps the product size bounded.
EmpiricalDistribution product(const EmpiricalDistribution& a, const EmpiricalDistribution& b,
                              std::size_t max_marginal_atoms = 2048);

/// Bounded-Lipschitz distance. Exact in 1-d; in 2-d a lower bound from a fixed
/// dictionary of test functions (33 x 33 tents plus axis ramps).
double bl_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b);
/// Exact 1-d Wasserstein-1 distance, the L1 distance of the CDFs.
double w1_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b);
/// Left-continuous generalized inverse of the CDF, r in (0, 1).
double quantile(const EmpiricalDistribution& nu, double r);

}  // namespace ergolab
