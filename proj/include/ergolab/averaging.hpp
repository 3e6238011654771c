#pragma once
// Averaging operators P = sum_z w_z T^z with finitely many nonzero weights.

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ergolab/space.hpp"

namespace ergolab {

inline constexpr std::size_t kDefaultSupportCap = 1'000'000;

class WeightedOperator {
public:
    WeightedOperator() = default;
    /// Validates w >= 0 and sum w = 1, drops zero weights, merges duplicate
    /// group elements and sorts the support lexicographically.
    WeightedOperator(int d, std::vector<std::pair<GroupElement, double>> terms);

    int dimension() const { return d_; }
    std::size_t size() const { return z_.size(); }
    const std::vector<GroupElement>& support() const { return z_; }
    const std::vector<double>& weights() const { return w_; }
    /// Side N if this is exactly the cube average over Q_N (enables the
    /// prefix-sum path), 0 otherwise.
    std::size_t cube_side() const { return cube_; }

private:
    friend WeightedOperator cube_operator(std::size_t N, int d);
    int d_ = 1;
    std::vector<GroupElement> z_;
    std::vector<double> w_;
    std::size_t cube_ = 0;
};

/// Q_N = {1..N}^d with weight N^-d.
WeightedOperator cube_operator(std::size_t N, int d);
/// Lattice points with j < |z| < j + c (Euclidean, both strict), uniform.
WeightedOperator shell_operator(int j, double c, int d = 3);
/// Uniform j-subset of the ball {|z| <= j}, weight 1/j each.
WeightedOperator random_subset_operator(int j, int d, std::uint64_t seed);
WeightedOperator point_mass(const GroupElement& z);

Observable apply_operator(const WeightedOperator& P, const FiniteSystem& sys, const Observable& f);
/// Reference path: explicit sum over the support, no cube shortcut.
Observable apply_operator_direct(const WeightedOperator& P, const FiniteSystem& sys, const Observable& f);

WeightedOperator adjoint(const WeightedOperator& P);
/// (P o Q) = sum_{a,b} p_a q_b T^{a+b}; throws once the support exceeds `cap`.
WeightedOperator compose(const WeightedOperator& P, const WeightedOperator& Q,
                         std::size_t cap = kDefaultSupportCap);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Weighted l_p norm for p in {1, 2, inf}.
double lp_norm(const Observable& f, const FiniteSystem& sys, double p);
/// Weighted inner product <f, h> = sum_x w(x) f(x) h(x).
double inner(const Observable& f, const Observable& h, const FiniteSystem& sys);
Observable mean_projection(const FiniteSystem& sys, const Observable& f);

/// || T^g(Pf) - Pf ||_2
double commutator_defect(const WeightedOperator& P, const GroupElement& g, const FiniteSystem& sys,
                         const Observable& f);

/// <T^g (P*P)^(2^k) f, h> - (int f)(int h)
double power_correlation(const WeightedOperator& P, const GroupElement& g, unsigned k, const FiniteSystem& sys,
                         const Observable& f, const Observable& h, std::size_t cap = kDefaultSupportCap);

struct SweepRow {
    std::size_t N;
    double l1_dev, l2_dev, sup_dev;
};

using OperatorFamily = std::function<WeightedOperator(std::size_t)>;

std::vector<SweepRow> convergence_sweep(const FiniteSystem& sys, const Observable& f, const OperatorFamily& family,
                                        const std::vector<std::size_t>& Ns);

/// Cube family N -> cube_operator(N, d).
OperatorFamily cube_family(int d);

}  // namespace ergolab
