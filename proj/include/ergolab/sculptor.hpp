#pragma once
// Staged construction of f = sum_j f_j whose normalized averages
// P_{N_j} f / ||P_{N_j} f|| at chosen scales N_j follow a prescribed law.
//
// Stage j lives on a tower of height n_j = K_j h_j, split into K_j subtowers
// of height h_j (K_j^d congruent subcubes for d > 1). Subtower i carries
// a_j * q_i where q_i is the target quantile at rank (i + 1/2) / K_j^d, in
// increasing order along the floors, so neighbouring subtowers hold close
// values. The residual E_j carries the constant c_j that makes f_j mean zero.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ergolab/averaging.hpp"
#include "ergolab/distributions.hpp"
#include "ergolab/space.hpp"
#include "ergolab/towers.hpp"

namespace ergolab {

enum class Normalizer { L1, L2 };

struct SculptConfig {
    std::size_t J = 3;
    double decay = 0.01;            // initial a_{j+1} / a_j
    double eta = 0.01;              // dominance threshold for leakage and tails
    double eps_tower = 1e-3;        // mu(E_j) <= eps_tower / 2^j
    double plateau_safety = 0.01;   // N_j <= plateau_safety * h_j
    std::vector<std::size_t> subtowers_per_axis;  // K_j; empty -> K_j = j
    Normalizer normalizer = Normalizer::L1;
    std::size_t height_search_factor = 8;  // h_j searched in [h_lo, factor * h_lo]
    std::size_t max_rounds = 10;           // amplitude-shrink rounds
    double shrink_margin = 0.98;
    double plateau_ratio = 10.0;           // default R_k = min(ratio * N_k, ps * h_k)
};

enum class ResidualMode { Remainder, WithheldColumn };

struct StageSpec {
    std::size_t j = 0;
    std::size_t h = 0;              // subtower height
    std::size_t n = 0;              // tower height (side) K * h
    std::size_t K = 0;              // subtowers per axis
    std::size_t subtower_count = 0; // K^d
    double amplitude = 0.0;
    std::vector<double> values;     // per subtower, already scaled by amplitude
    std::vector<double> subtower_mass;
    double residual_value = 0.0;    // c_j
    ResidualMode mode = ResidualMode::Remainder;
    Tower tower;
    AtomSet E;
    std::size_t N = 0;
    std::size_t R = 0;
    double leakage = 0.0;           // ||P_N sum_{k<j} f_k||_1
    double leakage_limit = 0.0;     // eta ||f_j||_1
    Observable pattern;             // unit-amplitude stage function
    Observable function() const;    // amplitude * pattern
    double zero_mean_residual(const FiniteSystem& sys) const;
};

struct StageDistance {
    std::size_t j, N;
    double w1, bl, tail, norm;
    bool degenerate;
};

struct SculptPlan {
    const FiniteSystem* sys = nullptr;
    SculptConfig config;
    EmpiricalDistribution target;      // as given
    EmpiricalDistribution normalized;  // target / ||target|| under the normalizer
    std::vector<StageSpec> stages;
    Observable f;
    bool degenerate = false;
    std::size_t rounds = 0;
    std::vector<StageDistance> distances;
};

/// Unit-amplitude stage j (amplitude 1) with tower height chosen from the
/// feasible range, see SculptConfig. `prev_period` is the period the earlier
/// stages repeat with (1 for j = 1).
StageSpec build_stage(const FiniteSystem& sys, std::size_t j, std::size_t J, std::size_t K,
                      const EmpiricalDistribution& target, const SculptConfig& cfg, std::size_t prev_period);

/// Smallest N on the doubling grid prev_period * 2^k with
/// ||P_N(sum_{k<j} f_k)||_1 <= eta ||f_j||_1 and N <= plateau_safety * h_j.
std::size_t choose_N_j(const FiniteSystem& sys, const std::vector<StageSpec>& stages, std::size_t j,
                       std::size_t prev_period, const SculptConfig& cfg, double* leakage = nullptr,
                       double* limit = nullptr);

/// ||P_{N_j}(sum_{m>j} f_m)||_1 / ||P_{N_j} f_j||_1 (0 for the last stage).
double tail_bound(const SculptPlan& plan, std::size_t j);

SculptPlan sculpt(const FiniteSystem& sys, const EmpiricalDistribution& target, const SculptConfig& cfg);

/// Law of P_n f / ||P_n f|| (normalizer from the plan); nullopt if degenerate.
std::optional<EmpiricalDistribution> normalized_law(const SculptPlan& plan, std::size_t n);
std::optional<Observable> normalized_average(const SculptPlan& plan, std::size_t n);

struct PlateauRow {
    std::size_t n;
    double bl, w1;
};

/// Distances from the N_k law to the laws at `samples` log-spaced n in
/// [N_k, R]; R = 0 selects the plan default R_k.
std::vector<PlateauRow> plateau_profile(const SculptPlan& plan, std::size_t k, std::size_t samples, std::size_t R = 0);

/// 2-d BL estimate between the joint law of the normalized averages at N_k and
/// N_j and the product of their marginals.
double independence_probe(const SculptPlan& plan, std::size_t k, std::size_t j);
/// Same probe for the pair (u_k, u_k o T^shift); a dependent control.
double independence_control(const SculptPlan& plan, std::size_t k, std::int64_t shift);

std::string residual_mode_name(ResidualMode m);

}  // namespace ergolab
