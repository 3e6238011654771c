#pragma once
// Heavy orbit segments and disjoint cube selection.
//
// The heavy block of an anchor x at length L is T^{Q_L} x: the atoms
// T x, ..., T^L x for d = 1, or x + {1..L}^d in general; its southwest vertex
// is x + (1, ..., 1). It is s-heavy when the average of f over it exceeds s.

#include <cstddef>
#include <optional>
#include <vector>

#include "ergolab/space.hpp"
#include "ergolab/towers.hpp"

namespace ergolab {

struct HeavyOrbitParams {
    double s;
    std::size_t L_cap;
    std::size_t L_min = 1;
};

/// Minimal L in [L_min, L_cap] with (1/L^d) sum_{z in Q_L} f(T^z x) > s.
std::optional<std::size_t> first_passage(const FiniteSystem& sys, const Observable& f, Atom x,
                                         const HeavyOrbitParams& params);

struct Cube {
    std::vector<std::int64_t> corner;  // southwest vertex in window coordinates
    std::size_t side;
};

enum class SelectionStrategy { Lexicographic, LargestFirst };

struct WindowSelection {
    std::vector<Cube> selected;
    std::size_t covered_cells = 0;
    double fraction = 0.0;  // covered cells / H^d
    std::size_t discarded = 0;  // candidates leaving the window
};

/// Greedy disjoint selection inside the window {0..H-1}^d. Candidates leaving
/// the window are discarded; the rest are scanned by southwest vertex
/// (lexicographic) or by decreasing side and accepted when disjoint from
/// everything chosen so far.
WindowSelection greedy_cube_selection(int d, std::size_t H, std::vector<Cube> candidates,
                                      SelectionStrategy strategy = SelectionStrategy::Lexicographic);

struct Block {
    Atom start;  // southwest vertex (first atom)
    std::size_t side;
};

struct CoveringResult {
    std::vector<Block> selected;
    AtomSet Y;
    double fraction = 0.0;  // mu(Y) / mu(window)
    std::size_t H = 0;
};

/// Left-to-right heavy segment selection along the orbit segment
/// w0, T w0, ..., T^{H-1} w0: at position p take the minimal heavy length
/// ell of anchor T^{p-1} w0 if the block fits, jump to p + ell, else advance.
CoveringResult greedy_heavy_partition_1d(const FiniteSystem& sys, const Observable& f, const HeavyOrbitParams& params,
                                         Atom w0, std::size_t H);

struct YNReport {
    AtomSet Y;
    std::vector<Block> blocks;
    std::size_t N = 0, L = 0;
    double mu_Y = 0.0;
    double integral = 0.0;             // int_Y f
    double normalized_integral = 0.0;  // int_Y f / mu(Y), 0 when Y is empty
    double uncovered = 0.0;            // mu(tower) - mu(Y)
    double candidate_fraction = 0.0;   // share of window atoms with a heavy length in [L, N]
};

/// Y_N: union over tower columns of greedy selections among heavy cubes with
/// side in [L, N], all inside the column window.
YNReport build_Y_N(const FiniteSystem& sys, const Observable& f, double s, std::size_t L, std::size_t N,
                   const Tower& tower, SelectionStrategy strategy = SelectionStrategy::Lexicographic);

/// Largest L on the grid {1, 2, 4, ...} (capped at N) for which at least
/// `coverage` of the window atoms have a heavy length in [L, N].
std::size_t suggest_min_length(const FiniteSystem& sys, const Observable& f, double s, std::size_t N,
                               const Tower& tower, double coverage = 0.9);

/// mu(Y Δ T^z Y) for every z.
std::vector<double> almost_invariance_profile(const FiniteSystem& sys, const AtomSet& Y,
                                              const std::vector<GroupElement>& shifts);

struct BirkhoffRow {
    std::size_t N, L;
    double mu_Y, normalized_integral, integral;
    std::vector<double> sym_diff;  // one per generator
    std::size_t blocks;
    double fraction;               // mu(Y) / mu(tower)
    bool heavy_property;           // int_Y f > s mu(Y), vacuous when Y is empty
};

/// Runs build_Y_N for each N with L = max(1, ceil(min_length_ratio * N)).
std::vector<BirkhoffRow> birkhoff_contradiction_experiment(const FiniteSystem& sys, const Observable& f, double s,
                                                           const std::vector<std::size_t>& schedule,
                                                           const Tower& tower, double min_length_ratio = 0.1);

}  // namespace ergolab
