#pragma once
// Finite probability spaces carrying a measure-preserving Z^d action.
//
// Two backends share one interface:
//   * torus   Z_{M1} x ... x Z_{Md}, generator i = unit translation on axis i,
//             atoms indexed row-major (last axis fastest);
//   * permutation (d = 1) an arbitrary bijection, stored by cycle
//             decomposition so that every power T^k costs O(1).
// A "cycle" is the one-dimensional torus.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ergolab {

using Atom = std::uint32_t;
using GroupElement = std::vector<std::int64_t>;

inline constexpr double kTol = 1e-12;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OrbitReport {
    std::size_t orbit_count = 0;
    bool transitive = false;
    std::vector<std::size_t> orbit_sizes;  // in order of smallest member
};

class FiniteSystem {
public:
    static FiniteSystem cycle(std::size_t M, std::vector<double> weights = {});
    static FiniteSystem torus(std::vector<std::size_t> dims, std::vector<double> weights = {});
    static FiniteSystem permutation(std::vector<Atom> perm, std::vector<double> weights = {});

    int dimension() const { return d_; }
    std::size_t size() const { return M_; }
    bool is_torus() const { return torus_; }
    /// Axis lengths; for the permutation backend a single entry M.
    const std::vector<std::size_t>& dims() const { return dims_; }
    const std::vector<double>& weights() const { return w_; }
    double weight(Atom x) const { return w_[x]; }
    bool uniform() const { return uniform_; }
    bool ergodic() const { return orbits_.transitive; }
    const OrbitReport& orbit_report() const { return orbits_; }
    std::uint64_t id() const { return id_; }

    /// T^z x.
    Atom apply(const GroupElement& z, Atom x) const;
    /// One step of generator `axis`, possibly inverted.
    Atom step(int axis, Atom x, bool inverse = false) const;

    /// out[x] = f(T^z x) for every atom.
    void pullback(const GroupElement& z, std::span<const double> f, std::span<double> out) const;

    /// Torus coordinates of an atom and back (torus backend only).
    std::vector<std::int64_t> coords(Atom x) const;
    Atom atom(const std::vector<std::int64_t>& c) const;

    /// Basis of {z : T^z = id}. Torus: M_i e_i. Permutation: lcm of cycle
    /// lengths (saturated at INT64_MAX).
    std::vector<GroupElement> period_lattice() const;

    /// Cycle structure of the permutation backend (also filled for d = 1 tori).
    const std::vector<Atom>& cycle_members() const { return cyc_members_; }
    const std::vector<std::size_t>& cycle_offsets() const { return cyc_offsets_; }
    std::size_t cycle_of(Atom x) const { return cyc_id_[x]; }
    std::size_t position_in_cycle(Atom x) const { return cyc_pos_[x]; }

    void check_dimension(const GroupElement& z) const;
    void check_atom(Atom x) const;

private:
    FiniteSystem() = default;
    void finish(std::vector<double> weights);
    void build_cycles();
    void check_commuting() const;
    void check_invariant_weights() const;
    void compute_orbits();

    int d_ = 1;
    std::size_t M_ = 0;
    bool torus_ = true;
    bool uniform_ = true;
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> stride_;
    std::vector<double> w_;
    OrbitReport orbits_;
    std::uint64_t id_ = 0;

    std::vector<Atom> perm_;
    std::vector<Atom> cyc_members_;
    std::vector<std::size_t> cyc_offsets_;
    std::vector<std::uint32_t> cyc_id_;
    std::vector<std::uint32_t> cyc_pos_;
};

class AtomSet {
public:
    AtomSet() = default;
    /// Sorts and deduplicates; validates indices against the system.
    AtomSet(const FiniteSystem& sys, std::vector<Atom> members);
    static AtomSet empty(const FiniteSystem& sys);
    static AtomSet full(const FiniteSystem& sys);
    /// Members already sorted and unique (checked in debug builds only).
    static AtomSet from_sorted(const FiniteSystem& sys, std::vector<Atom> members);
    static AtomSet from_mask(const FiniteSystem& sys, const std::vector<std::uint8_t>& mask);

    const std::vector<Atom>& members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    bool contains(Atom x) const;
    double measure() const { return measure_; }
    std::uint64_t system_id() const { return sys_id_; }

    /// Recomputes the measure and compares with the cached value.
    bool verify(const FiniteSystem& sys) const;
    std::vector<std::uint8_t> mask(std::size_t M) const;

private:
    std::vector<Atom> members_;
    double measure_ = 0.0;
    std::uint64_t sys_id_ = 0;
};

class Observable {
public:
    Observable() = default;
    explicit Observable(std::vector<double> values);
    static Observable constant(const FiniteSystem& sys, double c);

    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    double& operator[](std::size_t i) { return v_[i]; }
    const double* data() const { return v_.data(); }
    double* data() { return v_.data(); }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }
    std::span<const double> span() const { return v_; }

private:
    std::vector<double> v_;
};

AtomSet translate_set(const FiniteSystem& sys, const GroupElement& z, const AtomSet& S);
AtomSet set_union(const AtomSet& a, const AtomSet& b, const FiniteSystem& sys);
AtomSet set_intersection(const AtomSet& a, const AtomSet& b, const FiniteSystem& sys);
AtomSet set_difference(const AtomSet& a, const AtomSet& b, const FiniteSystem& sys);
AtomSet symmetric_difference(const AtomSet& a, const AtomSet& b, const FiniteSystem& sys);
AtomSet complement(const AtomSet& a, const FiniteSystem& sys);
double measure(const AtomSet& S);
double integrate(const FiniteSystem& sys, const Observable& f, const AtomSet& S);
double integrate(const FiniteSystem& sys, const Observable& f);
OrbitReport orbit_partition_check(const FiniteSystem& sys);

/// Deterministic generator helpers shared by tests and experiments.
struct Rng {
    explicit Rng(std::uint64_t seed);
    std::uint64_t next();
    double uniform();                           // [0, 1)
    double uniform(double lo, double hi);       // [lo, hi)
    std::uint64_t below(std::uint64_t n);       // [0, n)
    std::mt19937_64 engine;
};

/// Uniform[-1,1] values with the weighted mean subtracted.
Observable random_zero_mean(const FiniteSystem& sys, Rng& rng);
Observable random_observable(const FiniteSystem& sys, Rng& rng, double lo = -1.0, double hi = 1.0);

}  // namespace ergolab
