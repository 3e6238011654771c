#include "ergolab/sculptor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ergolab/simd/kernels.hpp"

namespace ergolab {
namespace {

constexpr double kDegenerateNorm = 1e-14;

double norm_of(const Observable& f, const FiniteSystem& sys, Normalizer nz) {
    return lp_norm(f, sys, nz == Normalizer::L1 ? 1.0 : 2.0);
}

std::size_t upow(std::size_t b, int d) {
    std::size_t r = 1;
    for (int i = 0; i < d; ++i) r *= b;
    return r;
}

Observable scaled_sum(const FiniteSystem& sys, const std::vector<StageSpec>& stages, std::size_t from,
                      std::size_t to) {
    std::vector<double> out(sys.size(), 0.0);
    const auto& K = simd::kernels();
    for (std::size_t k = from; k < to && k < stages.size(); ++k)
        K.axpy(out.data(), stages[k].amplitude, stages[k].pattern.data(), out.size());
    return Observable(std::move(out));
}

struct HeightChoice {
    std::size_t h = 0, r = 0;
    double score = 0.0;
    ResidualMode mode = ResidualMode::Remainder;
};

// Stage tower height for d = 1: n = K h must be a multiple of the earlier
// period and h >= prev_period / plateau_safety so that N_j >= prev_period
// remains admissible. Among residual sizes within eps_tower / 2^j the
// smallest score wins: a nonzero remainder r = M mod n scores r; when n | M
// (and j < J) one column is withheld and scores n / 4.
HeightChoice choose_height(std::size_t M, std::size_t j, std::size_t J, std::size_t K, const SculptConfig& cfg,
                           std::size_t prev_period) {
    const std::size_t h_lo = static_cast<std::size_t>(std::ceil(static_cast<double>(prev_period) / cfg.plateau_safety - 1e-9));
    const std::size_t step = prev_period / std::gcd(prev_period, K);
    const std::size_t h0 = std::max<std::size_t>(1, (h_lo + step - 1) / step * step);
    const std::size_t h_hi = std::min(M / K, cfg.height_search_factor * (h0 + step));
    const double rmax = static_cast<double>(M) * cfg.eps_tower / std::ldexp(1.0, static_cast<int>(j));
    HeightChoice best;
    for (std::size_t h = h0; h <= h_hi; h += step) {
        const std::size_t n = K * h, rem = M % n;
        HeightChoice c;
        c.h = h;
        if (rem > 0) {
            c.r = rem;
            c.score = static_cast<double>(rem);
            c.mode = ResidualMode::Remainder;
        } else if (j < J && M / n >= 2) {
            c.r = n;
            c.score = static_cast<double>(n) / 4.0;
            c.mode = ResidualMode::WithheldColumn;
        } else {
            continue;
        }
        if (static_cast<double>(c.r) > rmax) continue;
        if (best.h == 0 || c.score < best.score) best = c;
    }
    if (best.h == 0)
        throw Error("stage " + std::to_string(j) + ": no admissible tower height in [" + std::to_string(h0) + ", " +
                    std::to_string(h_hi) + "] (residual bound " + std::to_string(rmax) + " atoms)");
    return best;
}

Tower withhold_last_column(const FiniteSystem& sys, const Tower& t) {
    std::vector<Atom> base = t.base.members();
    if (base.empty()) throw Error("cannot withhold a column from an empty tower");
    base.pop_back();
    return make_tower(sys, t.side, AtomSet::from_sorted(sys, std::move(base)));
}

}  // namespace

Observable StageSpec::function() const {
    std::vector<double> v(pattern.values());
    simd::kernels().scale(v.data(), amplitude, v.size());
    return Observable(std::move(v));
}

double StageSpec::zero_mean_residual(const FiniteSystem& sys) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += subtower_mass[i] * values[i];
    s += E.measure() * residual_value;
    (void)sys;
    return std::fabs(s);
}

std::string residual_mode_name(ResidualMode m) {
    return m == ResidualMode::Remainder ? "remainder" : "withheld";
}

StageSpec build_stage(const FiniteSystem& sys, std::size_t j, std::size_t J, std::size_t K,
                      const EmpiricalDistribution& target, const SculptConfig& cfg, std::size_t prev_period) {
    if (K < 1) throw Error("stage " + std::to_string(j) + ": subtower count must be positive");
    if (target.dimension() != 1) throw Error("sculpt target must be a 1-d distribution");
    const int d = sys.dimension();
    const std::size_t M = sys.size();
    StageSpec st;
    st.j = j;
    st.K = K;
    st.subtower_count = upow(K, d);
    st.amplitude = 1.0;
    if (d == 1) {
        const HeightChoice hc = choose_height(M, j, J, K, cfg, prev_period);
        st.h = hc.h;
        st.n = K * hc.h;
        st.mode = hc.mode;
        st.tower = rokhlin_tower_1d(sys, st.n, 1.0).tower;
        if (hc.mode == ResidualMode::WithheldColumn) st.tower = withhold_last_column(sys, st.tower);
    } else {
        const std::size_t h_lo =
            static_cast<std::size_t>(std::ceil(static_cast<double>(prev_period) / cfg.plateau_safety - 1e-9));
        const std::size_t step = prev_period / std::gcd(prev_period, K);
        st.h = std::max<std::size_t>(1, (h_lo + step - 1) / step * step);
        st.n = K * st.h;
        const double eps = cfg.eps_tower / std::ldexp(1.0, static_cast<int>(j));
        st.tower = build_tower_zd(sys, st.n, eps).tower;
        st.mode = ResidualMode::Remainder;
        if (st.tower.residual.empty()) {
            st.tower = withhold_last_column(sys, st.tower);
            st.mode = ResidualMode::WithheldColumn;
        }
    }
    st.E = st.tower.residual;
    if (st.E.empty()) throw Error("stage " + std::to_string(j) + ": residual set is empty");

    const std::size_t S = st.subtower_count;
    std::vector<double> q(S);
    for (std::size_t i = 0; i < S; ++i)
        q[i] = quantile(target, (static_cast<double>(i) + 0.5) / static_cast<double>(S));
    std::vector<double> pattern(M, 0.0), mass(S, 0.0);
    const std::size_t n = st.n, h = st.h;
    for (Atom b : st.tower.base.members()) {
        std::size_t idx = 0;
        for_each_column_atom(sys, b, n, [&](Atom x) {
            // idx enumerates w in {0..n-1}^d row-major; map to the subcube.
            std::size_t rest = idx, sub = 0;
            std::size_t place = 1;
            for (int k = d - 1; k >= 0; --k) {
                const std::size_t wk = rest % n;
                rest /= n;
                sub += (wk / h) * place;
                place *= K;
            }
            pattern[x] = q[sub];
            mass[sub] += sys.weight(x);
            ++idx;
        });
    }
    double s = 0.0;
    for (std::size_t i = 0; i < S; ++i) s += mass[i] * q[i];
    const double c = -s / st.E.measure();
    for (Atom x : st.E.members()) pattern[x] = c;
    st.values = q;
    st.subtower_mass = mass;
    st.residual_value = c;
    st.pattern = Observable(std::move(pattern));
    return st;
}

std::size_t choose_N_j(const FiniteSystem& sys, const std::vector<StageSpec>& stages, std::size_t j,
                       std::size_t prev_period, const SculptConfig& cfg, double* leakage, double* limit) {
    if (j < 1 || j > stages.size()) throw Error("choose_N_j: stage index out of range");
    const StageSpec& cur = stages[j - 1];
    const double cap = cfg.plateau_safety * static_cast<double>(cur.h);
    const Observable earlier = scaled_sum(sys, stages, 0, j - 1);
    const double lim = cfg.eta * std::fabs(cur.amplitude) * lp_norm(cur.pattern, sys, 1.0);
    const bool vacuous = lp_norm(earlier, sys, kInf) == 0.0;
    std::size_t N = std::max<std::size_t>(1, prev_period);
    double leak = 0.0;
    while (true) {
        if (static_cast<double>(N) > cap)
            throw Error("stage " + std::to_string(j) + ": no admissible N (need N <= " + std::to_string(cap) +
                        ", last leakage " + std::to_string(leak) + " > limit " + std::to_string(lim) + ")");
        leak = vacuous ? 0.0 : lp_norm(apply_operator(cube_operator(N, sys.dimension()), sys, earlier), sys, 1.0);
        if (leak <= lim) break;
        N *= 2;
    }
    if (leakage) *leakage = leak;
    if (limit) *limit = lim;
    return N;
}

double tail_bound(const SculptPlan& plan, std::size_t j) {
    const FiniteSystem& sys = *plan.sys;
    if (j < 1 || j > plan.stages.size()) throw Error("tail_bound: stage index out of range");
    if (j == plan.stages.size()) return 0.0;
    const StageSpec& st = plan.stages[j - 1];
    const WeightedOperator P = cube_operator(st.N, sys.dimension());
    const Observable tail = scaled_sum(sys, plan.stages, j, plan.stages.size());
    const double t = lp_norm(apply_operator(P, sys, tail), sys, 1.0);
    if (t == 0.0) return 0.0;
    const double head = lp_norm(apply_operator(P, sys, st.function()), sys, 1.0);
    return head > 0.0 ? t / head : INFINITY;
}

SculptPlan sculpt(const FiniteSystem& sys, const EmpiricalDistribution& target, const SculptConfig& cfg) {
    if (cfg.J < 1) throw Error("sculpt: J must be at least 1");
    if (!(cfg.decay > 0.0 && cfg.decay < 1.0)) throw Error("sculpt: decay must lie in (0, 1)");
    if (!(cfg.plateau_safety > 0.0)) throw Error("sculpt: plateau_safety must be positive");
    if (!cfg.subtowers_per_axis.empty() && cfg.subtowers_per_axis.size() != cfg.J)
        throw Error("sculpt: subtowers_per_axis needs one entry per stage");
    SculptPlan plan;
    plan.sys = &sys;
    plan.config = cfg;
    plan.target = target;
    const double tnorm = cfg.normalizer == Normalizer::L1
                             ? target.abs_mean()
                             : std::sqrt([&] {
                                   double s = 0.0;
                                   for (std::size_t i = 0; i < target.size(); ++i)
                                       s += target.masses()[i] * target.x()[i] * target.x()[i];
                                   return s;
                               }());
    plan.degenerate = !(tnorm > kDegenerateNorm);
    plan.normalized = plan.degenerate ? target : target.scaled(1.0 / tnorm);

    std::size_t period = 1;
    for (std::size_t j = 1; j <= cfg.J; ++j) {
        const std::size_t K = cfg.subtowers_per_axis.empty() ? j : cfg.subtowers_per_axis[j - 1];
        try {
            plan.stages.push_back(build_stage(sys, j, cfg.J, K, target, cfg, period));
        } catch (const TowerBuildFailure& e) {
            throw Error("stage " + std::to_string(j) + ": " + e.what());
        }
        plan.stages.back().amplitude = std::pow(cfg.decay, static_cast<double>(j - 1));
        period = std::lcm(period, plan.stages.back().n);
    }

    // Pick N_j stage by stage; when a tail is too heavy, shrink every later
    // amplitude and redo the later scales.
    for (plan.rounds = 1;; ++plan.rounds) {
        std::size_t prev = 1;
        for (std::size_t j = 1; j <= cfg.J; ++j) {
            StageSpec& st = plan.stages[j - 1];
            st.N = choose_N_j(sys, plan.stages, j, prev, cfg, &st.leakage, &st.leakage_limit);
            prev = std::lcm(prev, st.n);
        }
        std::size_t bad = 0;
        double ratio = 0.0;
        for (std::size_t j = 1; j < cfg.J && !plan.degenerate; ++j) {
            const double t = tail_bound(plan, j);
            if (t > cfg.eta) {
                bad = j;
                ratio = t;
                break;
            }
        }
        if (bad == 0) break;
        if (plan.rounds >= cfg.max_rounds)
            throw Error("stage " + std::to_string(bad) + ": tail ratio " + std::to_string(ratio) + " above eta after " +
                        std::to_string(plan.rounds) + " rounds");
        const double shrink = cfg.shrink_margin * cfg.eta / ratio;
        for (std::size_t m = bad; m < cfg.J; ++m) plan.stages[m].amplitude *= shrink;
    }

    for (auto& st : plan.stages) {
        for (double& v : st.values) v *= st.amplitude;
        st.residual_value *= st.amplitude;
        const double rcap = std::floor(cfg.plateau_safety * static_cast<double>(st.h));
        st.R = std::max(st.N, static_cast<std::size_t>(std::min(cfg.plateau_ratio * static_cast<double>(st.N), rcap)));
    }
    plan.f = scaled_sum(sys, plan.stages, 0, plan.stages.size());

    for (std::size_t j = 1; j <= cfg.J; ++j) {
        StageDistance dist{j, plan.stages[j - 1].N, 0.0, 0.0, tail_bound(plan, j), 0.0, true};
        auto u = normalized_average(plan, dist.N);
        if (u && !plan.degenerate) {
            const auto lw = law(sys, *u);
            dist.w1 = w1_distance(lw, plan.normalized);
            dist.bl = bl_distance(lw, plan.normalized);
            dist.degenerate = false;
        }
        dist.norm = norm_of(apply_operator(cube_operator(dist.N, sys.dimension()), sys, plan.f), sys, cfg.normalizer);
        plan.distances.push_back(dist);
    }
    return plan;
}

std::optional<Observable> normalized_average(const SculptPlan& plan, std::size_t n) {
    const FiniteSystem& sys = *plan.sys;
    Observable P = apply_operator(cube_operator(n, sys.dimension()), sys, plan.f);
    const double nrm = norm_of(P, sys, plan.config.normalizer);
    if (!(nrm >= kDegenerateNorm)) return std::nullopt;
    simd::kernels().scale(P.data(), 1.0 / nrm, P.size());
    return P;
}

std::optional<EmpiricalDistribution> normalized_law(const SculptPlan& plan, std::size_t n) {
    auto u = normalized_average(plan, n);
    if (!u) return std::nullopt;
    return law(*plan.sys, *u);
}

std::vector<PlateauRow> plateau_profile(const SculptPlan& plan, std::size_t k, std::size_t samples, std::size_t R) {
    if (k < 1 || k > plan.stages.size()) throw Error("plateau_profile: stage index out of range");
    if (samples < 1) throw Error("plateau_profile: need at least one sample");
    const std::size_t Nk = plan.stages[k - 1].N;
    if (R == 0) R = plan.stages[k - 1].R;
    if (R < Nk) throw Error("plateau_profile: empty range [" + std::to_string(Nk) + ", " + std::to_string(R) + "]");
    const auto base = normalized_law(plan, Nk);
    if (!base) throw Error("plateau_profile: degenerate average at N_k");
    std::vector<PlateauRow> rows;
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = samples == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(samples - 1);
        const std::size_t n = static_cast<std::size_t>(
            std::llround(static_cast<double>(Nk) * std::pow(static_cast<double>(R) / static_cast<double>(Nk), t)));
        const auto lw = normalized_law(plan, n);
        if (!lw) throw Error("plateau_profile: degenerate average at n = " + std::to_string(n));
        rows.push_back({n, bl_distance(*lw, *base), w1_distance(*lw, *base)});
    }
    return rows;
}

double independence_probe(const SculptPlan& plan, std::size_t k, std::size_t j) {
    if (k == j) throw Error("independence_probe: k and j must differ");
    if (k < 1 || j < 1 || k > plan.stages.size() || j > plan.stages.size())
        throw Error("independence_probe: stage index out of range");
    const FiniteSystem& sys = *plan.sys;
    auto uk = normalized_average(plan, plan.stages[k - 1].N);
    auto uj = normalized_average(plan, plan.stages[j - 1].N);
    if (!uk || !uj) return 0.0;
    const auto joint = joint_law(sys, *uk, *uj);
    return bl_distance(joint, product(joint.marginal_x(), joint.marginal_y()));
}

double independence_control(const SculptPlan& plan, std::size_t k, std::int64_t shift) {
    if (k < 1 || k > plan.stages.size()) throw Error("independence_control: stage index out of range");
    const FiniteSystem& sys = *plan.sys;
    auto uk = normalized_average(plan, plan.stages[k - 1].N);
    if (!uk) return 0.0;
    std::vector<double> shifted(sys.size());
    GroupElement z(sys.dimension(), 0);
    z[0] = shift;
    sys.pullback(z, uk->span(), shifted);
    const auto joint = joint_law(sys, *uk, Observable(std::move(shifted)));
    return bl_distance(joint, product(joint.marginal_x(), joint.marginal_y()));
}

}  // namespace ergolab
