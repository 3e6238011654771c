#include "ergolab/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace ergolab {
namespace {

struct Kahan {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double t = s + x;
        c += std::fabs(s) >= std::fabs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

void check_total(const std::vector<double>& mass) {
    Kahan k;
    for (double m : mass) k.add(m);
    if (std::fabs(k.value() - 1.0) > kTol) throw Error("distribution masses must sum to 1");
}

// Merged support of two 1-d laws: gaps d_k = t_{k+1} - t_k and cumulative
// signed mass W_k = (F_a - F_b)(t_k).
struct Merged {
    std::vector<double> gap, cum;
};

Merged merge_cdfs(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    if (a.dimension() != 1 || b.dimension() != 1) throw Error("1-d distance needs 1-d distributions");
    Merged m;
    std::size_t i = 0, j = 0;
    const auto &ax = a.x(), &bx = b.x(), &am = a.masses(), &bm = b.masses();
    Kahan W;
    double prev = 0.0;
    bool first = true;
    while (i < ax.size() || j < bx.size()) {
        double t;
        if (j == bx.size() || (i < ax.size() && ax[i] < bx[j]))
            t = ax[i];
        else
            t = bx[j];
        if (!first) {
            m.gap.push_back(t - prev);
            m.cum.push_back(W.value());
        }
        while (i < ax.size() && ax[i] == t) W.add(am[i++]);
        while (j < bx.size() && bx[j] == t) W.add(-bm[j++]);
        prev = t;
        first = false;
    }
    return m;
}

// Exact 1-d BL: min-cost flow on the merged support path with truncated cost
// min(|x - y|, 2), i.e. path edges of length d_k plus a hub joined to every
// node at cost 1. In cumulative hub-flow variables G this is
//     min  sum_k |G_k - G_{k-1}| + sum_k d_k |G_k + W_k|,   G_{-1} = G_n = 0,
// solved by a slope trick: keep h(x) = m + sum_L w (l - x)^+ + sum_R w (x - r)^+
// with max L <= min R; inf-convolving with |.| trims slopes to [-1, 1].
double bl_1d(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    Merged mg = merge_cdfs(a, b);
    std::map<double, double> L, R;  // breakpoint -> weight
    double m = 0.0;
    L[0.0] = 1.0;
    R[0.0] = 1.0;
    double totL = 1.0, totR = 1.0;  // swaps preserve both totals
    auto trim = [](std::map<double, double>& side, double& total, bool from_low) {
        while (total > 1.0 + 1e-15 && !side.empty()) {
            auto it = from_low ? side.begin() : std::prev(side.end());
            const double excess = total - 1.0;
            if (it->second <= excess) {
                total -= it->second;
                side.erase(it);
            } else {
                it->second -= excess;
                total = 1.0;
            }
        }
    };
    for (std::size_t k = 0; k < mg.gap.size(); ++k) {
        const double w = mg.gap[k];
        const double at = -mg.cum[k];
        if (w > 0.0) {
            L[at] += w;
            R[at] += w;
            totL += w;
            totR += w;
            while (!L.empty() && !R.empty()) {
                auto li = std::prev(L.end());
                auto ri = R.begin();
                if (li->first <= ri->first) break;
                const double l = li->first, r = ri->first;
                const double t = std::min(li->second, ri->second);
                m += t * (l - r);
                if ((li->second -= t) <= 0.0) L.erase(li);
                if ((ri->second -= t) <= 0.0) R.erase(ri);
                L[r] += t;
                R[l] += t;
            }
        }
        trim(L, totL, true);
        trim(R, totR, false);
    }
    double v = m;
    for (auto& [l, w] : L) v += w * std::max(l, 0.0);
    for (auto& [r, w] : R) v += w * std::max(-r, 0.0);
    return std::max(v, 0.0);
}

// Snaps a 1-d law onto `bins` equal-width cells; each cell keeps its
// mass-weighted mean value.
EmpiricalDistribution coarsen(const EmpiricalDistribution& d, std::size_t bins) {
    if (d.size() <= bins) return d;
    const double lo = d.x().front(), hi = d.x().back();
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<double> mass(bins, 0.0), moment(bins, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::size_t c = width > 0.0 ? static_cast<std::size_t>((d.x()[i] - lo) / width) : 0;
        if (c >= bins) c = bins - 1;
        mass[c] += d.masses()[i];
        moment[c] += d.masses()[i] * d.x()[i];
    }
    std::vector<std::pair<double, double>> atoms;
    Kahan total;
    for (std::size_t c = 0; c < bins; ++c)
        if (mass[c] > 0.0) {
            atoms.emplace_back(std::clamp(moment[c] / mass[c], lo, hi), mass[c]);
            total.add(mass[c]);
        }
    for (auto& a : atoms) a.second /= total.value();
    return EmpiricalDistribution::from_atoms(std::move(atoms));
}

double bl_2d(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto* d : {&a, &b})
        for (std::size_t i = 0; i < d->size(); ++i) {
            x0 = std::min(x0, d->x()[i]);
            x1 = std::max(x1, d->x()[i]);
            y0 = std::min(y0, d->y()[i]);
            y1 = std::max(y1, d->y()[i]);
        }
    // Net signed mass, optionally binned onto a 257 x 257 grid for speed.
    std::vector<double> px, py, rho;
    constexpr std::size_t kDirect = 20000, G = 257;
    if (a.size() + b.size() <= kDirect) {
        for (int side = 0; side < 2; ++side) {
            const EmpiricalDistribution* d = side == 0 ? &a : &b;
            const double sgn = side == 0 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < d->size(); ++i) {
                px.push_back(d->x()[i]);
                py.push_back(d->y()[i]);
                rho.push_back(sgn * d->masses()[i]);
            }
        }
    } else {
        std::vector<double> cell(G * G, 0.0);
        const double wx = (x1 - x0) / (G - 1), wy = (y1 - y0) / (G - 1);
        for (int side = 0; side < 2; ++side) {
            const EmpiricalDistribution* d = side == 0 ? &a : &b;
            const double sgn = side == 0 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < d->size(); ++i) {
                const std::size_t cx = wx > 0 ? static_cast<std::size_t>(std::lround((d->x()[i] - x0) / wx)) : 0;
                const std::size_t cy = wy > 0 ? static_cast<std::size_t>(std::lround((d->y()[i] - y0) / wy)) : 0;
                cell[cx * G + cy] += sgn * d->masses()[i];
            }
        }
        for (std::size_t cx = 0; cx < G; ++cx)
            for (std::size_t cy = 0; cy < G; ++cy)
                if (cell[cx * G + cy] != 0.0) {
                    px.push_back(x0 + wx * cx);
                    py.push_back(y0 + wy * cy);
                    rho.push_back(cell[cx * G + cy]);
                }
    }
    constexpr int K = 33;
    auto grid = [](double lo, double hi, int k) { return lo + (hi - lo) * k / (K - 1); };
    double best = 0.0;
    auto eval = [&](auto g) {
        double s = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i) s += rho[i] * g(px[i], py[i]);
        best = std::max(best, std::fabs(s));
    };
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            const double cx = grid(x0, x1, i), cy = grid(y0, y1, j);
            eval([&](double x, double y) {
                return std::max(-1.0, 1.0 - std::max(std::fabs(x - cx), std::fabs(y - cy)));
            });
        }
    for (int i = 0; i < K; ++i) {
        const double cx = grid(x0, x1, i), cy = grid(y0, y1, i);
        eval([&](double x, double) { return std::clamp(x - cx, -1.0, 1.0); });
        eval([&](double, double y) { return std::clamp(y - cy, -1.0, 1.0); });
    }
    return best;
}

}  // namespace

EmpiricalDistribution EmpiricalDistribution::from_atoms(std::vector<std::pair<double, double>> atoms) {
    for (const auto& [v, m] : atoms)
        if (!std::isfinite(v) || !std::isfinite(m) || m < 0.0) throw Error("distribution atoms must be finite, mass >= 0");
    std::sort(atoms.begin(), atoms.end());
    EmpiricalDistribution d;
    d.dim_ = 1;
    double group_start = 0.0;
    Kahan group;
    auto flush = [&] {
        if (group.value() > 0.0) {
            d.x_.push_back(group_start);
            d.mass_.push_back(group.value());
        }
    };
    bool open = false;
    for (const auto& [v, m] : atoms) {
        if (open && v - group_start <= kValueMergeTol) {
            group.add(m);
            continue;
        }
        if (open) flush();
        group = {};
        group.add(m);
        group_start = v;
        open = true;
    }
    if (open) flush();
    if (d.mass_.empty()) throw Error("distribution has no mass");
    check_total(d.mass_);
    return d;
}

EmpiricalDistribution EmpiricalDistribution::from_atoms_2d(
    std::vector<std::pair<std::pair<double, double>, double>> atoms) {
    for (const auto& [p, m] : atoms)
        if (!std::isfinite(p.first) || !std::isfinite(p.second) || !std::isfinite(m) || m < 0.0)
            throw Error("distribution atoms must be finite, mass >= 0");
    std::sort(atoms.begin(), atoms.end());
    EmpiricalDistribution d;
    d.dim_ = 2;
    std::pair<double, double> start{};
    Kahan group;
    bool open = false;
    auto flush = [&] {
        if (group.value() > 0.0) {
            d.x_.push_back(start.first);
            d.y_.push_back(start.second);
            d.mass_.push_back(group.value());
        }
    };
    for (const auto& [p, m] : atoms) {
        if (open && p.first - start.first <= kValueMergeTol && std::fabs(p.second - start.second) <= kValueMergeTol) {
            group.add(m);
            continue;
        }
        if (open) flush();
        group = {};
        group.add(m);
        start = p;
        open = true;
    }
    if (open) flush();
    if (d.mass_.empty()) throw Error("distribution has no mass");
    check_total(d.mass_);
    return d;
}

EmpiricalDistribution EmpiricalDistribution::uniform_grid(double a, double b, std::size_t n) {
    if (n == 0 || !(b >= a)) throw Error("uniform_grid needs n >= 1 and b >= a");
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        atoms.emplace_back(a + (b - a) * (static_cast<double>(i) + 0.5) / static_cast<double>(n),
                           1.0 / static_cast<double>(n));
    return from_atoms(std::move(atoms));
}

double EmpiricalDistribution::mean() const {
    if (dim_ != 1) throw Error("mean of a 2-d distribution");
    Kahan k;
    for (std::size_t i = 0; i < size(); ++i) k.add(mass_[i] * x_[i]);
    return k.value();
}

double EmpiricalDistribution::abs_mean() const {
    if (dim_ != 1) throw Error("abs_mean of a 2-d distribution");
    Kahan k;
    for (std::size_t i = 0; i < size(); ++i) k.add(mass_[i] * std::fabs(x_[i]));
    return k.value();
}

EmpiricalDistribution EmpiricalDistribution::scaled(double lambda) const {
    if (dim_ != 1) throw Error("scaled: 1-d only");
    std::vector<std::pair<double, double>> atoms;
    for (std::size_t i = 0; i < size(); ++i) atoms.emplace_back(lambda * x_[i], mass_[i]);
    return from_atoms(std::move(atoms));
}

EmpiricalDistribution EmpiricalDistribution::marginal_x() const {
    if (dim_ != 2) throw Error("marginal of a 1-d distribution");
    std::vector<std::pair<double, double>> atoms;
    for (std::size_t i = 0; i < size(); ++i) atoms.emplace_back(x_[i], mass_[i]);
    return from_atoms(std::move(atoms));
}

EmpiricalDistribution EmpiricalDistribution::marginal_y() const {
    if (dim_ != 2) throw Error("marginal of a 1-d distribution");
    std::vector<std::pair<double, double>> atoms;
    for (std::size_t i = 0; i < size(); ++i) atoms.emplace_back(y_[i], mass_[i]);
    return from_atoms(std::move(atoms));
}

EmpiricalDistribution law(const FiniteSystem& sys, const Observable& f) {
    if (f.size() != sys.size()) throw Error("observable length differs from atom count");
    std::vector<std::pair<double, double>> atoms(f.size());
    for (std::size_t x = 0; x < f.size(); ++x) atoms[x] = {f[x], sys.weights()[x]};
    return EmpiricalDistribution::from_atoms(std::move(atoms));
}

EmpiricalDistribution joint_law(const FiniteSystem& sys, const Observable& f, const Observable& g) {
    if (f.size() != sys.size() || g.size() != sys.size()) throw Error("observable length differs from atom count");
    std::vector<std::pair<std::pair<double, double>, double>> atoms(f.size());
    for (std::size_t x = 0; x < f.size(); ++x) atoms[x] = {{f[x], g[x]}, sys.weights()[x]};
    return EmpiricalDistribution::from_atoms_2d(std::move(atoms));
}

EmpiricalDistribution product(const EmpiricalDistribution& a, const EmpiricalDistribution& b,
                              std::size_t max_marginal_atoms) {
    if (a.dimension() != 1 || b.dimension() != 1) throw Error("product of 1-d laws only");
    const EmpiricalDistribution ca = coarsen(a, max_marginal_atoms), cb = coarsen(b, max_marginal_atoms);
    std::vector<std::pair<std::pair<double, double>, double>> atoms;
    atoms.reserve(ca.size() * cb.size());
    for (std::size_t i = 0; i < ca.size(); ++i)
        for (std::size_t j = 0; j < cb.size(); ++j)
            atoms.push_back({{ca.x()[i], cb.x()[j]}, ca.masses()[i] * cb.masses()[j]});
    return EmpiricalDistribution::from_atoms_2d(std::move(atoms));
}

double bl_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    if (a.dimension() != b.dimension()) throw Error("bl_distance: dimensionality mismatch");
    return a.dimension() == 1 ? bl_1d(a, b) : bl_2d(a, b);
}

double w1_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    if (a.dimension() != 1 || b.dimension() != 1) throw Error("w1_distance: 1-d only");
    Merged m = merge_cdfs(a, b);
    Kahan k;
    for (std::size_t i = 0; i < m.gap.size(); ++i) k.add(std::fabs(m.cum[i]) * m.gap[i]);
    return k.value();
}

double quantile(const EmpiricalDistribution& nu, double r) {
    if (nu.dimension() != 1) throw Error("quantile: 1-d only");
    if (!(r > 0.0 && r < 1.0)) throw Error("quantile rank must lie in (0, 1)");
    Kahan cum;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        cum.add(nu.masses()[i]);
        if (cum.value() >= r) return nu.x()[i];
    }
    return nu.x().back();
}

}  // namespace ergolab
