#include "ergolab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ergolab/averaging.hpp"
#include "ergolab/covering.hpp"
#include "ergolab/sculptor.hpp"
#include "ergolab/simd/kernels.hpp"
#include "ergolab/towers.hpp"

namespace ergolab {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

const std::vector<std::string> kKinds = {"average", "shells",  "randomsets", "kakutani", "tower",       "tower-zd",
                                         "cover",   "birkhoff", "sculpt",    "plateau",  "independence"};

const std::vector<std::string> kSculptFields = {"target", "J", "decay", "eta", "eps_tower", "plateau_safety",
                                                "subtowers_per_axis", "normalizer", "height_search_factor",
                                                "max_rounds", "plateau_samples"};

// ------------------------------------------------------------ validation

struct Checker {
    std::vector<Diagnostic> out;

    void err(const std::string& path, const std::string& msg) { out.push_back({path, msg}); }

    bool object(const json& j, const std::string& path) {
        if (!j.is_object()) {
            err(path, "expected an object");
            return false;
        }
        return true;
    }

    void known(const json& obj, const std::string& path, const std::vector<std::string>& names) {
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (std::find(names.begin(), names.end(), it.key()) == names.end())
                err(path + "." + it.key(), "unknown field");
    }

    const json* get(const json& obj, const std::string& key, const std::string& path, bool required) {
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) err(path + "." + key, "missing required field");
            return nullptr;
        }
        return &*it;
    }

    bool integer(const json& obj, const std::string& key, const std::string& path, bool required, double lo,
                 double hi = 1e18) {
        const json* v = get(obj, key, path, required);
        if (!v) return false;
        if (!v->is_number_integer()) {
            err(path + "." + key, "expected an integer");
            return false;
        }
        const double x = v->is_number_unsigned() ? static_cast<double>(v->get<std::uint64_t>())
                                                 : static_cast<double>(v->get<std::int64_t>());
        if (x < lo || x > hi) {
            err(path + "." + key, "out of range [" + num(lo) + ", " + num(hi) + "]");
            return false;
        }
        return true;
    }

    bool number(const json& obj, const std::string& key, const std::string& path, bool required, double lo,
                double hi, bool lo_open = false, bool hi_open = false) {
        const json* v = get(obj, key, path, required);
        if (!v) return false;
        if (!v->is_number()) {
            err(path + "." + key, "expected a number");
            return false;
        }
        const double x = v->get<double>();
        const bool bad = !std::isfinite(x) || (lo_open ? x <= lo : x < lo) || (hi_open ? x >= hi : x > hi);
        if (bad) {
            err(path + "." + key, std::string("out of range ") + (lo_open ? "(" : "[") + num(lo) + ", " + num(hi) +
                                      (hi_open ? ")" : "]"));
            return false;
        }
        return true;
    }

    bool int_list(const json& obj, const std::string& key, const std::string& path, bool required, double lo,
                  bool nonempty = true) {
        const json* v = get(obj, key, path, required);
        if (!v) return false;
        if (!v->is_array() || (nonempty && v->empty())) {
            err(path + "." + key, nonempty ? "expected a non-empty array of integers" : "expected an array of integers");
            return false;
        }
        bool ok = true;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            const std::string p = path + "." + key + "[" + std::to_string(i) + "]";
            if (!e.is_number_integer()) {
                err(p, "expected an integer");
                ok = false;
            } else if ((e.is_number_unsigned() ? static_cast<double>(e.get<std::uint64_t>())
                                               : static_cast<double>(e.get<std::int64_t>())) < lo) {
                err(p, "must be >= " + num(lo));
                ok = false;
            }
        }
        return ok;
    }

    bool num_list(const json& obj, const std::string& key, const std::string& path, bool required, double lo) {
        const json* v = get(obj, key, path, required);
        if (!v) return false;
        if (!v->is_array() || v->empty()) {
            err(path + "." + key, "expected a non-empty array of numbers");
            return false;
        }
        bool ok = true;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            const std::string p = path + "." + key + "[" + std::to_string(i) + "]";
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                err(p, "expected a finite number");
                ok = false;
            } else if (e.get<double>() < lo) {
                err(p, "must be >= " + num(lo));
                ok = false;
            }
        }
        return ok;
    }

    bool choice(const json& obj, const std::string& key, const std::string& path, bool required,
                const std::vector<std::string>& options) {
        const json* v = get(obj, key, path, required);
        if (!v) return false;
        if (!v->is_string() || std::find(options.begin(), options.end(), v->get<std::string>()) == options.end()) {
            std::string all;
            for (const auto& o : options) all += (all.empty() ? "" : ", ") + o;
            err(path + "." + key, "expected one of: " + all);
            return false;
        }
        return true;
    }

    static std::string num(double x) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%g", x);
        return buf;
    }
};

void check_system(Checker& c, const json& cfg) {
    const json* sys = c.get(cfg, "system", "config", true);
    if (!sys || !c.object(*sys, "config.system")) return;
    const std::string p = "config.system";
    c.known(*sys, p, {"backend", "M", "dims", "permutation", "weights"});
    if (!c.choice(*sys, "backend", p, true, {"cycle", "torus", "permutation"})) return;
    const std::string b = (*sys)["backend"].get<std::string>();
    std::size_t size = 0;
    if (b == "cycle") {
        if (c.integer(*sys, "M", p, true, 1, 4294967295.0)) size = (*sys)["M"].get<std::size_t>();
        if (sys->contains("dims")) c.err(p + ".dims", "not used by the cycle backend");
        if (sys->contains("permutation")) c.err(p + ".permutation", "not used by the cycle backend");
    } else if (b == "torus") {
        if (c.int_list(*sys, "dims", p, true, 1)) {
            const json& dims = (*sys)["dims"];
            if (dims.size() > 16) c.err(p + ".dims", "at most 16 axes are supported");
            double s = 1;
            for (const auto& d : dims) s *= d.get<double>();
            if (s > 4294967295.0) c.err(p + ".dims", "too many atoms");
            else size = static_cast<std::size_t>(s);
        }
        if (sys->contains("M")) c.err(p + ".M", "not used by the torus backend");
        if (sys->contains("permutation")) c.err(p + ".permutation", "not used by the torus backend");
    } else {
        if (c.int_list(*sys, "permutation", p, true, 0)) size = (*sys)["permutation"].size();
        if (sys->contains("M")) c.err(p + ".M", "not used by the permutation backend");
        if (sys->contains("dims")) c.err(p + ".dims", "not used by the permutation backend");
    }
    if (c.num_list(*sys, "weights", p, false, 0.0) && size > 0 && (*sys)["weights"].size() != size)
        c.err(p + ".weights", "expected " + std::to_string(size) + " weights");
}

void check_observable(Checker& c, const json& cfg) {
    const json* ob = c.get(cfg, "observable", "config", false);
    if (!ob || !c.object(*ob, "config.observable")) return;
    const std::string p = "config.observable";
    c.known(*ob, p, {"type", "value", "values", "lo", "hi"});
    if (!c.choice(*ob, "type", p, true, {"random_zero_mean", "random", "constant", "values"})) return;
    const std::string t = (*ob)["type"].get<std::string>();
    if (t == "constant") c.number(*ob, "value", p, true, -1e300, 1e300);
    if (t == "values") c.num_list(*ob, "values", p, true, -1e300);
    if (t == "random") {
        const bool a = c.number(*ob, "lo", p, false, -1e300, 1e300);
        const bool b = c.number(*ob, "hi", p, false, -1e300, 1e300);
        if (a && b && (*ob)["lo"].get<double>() >= (*ob)["hi"].get<double>()) c.err(p + ".hi", "must exceed lo");
    }
}

void check_target(Checker& c, const json& params, const std::string& pp) {
    const json* t = c.get(params, "target", pp, true);
    const std::string p = pp + ".target";
    if (!t || !c.object(*t, p)) return;
    c.known(*t, p, {"type", "a", "b", "grid", "atoms", "value"});
    if (!c.choice(*t, "type", p, true, {"rademacher", "uniform", "atoms", "point"})) return;
    const std::string ty = (*t)["type"].get<std::string>();
    if (ty == "uniform") {
        const bool a = c.number(*t, "a", p, false, -1e300, 1e300);
        const bool b = c.number(*t, "b", p, false, -1e300, 1e300);
        const double av = a ? (*t)["a"].get<double>() : -1.0, bv = b ? (*t)["b"].get<double>() : 1.0;
        if (av >= bv) c.err(p + ".b", "must exceed a");
        c.integer(*t, "grid", p, false, 1, 1e7);
    } else if (ty == "point") {
        c.number(*t, "value", p, true, -1e300, 1e300);
    } else if (ty == "atoms") {
        const json* a = c.get(*t, "atoms", p, true);
        if (a) {
            if (!a->is_array() || a->empty()) {
                c.err(p + ".atoms", "expected a non-empty array of [value, mass] pairs");
            } else {
                double total = 0;
                for (std::size_t i = 0; i < a->size(); ++i) {
                    const json& e = (*a)[i];
                    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number() ||
                        e[1].get<double>() < 0) {
                        c.err(p + ".atoms[" + std::to_string(i) + "]", "expected [value, mass] with mass >= 0");
                    } else {
                        total += e[1].get<double>();
                    }
                }
                if (!(total > 0)) c.err(p + ".atoms", "total mass must be positive");
            }
        }
    }
}

void check_sculpt(Checker& c, const json& params, const std::string& p) {
    check_target(c, params, p);
    c.integer(params, "J", p, false, 1, 16);
    c.number(params, "decay", p, false, 0, 1, true, true);
    c.number(params, "eta", p, false, 0, 1e300, true);
    c.number(params, "eps_tower", p, false, 0, 1, true);
    c.number(params, "plateau_safety", p, false, 0, 1, true);
    c.int_list(params, "subtowers_per_axis", p, false, 1);
    c.choice(params, "normalizer", p, false, {"l1", "l2"});
    c.integer(params, "height_search_factor", p, false, 1, 1e6);
    c.integer(params, "max_rounds", p, false, 1, 1000);
    c.integer(params, "plateau_samples", p, false, 1, 1000);
    if (params.contains("subtowers_per_axis") && params["subtowers_per_axis"].is_array()) {
        const std::size_t J = params.contains("J") && params["J"].is_number_integer() ? params["J"].get<std::size_t>() : 3;
        if (params["subtowers_per_axis"].size() != J)
            c.err(p + ".subtowers_per_axis", "expected " + std::to_string(J) + " entries (one per stage)");
    }
}

void check_params(Checker& c, const std::string& kind, const json& cfg) {
    const json* pj = c.get(cfg, "params", "config", true);
    const std::string p = "config.params";
    if (!pj || !c.object(*pj, p)) return;
    const json& params = *pj;
    auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    if (kind == "average") {
        c.known(params, p, {"N"});
        c.int_list(params, "N", p, true, 1);
    } else if (kind == "shells") {
        c.known(params, p, {"j", "c"});
        c.int_list(params, "j", p, true, 0);
        c.number(params, "c", p, true, 1, 1e300, true);
    } else if (kind == "randomsets") {
        c.known(params, p, {"j", "trials"});
        c.int_list(params, "j", p, true, 1);
        c.integer(params, "trials", p, false, 1, 1e6);
    } else if (kind == "kakutani") {
        c.known(params, p, {"D", "D_size"});
        const bool a = params.contains("D"), b = params.contains("D_size");
        if (a == b) c.err(p, "exactly one of D or D_size is required");
        if (a) c.int_list(params, "D", p, true, 0);
        if (b) c.integer(params, "D_size", p, true, 1, 4294967295.0);
    } else if (kind == "tower") {
        c.known(params, p, {"n", "eps", "D"});
        c.integer(params, "n", p, true, 1, 4294967295.0);
        c.number(params, "eps", p, true, 0, 1, true);
        c.int_list(params, "D", p, false, 0);
    } else if (kind == "tower-zd") {
        c.known(params, p, {"N", "eps", "H", "max_iters"});
        c.integer(params, "N", p, true, 1, 4294967295.0);
        c.number(params, "eps", p, true, 0, 1, true, true);
        c.integer(params, "H", p, false, 0, 4294967295.0);
        c.integer(params, "max_iters", p, false, 1, 1e7);
    } else if (kind == "cover") {
        c.known(params, p, {"d", "H", "instances", "max_side", "density"});
        c.integer(params, "d", p, true, 1, 3);
        c.integer(params, "H", p, true, 1, 4096);
        c.integer(params, "instances", p, true, 1, 1e6);
        c.integer(params, "max_side", p, true, 1, 4096);
        c.number(params, "density", p, false, 0, 1, true);
    } else if (kind == "birkhoff") {
        c.known(params, p, {"s", "N", "tower_height", "tower_eps", "min_length_ratio"});
        c.number(params, "s", p, true, 0, 1e300, true);
        c.int_list(params, "N", p, true, 1);
        c.integer(params, "tower_height", p, true, 1, 4294967295.0);
        c.number(params, "tower_eps", p, false, 0, 1, true);
        c.number(params, "min_length_ratio", p, false, 0, 1, true);
    } else if (kind == "sculpt") {
        c.known(params, p, kSculptFields);
        check_sculpt(c, params, p);
    } else if (kind == "plateau") {
        c.known(params, p, with(kSculptFields, {"k", "samples", "R"}));
        check_sculpt(c, params, p);
        c.integer(params, "k", p, true, 1, 16);
        c.integer(params, "samples", p, false, 1, 1000);
        c.integer(params, "R", p, false, 0, 4294967295.0);
    } else if (kind == "independence") {
        c.known(params, p, with(kSculptFields, {"pairs", "control_shift"}));
        check_sculpt(c, params, p);
        c.integer(params, "control_shift", p, false, -4294967295.0, 4294967295.0);
        const json* pr = c.get(params, "pairs", p, true);
        if (pr) {
            if (!pr->is_array() || pr->empty()) {
                c.err(p + ".pairs", "expected a non-empty array of [k, j] pairs");
            } else {
                for (std::size_t i = 0; i < pr->size(); ++i) {
                    const json& e = (*pr)[i];
                    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
                        e[0].get<std::int64_t>() < 1 || e[1].get<std::int64_t>() < 1)
                        c.err(p + ".pairs[" + std::to_string(i) + "]", "expected [k, j] with stage indices >= 1");
                }
            }
        }
    }
}

// ------------------------------------------------------------ output

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class Csv {
public:
    Csv(const fs::path& path, const std::vector<std::string>& header) : os_(path, std::ios::binary) {
        if (!os_) throw Error("cannot write " + path.string());
        row(header);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
        os_ << '\n';
    }

private:
    std::ofstream os_;
};

template <class T>
std::string str(T v) {
    return std::to_string(v);
}

std::uint64_t seed_of(const json& cfg, std::optional<std::uint64_t> over) {
    if (over) return *over;
    if (cfg.contains("seed")) return cfg["seed"].get<std::uint64_t>();
    return 0;
}

SculptConfig sculpt_config(const json& p) {
    SculptConfig c;
    c.J = p.value("J", c.J);
    c.decay = p.value("decay", c.decay);
    c.eta = p.value("eta", c.eta);
    c.eps_tower = p.value("eps_tower", c.eps_tower);
    c.plateau_safety = p.value("plateau_safety", c.plateau_safety);
    if (p.contains("subtowers_per_axis")) c.subtowers_per_axis = p["subtowers_per_axis"].get<std::vector<std::size_t>>();
    c.normalizer = p.value("normalizer", std::string("l1")) == "l2" ? Normalizer::L2 : Normalizer::L1;
    c.height_search_factor = p.value("height_search_factor", c.height_search_factor);
    c.max_rounds = p.value("max_rounds", c.max_rounds);
    return c;
}

std::vector<std::size_t> sizes(const json& j) { return j.get<std::vector<std::size_t>>(); }

// Each runner fills `summary`, writes its CSVs and returns their names.
using Files = std::vector<std::string>;

Files run_sweep(const std::string& kind, const FiniteSystem& sys, const json& cfg, std::uint64_t seed,
                const fs::path& out, json& summary) {
    const json& p = cfg["params"];
    const Observable f = observable_from_json(sys, cfg.value("observable", json::object()), seed);
    const int d = sys.dimension();
    summary["mean_f"] = integrate(sys, f);
    if (kind == "average") {
        const auto rows = convergence_sweep(sys, f, cube_family(d), sizes(p["N"]));
        Csv csv(out / "sweep.csv", {"N", "l1_dev", "l2_dev", "sup_dev"});
        for (const auto& r : rows) csv.row({str(r.N), fmt(r.l1_dev), fmt(r.l2_dev), fmt(r.sup_dev)});
        summary["final_l1_dev"] = rows.back().l1_dev;
        return {"sweep.csv"};
    }
    if (kind == "shells") {
        const double c = p["c"].get<double>();
        const auto rows =
            convergence_sweep(sys, f, [c, d](std::size_t j) { return shell_operator(static_cast<int>(j), c, d); },
                              sizes(p["j"]));
        Csv csv(out / "shells.csv", {"j", "l1_dev", "l2_dev", "sup_dev"});
        for (const auto& r : rows) csv.row({str(r.N), fmt(r.l1_dev), fmt(r.l2_dev), fmt(r.sup_dev)});
        summary["final_l1_dev"] = rows.back().l1_dev;
        return {"shells.csv"};
    }
    const std::size_t trials = p.value("trials", std::size_t{5});
    Csv csv(out / "randomsets.csv", {"j", "trial", "l1_dev", "l2_dev", "sup_dev"});
    double worst = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (t + 1)));
        const std::uint64_t op_seed = rng.next();
        const auto rows = convergence_sweep(
            sys, f, [d, op_seed](std::size_t j) { return random_subset_operator(static_cast<int>(j), d, op_seed + j); },
            sizes(p["j"]));
        for (const auto& r : rows) csv.row({str(r.N), str(t), fmt(r.l1_dev), fmt(r.l2_dev), fmt(r.sup_dev)});
        worst = std::max(worst, rows.back().l1_dev);
    }
    summary["worst_final_l1_dev"] = worst;
    return {"randomsets.csv"};
}

Files run_kakutani(const FiniteSystem& sys, const json& cfg, std::uint64_t seed, const fs::path& out, json& summary) {
    const json& p = cfg["params"];
    std::vector<Atom> D;
    if (p.contains("D")) {
        for (const auto& a : p["D"]) D.push_back(a.get<Atom>());
    } else {
        const std::size_t k = std::min<std::size_t>(p["D_size"].get<std::size_t>(), sys.size());
        Rng rng(seed);
        std::set<Atom> s;
        while (s.size() < k) s.insert(static_cast<Atom>(rng.below(sys.size())));
        D.assign(s.begin(), s.end());
    }
    std::sort(D.begin(), D.end());
    D.erase(std::unique(D.begin(), D.end()), D.end());
    for (Atom a : D) sys.check_atom(a);
    const auto part = kakutani_partition(sys, AtomSet::from_sorted(sys, D));
    Csv csv(out / "kakutani.csv", {"height", "base_size", "base_measure", "column_measure"});
    double total = 0;
    for (const auto& c : part.columns) {
        const double m = c.base.measure();
        total += m * static_cast<double>(c.height);
        csv.row({str(c.height), str(c.base.size()), fmt(m), fmt(m * static_cast<double>(c.height))});
    }
    summary["D_size"] = D.size();
    summary["columns"] = part.columns.size();
    summary["min_height"] = part.min_height();
    summary["max_height"] = part.max_height();
    summary["total_measure"] = total;
    return {"kakutani.csv"};
}

Files run_tower(const FiniteSystem& sys, const json& cfg, const fs::path& out, json& summary) {
    const json& p = cfg["params"];
    std::optional<AtomSet> D;
    if (p.contains("D")) {
        std::vector<Atom> v;
        for (const auto& a : p["D"]) v.push_back(a.get<Atom>());
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        for (Atom a : v) sys.check_atom(a);
        D = AtomSet::from_sorted(sys, v);
    }
    const std::size_t n = p["n"].get<std::size_t>();
    const double eps = p["eps"].get<double>();
    const auto rep = rokhlin_tower_1d(sys, n, eps, D);
    Csv csv(out / "tower.csv", {"n", "eps", "base_size", "mu_tower", "mu_residual", "k_target", "k_used", "bound"});
    csv.row({str(n), fmt(eps), str(rep.tower.base.size()), fmt(rep.tower.measure()), fmt(rep.tower.residual.measure()),
             str(rep.k_target), str(rep.k_used), fmt(rep.bound)});
    summary["mu_tower"] = rep.tower.measure();
    summary["mu_residual"] = rep.tower.residual.measure();
    summary["floors_disjoint"] = floors_disjoint(sys, n, rep.tower.base);
    return {"tower.csv"};
}

Files run_tower_zd(const FiniteSystem& sys, const json& cfg, std::uint64_t seed, const fs::path& out, json& summary,
                   std::string& failure) {
    const json& p = cfg["params"];
    const std::size_t N = p["N"].get<std::size_t>();
    const double eps = p["eps"].get<double>();
    TowerBuild b;
    try {
        b = build_tower_zd(sys, N, eps, p.value("H", std::size_t{0}), p.value("max_iters", std::size_t{1000}), seed);
    } catch (const TowerBuildFailure& e) {
        b = e.result;
        failure = e.what();
    }
    std::vector<std::string> head = {"iter", "mu", "removed", "added", "overlap"};
    for (int k = 0; k < sys.dimension(); ++k) head.push_back("z" + std::to_string(k + 1));
    Csv csv(out / "tower_trace.csv", head);
    for (const auto& r : b.trace) {
        std::vector<std::string> row = {str(r.iter), fmt(r.mu), fmt(r.removed), fmt(r.added), fmt(r.overlap)};
        for (int k = 0; k < sys.dimension(); ++k)
            row.push_back(k < static_cast<int>(r.z.size()) ? std::to_string(r.z[static_cast<std::size_t>(k)]) : "");
        csv.row(row);
    }
    summary["H"] = b.H;
    summary["lattice"] = b.lattice;
    summary["reached"] = b.reached;
    summary["mu_tower"] = b.tower.measure();
    summary["iterations"] = b.trace.size();
    return {"tower_trace.csv"};
}

Files run_cover(const json& cfg, std::uint64_t seed, const fs::path& out, json& summary) {
    const json& p = cfg["params"];
    const int d = p["d"].get<int>();
    const std::size_t H = p["H"].get<std::size_t>(), inst = p["instances"].get<std::size_t>(),
                      smax = p["max_side"].get<std::size_t>();
    const double density = p.value("density", 1.0);
    std::size_t cells = 1;
    for (int k = 0; k < d; ++k) cells *= H;
    Csv csv(out / "cover.csv", {"instance", "candidates", "lex_fraction", "largest_fraction", "lex_cubes",
                                "largest_cubes"});
    double min_lex = 1.0, sum_lex = 0.0;
    for (std::size_t i = 0; i < inst; ++i) {
        Rng rng(seed + 0x9E3779B97F4A7C15ULL * (i + 1));
        std::vector<Cube> cand;
        for (std::size_t c = 0; c < cells; ++c) {
            if (rng.uniform() >= density) continue;
            Cube q;
            q.corner.assign(static_cast<std::size_t>(d), 0);
            std::size_t rest = c, room = smax;
            for (int k = d - 1; k >= 0; --k) {
                q.corner[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(rest % H);
                room = std::min(room, H - rest % H);
                rest /= H;
            }
            q.side = 1 + rng.below(room);
            cand.push_back(std::move(q));
        }
        const auto lex = greedy_cube_selection(d, H, cand, SelectionStrategy::Lexicographic);
        const auto big = greedy_cube_selection(d, H, cand, SelectionStrategy::LargestFirst);
        csv.row({str(i), str(cand.size()), fmt(lex.fraction), fmt(big.fraction), str(lex.selected.size()),
                 str(big.selected.size())});
        min_lex = std::min(min_lex, lex.fraction);
        sum_lex += lex.fraction;
    }
    summary["min_lex_fraction"] = min_lex;
    summary["mean_lex_fraction"] = sum_lex / static_cast<double>(inst);
    return {"cover.csv"};
}

Files run_birkhoff(const FiniteSystem& sys, const json& cfg, std::uint64_t seed, const fs::path& out, json& summary) {
    const json& p = cfg["params"];
    const Observable f = observable_from_json(sys, cfg.value("observable", json::object()), seed);
    const std::size_t Ht = p["tower_height"].get<std::size_t>();
    const double teps = p.value("tower_eps", 0.05);
    Tower tower;
    if (sys.dimension() == 1) {
        tower = rokhlin_tower_1d(sys, Ht, std::max(teps, 1e-300)).tower;
    } else {
        tower = build_tower_zd(sys, Ht, teps, 0, 1000, seed).tower;
    }
    const double s = p["s"].get<double>();
    const auto rows =
        birkhoff_contradiction_experiment(sys, f, s, sizes(p["N"]), tower, p.value("min_length_ratio", 0.1));
    std::vector<std::string> head = {"N", "L", "mu_Y", "normalized_integral", "integral"};
    for (int k = 0; k < sys.dimension(); ++k) head.push_back("sym_diff_gen" + std::to_string(k + 1));
    for (const char* h : {"blocks", "fraction", "heavy"}) head.push_back(h);
    Csv csv(out / "birkhoff.csv", head);
    bool heavy = true;
    for (const auto& r : rows) {
        std::vector<std::string> row = {str(r.N), str(r.L), fmt(r.mu_Y), fmt(r.normalized_integral), fmt(r.integral)};
        for (double x : r.sym_diff) row.push_back(fmt(x));
        row.push_back(str(r.blocks));
        row.push_back(fmt(r.fraction));
        row.push_back(r.heavy_property ? "1" : "0");
        csv.row(row);
        heavy = heavy && r.heavy_property;
    }
    summary["mean_f"] = integrate(sys, f);
    summary["mu_tower"] = tower.measure();
    summary["heavy_property_all"] = heavy;
    summary["final_mu_Y"] = rows.back().mu_Y;
    return {"birkhoff.csv"};
}

void write_stages(const SculptPlan& plan, const fs::path& out) {
    Csv csv(out / "stages.csv", {"j", "K", "h", "n", "amplitude", "residual_value", "residual_mode", "mu_E", "N_j",
                                 "R_j", "leakage", "leakage_limit"});
    for (const auto& st : plan.stages)
        csv.row({str(st.j), str(st.K), str(st.h), str(st.n), fmt(st.amplitude), fmt(st.residual_value),
                 residual_mode_name(st.mode), fmt(st.E.measure()), str(st.N), str(st.R), fmt(st.leakage),
                 fmt(st.leakage_limit)});
}

Files run_sculpt_family(const std::string& kind, const FiniteSystem& sys, const json& cfg, const fs::path& out,
                        json& summary) {
    const json& p = cfg["params"];
    const EmpiricalDistribution target = target_from_json(p["target"]);
    const SculptPlan plan = sculpt(sys, target, sculpt_config(p));
    write_stages(plan, out);
    summary["stages"] = plan.stages.size();
    summary["rounds"] = plan.rounds;
    summary["degenerate"] = plan.degenerate;
    if (kind == "sculpt") {
        const std::size_t samples = p.value("plateau_samples", std::size_t{8});
        Csv csv(out / "sculpt.csv", {"j", "N_j", "dist_to_target", "w1_to_target", "tail_ratio", "plateau_max"});
        json dists = json::array();
        for (const auto& dj : plan.distances) {
            double pmax = 0;
            for (const auto& r : plateau_profile(plan, dj.j, samples)) pmax = std::max(pmax, r.bl);
            csv.row({str(dj.j), str(dj.N), fmt(dj.bl), fmt(dj.w1), fmt(dj.tail), fmt(pmax)});
            dists.push_back({{"j", dj.j}, {"N", dj.N}, {"bl", dj.bl}, {"w1", dj.w1}, {"plateau_max", pmax}});
        }
        summary["distances"] = dists;
        return {"stages.csv", "sculpt.csv"};
    }
    if (kind == "plateau") {
        const std::size_t k = p["k"].get<std::size_t>();
        if (k > plan.stages.size()) throw Error("params.k exceeds the number of stages");
        const auto rows = plateau_profile(plan, k, p.value("samples", std::size_t{8}), p.value("R", std::size_t{0}));
        Csv csv(out / "plateau.csv", {"n", "bl", "w1"});
        double mx = 0;
        for (const auto& r : rows) {
            csv.row({str(r.n), fmt(r.bl), fmt(r.w1)});
            mx = std::max(mx, r.bl);
        }
        summary["plateau_max_bl"] = mx;
        return {"stages.csv", "plateau.csv"};
    }
    Csv csv(out / "independence.csv", {"probe", "k", "j_or_shift", "bl"});
    for (const auto& pr : p["pairs"]) {
        const auto k = pr[0].get<std::size_t>(), j = pr[1].get<std::size_t>();
        if (k > plan.stages.size() || j > plan.stages.size()) throw Error("params.pairs: stage index out of range");
        csv.row({"pair", str(k), str(j), fmt(independence_probe(plan, k, j))});
    }
    const std::int64_t shift = p.value("control_shift", std::int64_t{1});
    for (std::size_t k = 1; k <= plan.stages.size(); ++k)
        csv.row({"control", str(k), std::to_string(shift), fmt(independence_control(plan, k, shift))});
    return {"stages.csv", "independence.csv"};
}

}  // namespace

std::vector<std::string> experiment_kinds() { return kKinds; }

bool is_randomized(const std::string& kind, const json& cfg) {
    if (kind == "cover" || kind == "randomsets") return true;
    if (kind == "kakutani") return cfg.contains("params") && cfg["params"].is_object() && cfg["params"].contains("D_size");
    if (kind == "average" || kind == "shells" || kind == "birkhoff") {
        std::string t = "random_zero_mean";
        if (cfg.contains("observable") && cfg["observable"].is_object() && cfg["observable"].contains("type") &&
            cfg["observable"]["type"].is_string())
            t = cfg["observable"]["type"].get<std::string>();
        return t == "random" || t == "random_zero_mean";
    }
    return false;
}

std::vector<Diagnostic> validate_config(const std::string& kind, const json& cfg,
                                        std::optional<std::uint64_t> seed_override) {
    Checker c;
    if (std::find(kKinds.begin(), kKinds.end(), kind) == kKinds.end()) {
        std::string all;
        for (const auto& k : kKinds) all += (all.empty() ? "" : ", ") + k;
        c.err("kind", "unknown experiment kind '" + kind + "'; expected one of: " + all);
        return c.out;
    }
    if (!c.object(cfg, "config")) return c.out;
    c.known(cfg, "config", {"kind", "seed", "system", "observable", "params"});
    if (cfg.contains("kind") && (!cfg["kind"].is_string() || cfg["kind"].get<std::string>() != kind))
        c.err("config.kind", "does not match the requested kind '" + kind + "'");
    c.integer(cfg, "seed", "config", false, 0, 1.8446744073709552e19);
    if (is_randomized(kind, cfg) && !seed_override && !cfg.contains("seed"))
        c.err("config.seed", "a seed is required for the randomized experiment '" + kind + "'");
    check_system(c, cfg);
    if (kind == "average" || kind == "shells" || kind == "randomsets" || kind == "birkhoff") {
        check_observable(c, cfg);
    } else if (cfg.contains("observable")) {
        c.err("config.observable", "not used by '" + kind + "'");
    }
    check_params(c, kind, cfg);
    if (cfg.contains("system") && cfg["system"].is_object() && cfg["system"].value("backend", "") != "torus") {
        if (kind == "shells") c.err("config.system.backend", "shells need a torus system");
    }
    return c.out;
}

FiniteSystem system_from_json(const json& j) {
    std::vector<double> w;
    if (j.contains("weights")) w = j["weights"].get<std::vector<double>>();
    const std::string b = j.at("backend").get<std::string>();
    if (b == "cycle") return FiniteSystem::cycle(j.at("M").get<std::size_t>(), std::move(w));
    if (b == "torus") return FiniteSystem::torus(j.at("dims").get<std::vector<std::size_t>>(), std::move(w));
    if (b == "permutation") return FiniteSystem::permutation(j.at("permutation").get<std::vector<Atom>>(), std::move(w));
    throw Error("unknown backend '" + b + "'");
}

EmpiricalDistribution target_from_json(const json& j) {
    const std::string t = j.at("type").get<std::string>();
    if (t == "rademacher") {
        return EmpiricalDistribution::from_atoms({{-1.0, 0.5}, {1.0, 0.5}});
    }
    if (t == "uniform")
        return EmpiricalDistribution::uniform_grid(j.value("a", -1.0), j.value("b", 1.0),
                                                   j.value("grid", std::size_t{100000}));
    if (t == "point") return EmpiricalDistribution::point_mass(j.at("value").get<double>());
    std::vector<std::pair<double, double>> atoms;
    double total = 0;
    for (const auto& a : j.at("atoms")) {
        atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
        total += atoms.back().second;
    }
    for (auto& a : atoms) a.second /= total;
    return EmpiricalDistribution::from_atoms(std::move(atoms));
}

Observable observable_from_json(const FiniteSystem& sys, const json& j, std::uint64_t seed) {
    const std::string t = j.value("type", std::string("random_zero_mean"));
    if (t == "constant") return Observable::constant(sys, j.at("value").get<double>());
    if (t == "values") {
        auto v = j.at("values").get<std::vector<double>>();
        if (v.size() != sys.size())
            throw Error("observable.values: expected " + std::to_string(sys.size()) + " values, got " +
                        std::to_string(v.size()));
        return Observable(std::move(v));
    }
    Rng rng(seed);
    if (t == "random") return random_observable(sys, rng, j.value("lo", -1.0), j.value("hi", 1.0));
    return random_zero_mean(sys, rng);
}

std::string config_hash(const json& cfg) {
    const std::string s = cfg.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunOutput run_experiment(const std::string& kind, const json& cfg, const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override) {
    const auto diags = validate_config(kind, cfg, seed_override);
    if (!diags.empty()) {
        std::string msg = "invalid config:";
        for (const auto& d : diags) msg += "\n  " + d.path + ": " + d.message;
        throw Error(msg);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out(out_dir);
    fs::create_directories(out);
    const std::uint64_t seed = seed_of(cfg, seed_override);

    RunOutput res;
    json summary = json::object();
    std::string failure;
    const auto t_sys = std::chrono::steady_clock::now();
    const FiniteSystem sys = system_from_json(cfg["system"]);
    const double sys_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_sys).count();
    try {
        if (kind == "average" || kind == "shells" || kind == "randomsets")
            res.files = run_sweep(kind, sys, cfg, seed, out, summary);
        else if (kind == "kakutani")
            res.files = run_kakutani(sys, cfg, seed, out, summary);
        else if (kind == "tower")
            res.files = run_tower(sys, cfg, out, summary);
        else if (kind == "tower-zd")
            res.files = run_tower_zd(sys, cfg, seed, out, summary, failure);
        else if (kind == "cover")
            res.files = run_cover(cfg, seed, out, summary);
        else if (kind == "birkhoff")
            res.files = run_birkhoff(sys, cfg, seed, out, summary);
        else
            res.files = run_sculpt_family(kind, sys, cfg, out, summary);
    } catch (const Error& e) {
        failure = e.what();
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json& r = res.report;
    r["schema_version"] = 1;
    r["kind"] = kind;
    r["config_hash"] = config_hash(cfg);
    r["config"] = cfg;
    r["seed"] = is_randomized(kind, cfg) || cfg.contains("seed") || seed_override ? json(seed) : json(nullptr);
    r["versions"] = {{"ergolab", kVersion},
                     {"simd_backend", std::string(simd::backend_name(simd::active_backend()))},
                     {"compiler", __VERSION__},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    r["system"] = {{"atoms", sys.size()}, {"dimension", sys.dimension()}, {"ergodic", sys.ergodic()},
                   {"uniform", sys.uniform()}};
    r["status"] = failure.empty() ? "ok" : "failed";
    if (!failure.empty()) r["error"] = failure;
    r["summary"] = summary;
    r["outputs"] = res.files;
    r["timings"] = {{"system_seconds", sys_seconds}, {"total_seconds", total}};
    std::ofstream os(out / "report.json", std::ios::binary);
    if (!os) throw Error("cannot write " + (out / "report.json").string());
    os << r.dump(2) << '\n';
    res.files.insert(res.files.begin(), "report.json");
    return res;
}

}  // namespace ergolab
