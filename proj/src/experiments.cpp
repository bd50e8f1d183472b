#include "kinlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "kinlab/boltzmann.hpp"
#include "kinlab/combinat.hpp"
#include "kinlab/pathspace.hpp"
#include "kinlab/potential.hpp"
#include "kinlab/schrodinger.hpp"
#include "kinlab/wavepacket.hpp"

#ifndef KINLAB_VERSION
#define KINLAB_VERSION "0.0.0"
#endif

namespace kinlab::experiments {

namespace fs = std::filesystem;

namespace {

const double kPi = std::numbers::pi;

// ---------------------------------------------------------------- schema

enum class Rule { Any, Positive, NonNegative, PositiveInt, NonNegativeInt, PositiveList, NonNegativeList, Flag };

struct ParamSpec {
    std::string key;
    json def;
    Rule rule;
};

using Schema = std::vector<ParamSpec>;

const std::map<std::string, Schema>& schemas() {
    static const std::map<std::string, Schema> s = {
        {"combinat-verify",
         {{"n", 4, Rule::PositiveInt},
          {"trials", 1000, Rule::PositiveInt},
          {"tol", 1e-10, Rule::Positive},
          {"random_skeletons", 18, Rule::NonNegativeInt},
          {"max_ids", 10, Rule::PositiveInt}}},
        {"quantize-check",
         {{"n", 512, Rule::PositiveInt},
          {"L", 512.0, Rule::Positive},
          {"r", 16.0, Rule::Positive},
          {"delta", 0.125, Rule::Positive},
          {"n_pairings", 10, Rule::PositiveInt},
          {"frame_tol", 1e-2, Rule::Positive},
          {"pairing_tol", 1e-6, Rule::Positive},
          {"compare_factor", 0.5, Rule::Positive}}},
        {"evolve",
         {{"eps", json::array({0.2, 0.1}), Rule::NonNegativeList},
          {"t", 2.0, Rule::Positive},
          {"n", 1024, Rule::PositiveInt},
          {"L", 256.0, Rule::Positive},
          {"r", 8.0, Rule::Positive},
          {"sigma2", 1.0, Rule::Positive},
          {"corr_length", 2.0, Rule::Positive},
          {"n_samples", 50, Rule::PositiveInt},
          {"born_steps", 4000, Rule::PositiveInt},
          {"born_nodes", 16, Rule::PositiveInt},
          {"born_panels", 4, Rule::PositiveInt},
          {"check_eps", 0.5, Rule::Positive},
          {"dt", 0.01, Rule::Positive},
          {"unitarity_steps", 1000, Rule::PositiveInt},
          {"channel_n", 32, Rule::PositiveInt}}},
        {"kinetic-compare",
         {{"eps", json::array({0.4, 0.2}), Rule::PositiveList},
          {"kinetic_time", 0.5, Rule::Positive},
          {"n", 128, Rule::PositiveInt},
          {"L", 64.0, Rule::Positive},
          {"r", 4.0, Rule::Positive},
          {"p0", json::array({1.0, 0.0}), Rule::Any},
          {"kappa_index", json::array({1, 0}), Rule::Any},
          {"sigma2", 1.0, Rule::Positive},
          {"corr_length", 2.0, Rule::Positive},
          {"n_samples", 200, Rule::PositiveInt},
          {"dt", 0.05, Rule::Positive},
          {"shell_angles", 64, Rule::PositiveInt},
          {"tail", 1e-4, Rule::Positive},
          {"decrease", 0.3, Rule::Positive}}},
        {"semigroup-check",
         {{"n_configs", 10, Rule::PositiveInt},
          {"n_mc", 100000, Rule::PositiveInt},
          {"n", 64, Rule::PositiveInt},
          {"L", 32.0, Rule::Positive},
          {"sigma2", 1.0, Rule::Positive},
          {"corr_length", 2.0, Rule::Positive},
          {"bump_r", 0.2, Rule::Positive},
          {"wick_tol", 0.05, Rule::Positive},
          {"eps", 0.5, Rule::Positive},
          {"s", 0.7, Rule::Positive},
          {"t", 1.0, Rule::Positive},
          {"angles", 16, Rule::PositiveInt}}},
        {"boltzmann-solve",
         {{"eps", json::array({0.4, 0.2}), Rule::PositiveList},
          {"n", 8, Rule::PositiveInt},
          {"L", 16.0, Rule::Positive},
          {"shell_radii", json::array({0.8, 1.2}), Rule::PositiveList},
          {"angles", 16, Rule::PositiveInt},
          {"sigma2", 1.0, Rule::Positive},
          {"corr_length", 1.0, Rule::Positive},
          {"dt", 0.01, Rule::Positive},
          {"series_t", 2.0, Rule::Positive},
          {"series_terms", 6, Rule::PositiveInt},
          {"split_eps", 0.5, Rule::Positive},
          {"split_kinetic_time", 0.1, Rule::Positive},
          {"equilibrium_t", 3.0, Rule::Positive},
          {"gk_eps", 0.5, Rule::Positive},
          {"n_particles", 3000, Rule::PositiveInt}}},
        {"path-stats",
         {{"campaign_n", 200, Rule::PositiveInt},
          {"k_max", 4, Rule::PositiveInt},
          {"campaign_r", 10.0, Rule::Positive},
          {"campaign_alpha", 1.0, Rule::Positive},
          {"max_attempts", 100000, Rule::PositiveInt},
          {"eps", json::array({0.4, 0.3, 0.2}), Rule::PositiveList},
          {"kinetic_time", 1.0, Rule::Positive},
          {"n_paths", 8000, Rule::PositiveInt},
          {"r", 1.0, Rule::Positive},
          {"alpha", 0.5, Rule::Positive},
          {"sigma2", 1.0, Rule::Positive},
          {"corr_length", 2.0, Rule::Positive},
          {"shell_radius", 1.0, Rule::Positive},
          {"angles", 32, Rule::PositiveInt},
          {"cones", false, Rule::Flag},
          {"fixtures", 3, Rule::NonNegativeInt}}},
    };
    return s;
}

const Schema& schema_of(const std::string& id) {
    auto it = schemas().find(id);
    require(it != schemas().end(), "unknown experiment '" + id + "'");
    return it->second;
}

bool same_kind(const json& def, const json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_number_integer()) return v.is_number_integer();
    if (def.is_number()) return v.is_number();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) {
        if (!v.is_array()) return false;
        for (const auto& e : v)
            if (!e.is_number()) return false;
        return true;
    }
    return false;
}

void check_rule(const ParamSpec& s, const json& v) {
    auto bad = [&](const std::string& why) { throw Error("parameter '" + s.key + "': " + why); };
    switch (s.rule) {
        case Rule::Positive:
        case Rule::PositiveInt:
            if (!(v.get<double>() > 0)) bad("must be positive");
            break;
        case Rule::NonNegative:
        case Rule::NonNegativeInt:
            if (!(v.get<double>() >= 0)) bad("must be nonnegative");
            break;
        case Rule::PositiveList:
        case Rule::NonNegativeList:
            if (v.empty()) bad("list must be nonempty");
            for (const auto& e : v) {
                double x = e.get<double>();
                if (s.rule == Rule::PositiveList ? !(x > 0) : !(x >= 0)) bad("entries out of range");
            }
            break;
        default:
            break;
    }
}

// ---------------------------------------------------------------- helpers

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

class Stopwatch {
public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

struct Welford {
    int n = 0;
    double mean = 0, m2 = 0;
    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double stderr_() const { return n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0; }
};

struct ComplexWelford {
    int n = 0;
    cplx mean = 0;
    double m2 = 0;  // sum of |x - mean|^2
    void add(cplx x) {
        ++n;
        cplx d = x - mean;
        mean += d / double(n);
        m2 += std::real(std::conj(d) * (x - mean));
    }
    double stderr_() const { return n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0; }
};

std::vector<double> list(const json& v) { return v.get<std::vector<double>>(); }

double l2(const Grid& g, const CVec& f) { return wavepacket::l2norm(g, f); }

double l2diff(const Grid& g, const CVec& a, const CVec& b) {
    CVec d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return l2(g, d);
}

void add_check(ExperimentResult& r, std::string id, int acc, bool pass, std::string detail) {
    r.checks.push_back({std::move(id), acc, pass, std::move(detail)});
}

void runtime_check(ExperimentResult& r, const std::string& id, int acc, const Stopwatch& sw, double limit) {
    double s = sw.seconds();
    r.timings.push_back({id, s});
    add_check(r, id, acc, s < limit, "runtime below " + num(limit) + " s");
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// ---------------------------------------------------------------- combinat-verify

combinat::SkeletonSpec spec_of(std::vector<combinat::Cell> cells) {
    combinat::SkeletonSpec F;
    F.cells = std::move(cells);
    return F;
}

ExperimentResult run_combinat(const Config& c) {
    using namespace combinat;
    ExperimentResult r;
    r.columns = {"check", "n", "value", "tolerance", "pass"};
    const json& P = c.params;
    const int n = P["n"];
    require(n >= 2 && n <= 5, "combinat-verify: n must be in [2,5]");
    const double tol = P["tol"];
    const int trials = P["trials"];
    const int max_ids = P["max_ids"];
    require(max_ids >= 2 && max_ids <= 10, "combinat-verify: max_ids must be in [2,10]");

    // forest identities
    Stopwatch sw1;
    bool indicator = true;
    double poly = 0, mob = 0;
    std::size_t graphs = 0;
    std::string mob_example;
    for (int m = 2; m <= n; ++m) {
        auto rep = verify_forest_identities(m, trials, YDistribution::Normal,
                                            derive_seed(c.seed, hash_string("forest-identities"), m));
        if (m == n) {
            indicator = rep.indicator_ok;
            graphs = rep.graphs_checked;
        }
        poly = std::max(poly, rep.poly_max_dev);
        if (rep.mobius_max_dev > mob) {
            mob = rep.mobius_max_dev;
            for (const auto& s : rep.counterexamples)
                if (s.rfind("inversion", 0) == 0) {
                    mob_example = "n=" + std::to_string(m) + ": " + s;
                    break;
                }
        }
        r.rows.push_back({"poly_max_dev", std::to_string(m), sci(rep.poly_max_dev), sci(tol),
                          rep.poly_max_dev <= tol ? "1" : "0"});
        r.rows.push_back({"mobius_max_dev", std::to_string(m), sci(rep.mobius_max_dev), sci(tol),
                          rep.mobius_max_dev <= tol ? "1" : "0"});
        r.rows.push_back({"mobius_local_max_dev", std::to_string(m), sci(rep.mobius_local_max_dev), sci(tol),
                          rep.mobius_local_max_dev <= tol ? "1" : "0"});
        r.rows.push_back({"refinement_max_dev", std::to_string(m), sci(rep.refinement_max_dev), sci(tol),
                          rep.refinement_max_dev <= tol ? "1" : "0"});
    }
    const std::size_t expect_graphs = std::size_t(1) << (n * (n - 1) / 2);
    add_check(r, "C1.indicator", 1, indicator && graphs == expect_graphs,
              "sum_F 1(F_G = F) = 1 on " + std::to_string(graphs) + " of " + std::to_string(expect_graphs) +
                  " graphs at n=" + std::to_string(n));
    add_check(r, "C1.polynomial", 1, poly <= tol, "max |sum - 1| = " + sci(poly) + " (tol " + sci(tol) + ")");
    add_check(r, "C1.mobius", 1, mob <= tol,
              "per-forest inversion max dev = " + sci(mob) + " (tol " + sci(tol) + ")" +
                  (mob_example.empty() ? "" : "; " + mob_example));
    runtime_check(r, "C1.runtime", 1, sw1, 60);

    // coloring machine sweep
    Stopwatch sw2;
    struct Case {
        std::string name;
        int kp, km;
        SkeletonSpec F;
        std::vector<int> segp, segm;
    };
    std::vector<Case> cases = {
        {"empty", 3, 3, {}, {}, {}},
        {"empty-2-2", 2, 2, {}, {}, {}},
        {"recollision-same-side", 3, 2, spec_of({{0, 2}}), {}, {}},
        {"recollision-cross", 3, 3, spec_of({{1, 4}}), {}, {}},
        {"cluster-3", 3, 3, spec_of({{0, 1, 4}}), {}, {}},
        {"cluster-3-one-side", 4, 2, spec_of({{0, 1, 3}}), {}, {}},
        {"two-cells", 4, 4, spec_of({{0, 5}, {2, 7}}), {}, {}},
        {"segments", 3, 3, {}, {1, 1, 2}, {1, 2, 2}},
    };
    Rng rng = make_rng(c.seed, hash_string("coloring-sweep"));
    std::uniform_int_distribution<int> side(1, 5);
    std::uniform_real_distribution<double> U(0, 1);
    for (int i = 0; i < int(P["random_skeletons"]); ++i) {
        int kp = side(rng), km = side(rng);
        while (kp + km > max_ids) (kp > km ? kp : km)--;
        int N = kp + km;
        std::vector<int> ids(N);
        for (int a = 0; a < N; ++a) ids[a] = a;
        std::shuffle(ids.begin(), ids.end(), rng);
        int ncells = int(3 * U(rng));
        std::vector<Cell> cells;
        std::size_t at = 0;
        for (int q = 0; q < ncells; ++q) {
            std::size_t sz = U(rng) < 0.7 ? 2 : 3;
            if (at + sz > ids.size()) break;
            Cell cell(ids.begin() + long(at), ids.begin() + long(at + sz));
            std::sort(cell.begin(), cell.end());
            cells.push_back(cell);
            at += sz;
        }
        std::sort(cells.begin(), cells.end());
        Case cs{"random-" + std::to_string(i), kp, km, spec_of(cells), {}, {}};
        if (U(rng) < 0.3 && kp >= 2) {
            int cut = 1 + int(U(rng) * (kp - 1));
            for (int a = 0; a < kp; ++a) cs.segp.push_back(a < cut ? 1 : 2);
            for (int a = 0; a < km; ++a) cs.segm.push_back(a < km / 2 ? 1 : 2);
        }
        cases.push_back(cs);
    }
    int agree = 0, total = 0;
    std::string first_bad;
    for (const auto& cs : cases) {
        for (auto pol : {PairPolicy::LadderOnly, PairPolicy::LadderOrAntiLadder}) {
            CollisionSet K = CollisionSet::single_segment(cs.kp, cs.km);
            if (!cs.segp.empty()) K.plus_seg = cs.segp;
            if (!cs.segm.empty()) K.minus_seg = cs.segm;
            auto want = canonical_partitions(cs.F, K, pol);
            auto got = partitions_from_colorings(enumerate_coloring_sets(cs.F, K, +1, pol),
                                                 enumerate_coloring_sets(cs.F, K, -1, pol));
            bool ok = got == want;
            ++total;
            agree += ok;
            if (!ok && first_bad.empty()) first_bad = cs.name;
            r.rows.push_back({"coloring:" + cs.name + (pol == PairPolicy::LadderOnly ? ":ladder" : ":both"),
                              std::to_string(cs.kp + cs.km), std::to_string(want.size()), "0", ok ? "1" : "0"});
        }
    }
    add_check(r, "C2.colorings", 2, agree == total && cases.size() >= 20,
              std::to_string(agree) + "/" + std::to_string(total) + " sweeps with Q(Psi+,Psi-) = Q_F over " +
                  std::to_string(cases.size()) + " skeletons" + (first_bad.empty() ? "" : "; first mismatch " + first_bad));
    runtime_check(r, "C2.runtime", 2, sw2, 300);

    // generalized ladder counts against the brute-force filter
    std::vector<std::array<int, 3>> counts = {{1, 1, 1}, {2, 2, 2}, {1, 3, 2}};
    bool counts_ok = true;
    std::string cdetail;
    for (auto [kp, km, expect] : counts) {
        int enumerated = int(enumerate_generalized_ladders(kp, km).size());
        int brute = 0;
        std::vector<int> A, B, all;
        for (int a = 0; a < kp; ++a) A.push_back(a);
        for (int b = 0; b < km; ++b) B.push_back(kp + b);
        for (int a = 0; a < kp + km; ++a) all.push_back(a);
        for_each_set_partition(kp + km, [&](const std::vector<int>& labels) {
            if (is_generalized_ladder(Partition::from_labels(all, labels), A, B)) ++brute;
        });
        bool ok = enumerated == expect && brute == expect;
        counts_ok = counts_ok && ok;
        cdetail += "(" + std::to_string(kp) + "," + std::to_string(km) + ")->" + std::to_string(enumerated) + "/" +
                   std::to_string(brute) + " ";
        r.rows.push_back({"ladder_count:" + std::to_string(kp) + "," + std::to_string(km), std::to_string(kp + km),
                          std::to_string(enumerated), std::to_string(expect), ok ? "1" : "0"});
    }
    cdetail.pop_back();
    add_check(r, "C3.ladder_counts", 3, counts_ok, "enumerated/brute-force " + cdetail + " (expected 1, 2, 2)");
    return r;
}

// ---------------------------------------------------------------- quantize-check

CVec gaussian_packet(const Grid& g, double x0, double p0, double s) {
    CVec f(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        double dx = g.wrap(g.position(k)[0] - x0);
        f[k] = std::exp(-dx * dx / (2 * s * s)) * std::exp(cplx(0, p0 * dx));
    }
    double nrm = l2(g, f);
    for (auto& v : f) v /= nrm;
    return f;
}

ExperimentResult run_quantize(const Config& c, const std::string& out) {
    using namespace wavepacket;
    ExperimentResult r;
    r.columns = {"check", "index", "value", "bound", "pass"};
    const json& P = c.params;
    Stopwatch sw;
    Grid g{1, int(P["n"]), double(P["L"])};
    validate_grid(g);
    const double rr = P["r"], delta = P["delta"];
    auto env = Envelope::make(rr, 1);
    auto one = [](const RVec&, const RVec&) { return cplx(1.0); };

    WavepacketQuadrature q;
    q.nx = int(std::lround(g.L / (rr / 4)));
    double frame = opnorm(wavepacket_quantize(one, env, g, q) - Matrix::Identity(g.n, g.n));
    r.rows.push_back({"frame", "0", sci(frame), sci(double(P["frame_tol"])), frame <= double(P["frame_tol"]) ? "1" : "0"});
    add_check(r, "C5.frame", 5, frame <= double(P["frame_tol"]),
              "||Op(1) - Id|| = " + sci(frame) + " (tol " + sci(double(P["frame_tol"])) + ")");

    Rng rng = make_rng(c.seed, hash_string("quantize-pairing"));
    std::uniform_real_distribution<double> U(-1, 1);
    double worst = 0;
    const double tol = P["pairing_tol"];
    for (int i = 0; i < int(P["n_pairings"]); ++i) {
        double c1 = U(rng), c2 = U(rng), c3 = U(rng), x0 = 0.2 * g.L * U(rng), p0 = U(rng);
        double w = 3.0 + 2.0 * std::abs(U(rng));
        SymbolFn a = [=](const RVec& x, const RVec& p) {
            return cplx(c1 * std::sin(2 * kPi * x[0] / g.L + c2) * std::exp(-(p[0] - c3) * (p[0] - c3)) + c3 * p[0] * p[0]);
        };
        auto A = sample_observable(g, a);
        auto psi = gaussian_packet(g, x0, p0, w);
        cplx lhs = expectation(g, weyl_quantize(A), psi);
        cplx rhs = phase_pairing(A, wigner_transform(psi, g));
        double rel = std::abs(lhs - rhs) / std::abs(lhs);
        worst = std::max(worst, rel);
        r.rows.push_back({"pairing", std::to_string(i), sci(rel), sci(tol), rel <= tol ? "1" : "0"});
    }
    add_check(r, "C5.pairing", 5, worst <= tol, "max relative error " + sci(worst) + " (tol " + sci(tol) + ")");

    const double Lp = 1 / delta;
    const double fac = P["compare_factor"];
    std::vector<SymbolFn> syms = {
        [=](const RVec& x, const RVec& p) {
            return cplx(std::cos(2 * kPi * x[0] / g.L) * std::exp(-(p[0] * rr * delta) * (p[0] * rr * delta)));
        },
        [=](const RVec& x, const RVec& p) {
            double u = (p[0] - 0.2) * rr * delta;
            return cplx(std::sin(4 * kPi * x[0] / g.L + 0.3) * std::exp(-u * u));
        },
        [=](const RVec& x, const RVec& p) {
            double u = p[0] * rr * delta;
            return cplx((1 + 0.5 * std::cos(2 * kPi * x[0] / g.L)) / (1 + u * u));
        },
    };
    bool cmp_ok = true;
    std::string cdet;
    auto quad = default_quadrature(g, env);
    for (std::size_t i = 0; i < syms.size(); ++i) {
        auto A = sample_observable(g, syms[i], rr, Lp);
        double diff = opnorm(wavepacket_quantize(syms[i], env, g, quad) - weyl_quantize(A));
        auto ck = ck_norm(A, 3, rr, Lp);
        double bound = fac * delta * ck.value;
        bool ok = diff <= bound && !ck.under_resolved;
        cmp_ok = cmp_ok && ok;
        cdet += sci(diff) + "<=" + sci(bound) + (i + 1 < syms.size() ? ", " : "");
        r.rows.push_back({"op_vs_weyl", std::to_string(i), sci(diff), sci(bound), ok ? "1" : "0"});
        if (i == 0 && !out.empty()) {
            export_observable(A, join(out, "symbol_0"));
            r.exported.push_back("symbol_0.bin");
            r.exported.push_back("symbol_0.json");
        }
    }
    add_check(r, "C5.op_vs_weyl", 5, cmp_ok, "||Op(a) - Op^w(a)|| vs 0.5 delta ||a||_C3: " + cdet);
    runtime_check(r, "C5.runtime", 5, sw, 120);
    return r;
}

// ---------------------------------------------------------------- evolve

ExperimentResult run_evolve(const Config& c, const std::string& out) {
    using namespace schrodinger;
    ExperimentResult r;
    r.columns = {"epsilon", "t", "observable_id", "estimate", "mc_stderr", "n_samples"};
    const json& P = c.params;
    Stopwatch sw;
    Grid g{1, int(P["n"]), double(P["L"])};
    validate_grid(g);
    const double t = P["t"];
    potential::PotentialParams pp;
    pp.corr = potential::CorrelationProfile::wendland(double(P["sigma2"]), double(P["corr_length"]));
    auto psi = wavepacket::make_wavepacket({{0, 0}, {1, 0}}, wavepacket::Envelope::make(double(P["r"]), 1), g);
    auto eps_list = list(P["eps"]);

    // unitarity and Strang order at a fixed coupling
    {
        auto V = potential::sample_potential(pp, g, derive_seed(c.seed, hash_string("evolve-unitarity")));
        if (!out.empty()) {
            potential::export_field(V, join(out, "potential_sample0"));
            r.exported.push_back("potential_sample0.bin");
            r.exported.push_back("potential_sample0.json");
        }
        const double ce = P["check_eps"];
        SplitStepper st(g, V.values, ce, double(P["dt"]));
        CVec f = psi;
        st.evolve(f, int(P["unitarity_steps"]));
        double drift = std::abs(l2(g, f) - l2(g, psi));
        add_check(r, "C6.unitarity", 6, drift <= 1e-10,
                  "| ||psi_t|| - ||psi_0|| | = " + sci(drift) + " after " + std::to_string(int(P["unitarity_steps"])) +
                      " steps (tol 1e-10)");
        r.rows.push_back({num(ce), num(double(P["dt"]) * int(P["unitarity_steps"])), "norm_drift", sci(drift), "0", "1"});

        const double ts = 2.0;
        auto run_n = [&](int nsteps) {
            SplitStepper s(g, V.values, ce, ts / nsteps);
            CVec h = psi;
            s.evolve(h, nsteps);
            return h;
        };
        auto ref = run_n(8 * 80);
        double e1 = l2diff(g, run_n(80), ref), e2 = l2diff(g, run_n(160), ref);
        double ratio = e1 / e2;
        add_check(r, "C6.strang_order", 6, ratio >= 3.5 && ratio <= 4.5,
                  "error ratio dt/(dt/2) = " + num(ratio) + " (band [3.5, 4.5])");
        r.rows.push_back({num(ce), num(ts), "strang_ratio", num(ratio), "0", "1"});
    }

    // degenerate channel: eps = 0 is free conjugation
    if (std::find(eps_list.begin(), eps_list.end(), 0.0) != eps_list.end()) {
        Grid gc{1, int(P["channel_n"]), 16.0};
        validate_grid(gc);
        ChannelParams cp;
        cp.evo = {0.0, double(P["dt"]), t};
        cp.potential = pp;
        cp.n_samples = 10;
        cp.seed = derive_seed(c.seed, hash_string("evolve-channel"));
        Rng rng = make_rng(c.seed, hash_string("evolve-observable"));
        std::normal_distribution<double> N;
        const int n = gc.n;
        Matrix A(n, n), U0(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = cplx(N(rng), N(rng));
        for (int j = 0; j < n; ++j) {
            CVec e(gc.size(), 0.0);
            e[j] = 1.0;
            auto col = free_evolve(e, gc, t);
            for (int i = 0; i < n; ++i) U0(i, j) = col[i];
        }
        auto est = evolution_channel_mc(A, gc, cp);
        double dev = (est.mean - U0.adjoint() * A * U0).cwiseAbs().maxCoeff();
        add_check(r, "E.free_channel", 0, dev <= 1e-10, "eps=0 channel vs free conjugation: " + sci(dev) + " (tol 1e-10)");
        r.rows.push_back({"0", num(t), "free_channel_dev", sci(dev), "0", std::to_string(cp.n_samples)});
    }

    // Born residual scaling
    std::vector<double> pos;
    for (double e : eps_list)
        if (e > 0) pos.push_back(e);
    std::sort(pos.rbegin(), pos.rend());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    if (pos.size() >= 2) {
        BornQuadrature bq{int(P["born_nodes"]), int(P["born_panels"])};
        const int steps = P["born_steps"];
        std::vector<Welford> res(pos.size());
        for (int i = 0; i < int(P["n_samples"]); ++i) {
            auto V = potential::sample_potential(pp, g, derive_seed(c.seed, hash_string("evolve-born"), i));
            auto T0 = free_evolve(psi, g, t);
            auto U1 = born_term(1, V.values, 1.0, psi, g, t, bq);
            auto U2 = born_term(2, V.values, 1.0, psi, g, t, bq);
            for (std::size_t e = 0; e < pos.size(); ++e) {
                SplitStepper st(g, V.values, pos[e], t / steps);
                CVec f = psi;
                st.evolve(f, steps);
                CVec s(f.size());
                for (std::size_t k = 0; k < s.size(); ++k) s[k] = T0[k] + pos[e] * U1[k] + pos[e] * pos[e] * U2[k];
                res[e].add(l2diff(g, f, s));
            }
        }
        bool ok = true;
        std::string det;
        for (std::size_t e = 0; e < pos.size(); ++e)
            r.rows.push_back({num(pos[e]), num(t), "born_residual", num(res[e].mean), num(res[e].stderr_()),
                              std::to_string(res[e].n)});
        for (std::size_t e = 0; e + 1 < pos.size(); ++e) {
            double ratio = res[e].mean / res[e + 1].mean;
            double need = std::pow(pos[e] / pos[e + 1], 2.5);
            ok = ok && ratio >= need;
            det += "eps " + num(pos[e]) + "->" + num(pos[e + 1]) + ": ratio " + num(ratio) + " >= " + num(need) + "; ";
        }
        det.resize(det.size() - 2);
        add_check(r, "C6.born_scaling", 6, ok, det);
    }
    runtime_check(r, "C6.runtime", 6, sw, 600);
    return r;
}

// ---------------------------------------------------------------- kinetic-compare

}  // namespace

cplx dual_multiplier(const RVec& p, const RVec& kappa, double eps, double t, int M,
                     const potential::CorrelationProfile& R) {
    double rho = std::hypot(p[0], p[1]);
    if (rho < 1e-12) return 0.0;
    boltzmann::ShellGrid sg{2, {rho}, M};
    const double w = sg.node_weight(0) * boltzmann::golden_rule_prefactor(2);
    std::vector<double> cm(M);
    for (int m = 0; m <= M / 2; ++m) {
        cm[m] = w * R.fourier(2 * rho * std::sin(kPi * m / M), 2);
        if (m > 0) cm[M - m] = cm[m];
    }
    double K = 0;
    for (double v : cm) K += v;
    const double phi = std::atan2(p[1], p[0]);
    Eigen::MatrixXcd A(M, M);
    Eigen::VectorXcd m0(M);
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) A(i, j) = eps * eps * cm[(i - j + M) % M];
        double th = phi + 2 * kPi * i / M;
        RVec q{rho * std::cos(th), rho * std::sin(th)};
        A(i, i) += cplx(-eps * eps * K, kappa[0] * q[0] + kappa[1] * q[1]);
        m0(i) = q[0];
    }
    Eigen::MatrixXcd E = (t * A).exp();
    return (E.row(0) * m0).value();
}

namespace {

ExperimentResult run_kinetic(const Config& c, const std::string& out) {
    ExperimentResult r;
    r.columns = {"epsilon", "t", "observable_id", "estimate_re", "estimate_im", "mc_stderr", "n_samples",
                 "boltzmann_re", "boltzmann_im", "error"};
    const json& P = c.params;
    Stopwatch sw;
    Grid g{2, int(P["n"]), double(P["L"])};
    validate_grid(g);
    auto p0v = list(P["p0"]);
    auto kiv = P["kappa_index"].get<std::vector<int>>();
    require(p0v.size() == 2 && kiv.size() == 2, "kinetic-compare: p0 and kappa_index need two entries");
    const RVec kappa{2 * g.dp() * kiv[0], 2 * g.dp() * kiv[1]};
    auto R = potential::CorrelationProfile::wendland(double(P["sigma2"]), double(P["corr_length"]));
    potential::PotentialParams pp;
    pp.corr = R;
    auto env = wavepacket::Envelope::make(double(P["r"]), 2);
    auto psi0 = wavepacket::make_wavepacket({{0, 0}, {p0v[0], p0v[1]}}, env, g);
    const std::size_t N = g.size();

    std::vector<cplx> m0(N);
    for (std::size_t k = 0; k < N; ++k) m0[k] = g.momentum_at(k)[0];

    // lattice momenta carrying all but a `tail` fraction of the pairing weight
    CVec phi(N), chi(N);
    for (std::size_t k = 0; k < N; ++k) {
        RVec x = g.position(k);
        cplx ph = std::exp(cplx(0, 0.5 * (kappa[0] * x[0] + kappa[1] * x[1])));
        phi[k] = ph * psi0[k];
        chi[k] = std::conj(ph) * psi0[k];
    }
    fft_forward(g, phi);
    fft_forward(g, chi);
    std::vector<double> wt(N);
    double tot = 0;
    for (std::size_t k = 0; k < N; ++k) {
        RVec p = g.momentum_at(k);
        wt[k] = std::abs(phi[k]) * std::abs(chi[k]) * std::hypot(p[0], p[1]);
        tot += wt[k];
    }
    std::vector<std::size_t> order(N);
    for (std::size_t k = 0; k < N; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return wt[a] < wt[b]; });
    std::vector<char> keep(N, 1);
    double acc = 0;
    for (std::size_t k : order) {
        acc += wt[k];
        if (acc > double(P["tail"]) * tot) break;
        keep[k] = 0;
    }
    const bool reflect = kiv[1] == 0;  // p_y -> -p_y symmetry of the dual flow

    auto eps_list = list(P["eps"]);
    std::vector<double> errs, ses;
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        const double eps = eps_list[e];
        const double t = double(P["kinetic_time"]) / (eps * eps);
        Stopwatch se;
        std::vector<cplx> mt(N, 0.0);
        std::map<std::pair<int, int>, cplx> cache;
        for (std::size_t k = 0; k < N; ++k) {
            if (!keep[k]) continue;
            int ix = g.freq_index(int(k % g.n)), iy = g.freq_index(int(k / g.n));
            std::pair<int, int> key{ix, reflect ? std::abs(iy) : iy};
            auto it = cache.find(key);
            if (it == cache.end()) {
                RVec p{ix * g.dp(), key.second * g.dp()};
                it = cache.emplace(key, dual_multiplier(p, kappa, eps, t, int(P["shell_angles"]), R)).first;
            }
            mt[k] = it->second;
        }
        cplx B = schrodinger::plane_wave_pairing(g, psi0, kappa, mt);
        r.timings.push_back({"boltzmann eps=" + num(eps), se.seconds()});

        Stopwatch sq;
        ComplexWelford W;
        for (int i = 0; i < int(P["n_samples"]); ++i) {
            auto V = potential::sample_potential(
                pp, g, derive_seed(c.seed, hash_string("kinetic-compare:" + std::to_string(e)), i));
            if (i == 0 && e == 0 && !out.empty()) {
                potential::export_field(V, join(out, "potential_sample0"));
                r.exported.push_back("potential_sample0.bin");
                r.exported.push_back("potential_sample0.json");
            }
            schrodinger::EvolutionParams ep{eps, double(P["dt"]), t};
            auto pt = schrodinger::split_step_evolve(psi0, V, ep);
            W.add(schrodinger::plane_wave_pairing(g, pt, kappa, m0));
        }
        r.timings.push_back({"schrodinger eps=" + num(eps), sq.seconds()});
        double err = std::abs(W.mean - B);
        errs.push_back(err);
        ses.push_back(W.stderr_());
        r.rows.push_back({num(eps), num(t), "weyl_px_plane_wave", num(W.mean.real()), num(W.mean.imag()),
                          num(W.stderr_()), std::to_string(W.n), num(B.real()), num(B.imag()), num(err)});
    }
    // ordered by decreasing eps
    std::vector<std::size_t> idx(eps_list.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return eps_list[a] > eps_list[b]; });
    const double dec = P["decrease"];
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        std::size_t a = idx[i], b = idx[i + 1];
        double band = 2 * std::hypot(ses[a], ses[b]);
        bool ok = errs[b] <= (1 - dec) * errs[a] && errs[a] - errs[b] > band;
        add_check(r, "C7.trend:" + num(eps_list[a]) + "->" + num(eps_list[b]), 7, ok,
                  "err " + num(errs[a]) + " (se " + num(ses[a]) + ") -> " + num(errs[b]) + " (se " + num(ses[b]) +
                      "); need <= " + num(1 - dec) + "x and drop > " + num(band));
    }
    runtime_check(r, "C7.runtime", 7, sw, 900);
    return r;
}

// ---------------------------------------------------------------- semigroup-check

ExperimentResult run_semigroup(const Config& c) {
    ExperimentResult r;
    r.columns = {"check", "index", "estimate", "reference", "mc_stderr", "n_samples"};
    const json& P = c.params;
    Grid g{1, int(P["n"]), double(P["L"])};
    validate_grid(g);
    auto R = potential::CorrelationProfile::wendland(double(P["sigma2"]), double(P["corr_length"]));
    potential::PotentialParams pp;
    pp.corr = R;
    auto bump = potential::CutoffBump::make(double(P["bump_r"]), 1);
    const double dp = g.dp();

    // Gaussian moments: pair configurations and one 4-point cell, all from the same fields
    Rng rng = make_rng(c.seed, hash_string("moment-configs"));
    std::uniform_real_distribution<double> U(-1, 1);
    std::uniform_int_distribution<int> Q(-3, 3);
    struct PairCfg {
        RVec y, yp, q, qp;
        cplx exact;
    };
    std::vector<PairCfg> cfg;
    for (int i = 0; i < int(P["n_configs"]); ++i) {
        PairCfg pc;
        pc.y = {2 * U(rng), 0};
        pc.yp = {pc.y[0] + 1.5 * U(rng), 0};
        int m = Q(rng);
        pc.q = {m * dp, 0};
        pc.qp = {(-m + (i % 3 == 0 ? Q(rng) : 0)) * dp, 0};
        pc.exact = potential::pair_moment(R, bump, g, pc.y, pc.yp, pc.q, pc.qp).value;
        cfg.push_back(pc);
    }
    std::vector<potential::WindowPoint> X4 = {
        {{0.0, 0}, {dp, 0}}, {{0.3, 0}, {-dp, 0}}, {{-0.2, 0}, {2 * dp, 0}}, {{0.1, 0}, {-2 * dp, 0}}};
    cplx wick = potential::partition_moment(combinat::Partition::from_cells({{0, 1, 2, 3}}), X4, R, bump, g);

    std::vector<Welford> re(cfg.size()), im(cfg.size());
    Welford w4re, w4im;
    const int nmc = P["n_mc"];
    for (int s = 0; s < nmc; ++s) {
        auto V = potential::sample_potential(pp, g, derive_seed(c.seed, hash_string("moment-mc"), s));
        for (std::size_t i = 0; i < cfg.size(); ++i) {
            cplx v = potential::localized_fourier(V, cfg[i].y, cfg[i].q, bump).value *
                     potential::localized_fourier(V, cfg[i].yp, cfg[i].qp, bump).value;
            re[i].add(v.real());
            im[i].add(v.imag());
        }
        cplx p4 = 1.0;
        for (const auto& w : X4) p4 *= potential::localized_fourier(V, w.y, w.q, bump).value;
        w4re.add(p4.real());
        w4im.add(p4.imag());
    }
    int inside = 0;
    for (std::size_t i = 0; i < cfg.size(); ++i) {
        bool ok = std::abs(re[i].mean - cfg[i].exact.real()) <= 3 * re[i].stderr_() + 1e-12 &&
                  std::abs(im[i].mean - cfg[i].exact.imag()) <= 3 * im[i].stderr_() + 1e-12;
        inside += ok;
        r.rows.push_back({"pair_moment_re", std::to_string(i), num(re[i].mean), num(cfg[i].exact.real()),
                          num(re[i].stderr_()), std::to_string(nmc)});
        r.rows.push_back({"pair_moment_im", std::to_string(i), num(im[i].mean), num(cfg[i].exact.imag()),
                          num(im[i].stderr_()), std::to_string(nmc)});
    }
    add_check(r, "C9.pair_moments", 9, inside == int(cfg.size()),
              std::to_string(inside) + "/" + std::to_string(cfg.size()) + " configurations within 3 standard errors");
    cplx mc4(w4re.mean, w4im.mean);
    double rel4 = std::abs(mc4 - wick) / std::abs(wick);
    add_check(r, "C9.wick4", 9, rel4 <= double(P["wick_tol"]),
              "4-point Wick sum " + num(wick.real()) + " vs MC " + num(mc4.real()) + ": relative " + sci(rel4) +
                  " (tol " + num(double(P["wick_tol"])) + ")");
    r.rows.push_back({"wick4_re", "0", num(mc4.real()), num(wick.real()), num(w4re.stderr_()), std::to_string(nmc)});

    // semigroup identities
    const double s = P["s"], t = P["t"], eps = P["eps"];
    {
        Grid gq{1, 128, 40.0};
        auto psi = wavepacket::make_wavepacket({{0, 0}, {1, 0}}, wavepacket::Envelope::make(4.0, 1), gq);
        double d = l2diff(gq, schrodinger::free_evolve(schrodinger::free_evolve(psi, gq, s), gq, t),
                          schrodinger::free_evolve(psi, gq, s + t));
        add_check(r, "S.free_evolution", 0, d <= 1e-12, "free flow composition defect " + sci(d));
        r.rows.push_back({"free_evolution", "0", sci(d), "0", "0", "0"});
    }
    boltzmann::ShellGrid sh{2, {1.0}, int(P["angles"])};
    auto kern = boltzmann::CollisionKernel::build(potential::CorrelationProfile::wendland(1.0, 1.0), eps, sh);
    {
        Eigen::MatrixXd A = boltzmann::collision_propagator(kern, 0, s) * boltzmann::collision_propagator(kern, 0, t);
        double d = (A - boltzmann::collision_propagator(kern, 0, s + t)).cwiseAbs().maxCoeff();
        add_check(r, "S.collision", 0, d <= 1e-12, "collision propagator composition defect " + sci(d));
        r.rows.push_back({"collision", "0", sci(d), "0", "0", "0"});
    }
    {
        Grid gs{2, 8, 16.0};
        auto f = boltzmann::KineticState::zeros(gs, sh);
        for (int j = 0; j < sh.nodes(); ++j)
            for (std::size_t x = 0; x < gs.size(); ++x) {
                RVec y = gs.position(x);
                RVec p = sh.momentum(0, j);
                f.at(0, j, x) = 1.0 + 0.5 * std::cos(2 * kPi * y[0] / gs.L) * (1 + 0.5 * p[0]) +
                                0.2 * std::sin(2 * kPi * y[1] / gs.L) * p[1];
            }
        auto diff = [](const boltzmann::KineticState& a, const boltzmann::KineticState& b) {
            double m = 0;
            for (std::size_t i = 0; i < a.f.size(); ++i) m = std::max(m, std::abs(a.f[i] - b.f[i]));
            return m;
        };
        double dt = diff(boltzmann::transport(boltzmann::transport(f, s), t), boltzmann::transport(f, s + t));
        add_check(r, "S.transport", 0, dt <= 1e-12, "transport composition defect " + sci(dt));
        auto a = boltzmann::boltzmann_series(f, s, 16, kern).sum;
        auto b = boltzmann::boltzmann_series(a, t, 16, kern).sum;
        double dsr = diff(b, boltzmann::boltzmann_series(f, s + t, 16, kern).sum);
        add_check(r, "S.boltzmann_series", 0, dsr <= 1e-8, "series flow composition defect " + sci(dsr));
        r.rows.push_back({"transport", "0", sci(dt), "0", "0", "0"});
        r.rows.push_back({"boltzmann_series", "0", sci(dsr), "0", "0", "0"});
    }
    {
        bool ok = true;
        for (int a = 1; a <= 4; ++a)
            for (int b = 1; b <= 4; ++b) {
                std::vector<int> A1, A2, B1, B2, A, B;
                int id = 0;
                for (int i = 0; i < a; ++i) A1.push_back(id++);
                for (int i = 0; i < b; ++i) A2.push_back(id++);
                for (int i = 0; i < a; ++i) B1.push_back(id++);
                for (int i = 0; i < b; ++i) B2.push_back(id++);
                A = A1;
                A.insert(A.end(), A2.begin(), A2.end());
                B = B1;
                B.insert(B.end(), B2.begin(), B2.end());
                auto P1 = combinat::ladder_partition(A1, B1, combinat::Orientation::Ladder);
                auto P2 = combinat::ladder_partition(A2, B2, combinat::Orientation::Ladder);
                auto cells = P1.cells;
                cells.insert(cells.end(), P2.cells.begin(), P2.cells.end());
                ok = ok && combinat::Partition::from_cells(cells) ==
                               combinat::ladder_partition(A, B, combinat::Orientation::Ladder);
            }
        add_check(r, "S.ladder_concatenation", 0, ok, "ladders on consecutive blocks concatenate to the ladder");
    }
    return r;
}

// ---------------------------------------------------------------- boltzmann-solve

ExperimentResult run_boltzmann(const Config& c, const std::string& out) {
    using namespace boltzmann;
    ExperimentResult r;
    r.columns = {"epsilon", "t", "quantity", "value"};
    const json& P = c.params;
    Stopwatch sw;
    Grid g{2, int(P["n"]), double(P["L"])};
    validate_grid(g);
    ShellGrid sh{2, list(P["shell_radii"]), int(P["angles"])};
    sh.validate();
    auto R = potential::CorrelationProfile::wendland(double(P["sigma2"]), double(P["corr_length"]));
    const double dt = P["dt"];

    auto smooth = [&](const ShellGrid& s) {
        auto f = KineticState::zeros(g, s);
        for (std::size_t q = 0; q < s.radii.size(); ++q)
            for (int j = 0; j < s.nodes(); ++j) {
                RVec p = s.momentum(q, j);
                for (std::size_t x = 0; x < g.size(); ++x) {
                    RVec y = g.position(x);
                    f.at(q, j, x) = 1.0 + 0.5 * std::cos(2 * kPi * y[0] / g.L) * (1 + 0.5 * p[0]) +
                                    0.3 * std::sin(4 * kPi * y[1] / g.L) * p[1] * p[1];
                }
            }
        return f;
    };
    auto maxdiff = [](const KineticState& a, const KineticState& b) {
        double m = 0;
        for (std::size_t i = 0; i < a.f.size(); ++i) m = std::max(m, std::abs(a.f[i] - b.f[i]));
        return m;
    };
    auto f = smooth(sh);
    const double m0 = f.mass();

    auto eps_list = list(P["eps"]);
    double worst_mass = 0, worst_eq = 0;
    std::vector<double> C;
    for (double eps : eps_list) {
        auto k = CollisionKernel::build(R, eps, sh);
        double step_dt = std::min(dt, 0.1 / (eps * eps * k.max_K()));
        double dm = std::abs(solve_boltzmann(f, step_dt, step_dt, k).mass() - m0) / m0;
        worst_mass = std::max(worst_mass, dm);
        auto eq = KineticState::zeros(g, sh);
        for (auto& v : eq.f) v = 2.0;
        double deq = maxdiff(solve_boltzmann(eq, double(P["equilibrium_t"]), step_dt, k), eq);
        worst_eq = std::max(worst_eq, deq);
        double ts = P["series_t"];
        auto ser = boltzmann_series(f, ts, int(P["series_terms"]), k);
        double lam = eps * eps * ts * k.max_K();
        double cmax = 0;
        for (std::size_t j = 0; j + 1 < ser.term_norms.size(); ++j)
            cmax = std::max(cmax, ser.term_norms[j + 1] / ser.term_norms[j] / lam);
        C.push_back(cmax);
        r.rows.push_back({num(eps), num(step_dt), "relative_mass_change", sci(dm)});
        r.rows.push_back({num(eps), num(double(P["equilibrium_t"])), "equilibrium_deviation", sci(deq)});
        r.rows.push_back({num(eps), num(ts), "series_decay_constant", num(cmax)});
    }
    add_check(r, "C8.mass", 8, worst_mass <= 1e-12, "relative mass change per step " + sci(worst_mass) + " (tol 1e-12)");
    add_check(r, "C8.equilibrium", 8, worst_eq <= 1e-10, "isotropic equilibrium drift " + sci(worst_eq) + " (tol 1e-10)");
    double cmin = *std::min_element(C.begin(), C.end()), cmaxv = *std::max_element(C.begin(), C.end());
    add_check(r, "C8.series_decay", 8, cmaxv / cmin <= 1.5,
              "decay constants C in [" + num(cmin) + ", " + num(cmaxv) + "]; stable when max/min <= 1.5");

    const double se = P["split_eps"];
    auto ks = CollisionKernel::build(R, se, sh);
    double ts = double(P["split_kinetic_time"]) / (se * se);
    auto split = solve_boltzmann(f, ts, dt, ks);
    auto ser = boltzmann_series(f, ts, 12, ks);
    double dsp = maxdiff(split, ser.sum);
    add_check(r, "C8.split_vs_series", 8, dsp <= 1e-4, "sup |split - series| = " + sci(dsp) + " at eps^2 t = " +
                                                            num(double(P["split_kinetic_time"])) + " (tol 1e-4)");
    r.rows.push_back({num(se), num(ts), "split_vs_series", sci(dsp)});
    if (!out.empty()) {
        export_state(split, join(out, "boltzmann_state"));
        r.exported.push_back("boltzmann_state.bin");
        r.exported.push_back("boltzmann_state.json");
    }

    ShellGrid one{2, {1.0}, int(P["angles"])};
    auto kg = CollisionKernel::build(R, double(P["gk_eps"]), one);
    DiffusionParams dp;
    dp.n_particles = P["n_particles"];
    dp.seed = derive_seed(c.seed, hash_string("diffusion"));
    auto est = diffusion_diagnostics(kg, 0, dp);
    double rel = std::abs(est.D_gk - est.D_msd) / est.D_gk;
    add_check(r, "C8.green_kubo_vs_msd", 8, rel <= 0.1 && !est.horizon_too_short,
              "D_gk " + num(est.D_gk) + " vs D_msd " + num(est.D_msd) + ": relative " + num(rel) + " (tol 0.1)");
    r.rows.push_back({num(double(P["gk_eps"])), num(est.horizon), "D_green_kubo", num(est.D_gk)});
    r.rows.push_back({num(double(P["gk_eps"])), num(est.horizon), "D_msd", num(est.D_msd)});
    runtime_check(r, "C8.runtime", 8, sw, 300);
    return r;
}

// ---------------------------------------------------------------- path-stats

std::string doubled_to_json(const pathspace::DoubledPath& G) {
    json j;
    j["plus"] = json::parse(pathspace::path_to_json(G.plus.segments.at(0)));
    j["minus"] = json::parse(pathspace::path_to_json(G.minus.segments.at(0)));
    return j.dump(1);
}

ExperimentResult run_paths(const Config& c) {
    using namespace pathspace;
    ExperimentResult r;
    r.columns = {"epsilon", "t", "n_paths", "rate_recollision", "rate_tube", "rate_cone", "rate_ladder_verdict",
                 "mean_collisions", "expected_collisions"};
    const json& P = c.params;

    Stopwatch sw;
    auto cprm = PathParams::defaults(double(P["campaign_r"]), double(P["campaign_alpha"]));
    auto camp = ladder_campaign(cprm, int(P["campaign_n"]), int(P["k_max"]), derive_seed(c.seed, hash_string("campaign")),
                                long(P["max_attempts"]));
    for (std::size_t i = 0; i < camp.counterexamples.size(); ++i)
        r.artifacts.push_back({"counterexample_" + std::to_string(i) + ".json", doubled_to_json(camp.counterexamples[i])});
    bool camp_ok = int(camp.accepted.size()) == int(P["campaign_n"]) && camp.counterexamples.empty() &&
                   camp.ladder_verdicts == int(camp.accepted.size());
    add_check(r, "C4.ladder_campaign", 4, camp_ok,
              std::to_string(camp.ladder_verdicts) + "/" + std::to_string(camp.accepted.size()) +
                  " ladder verdicts, " + std::to_string(camp.counterexamples.size()) + " counterexamples, " +
                  std::to_string(camp.attempts) + " attempts");
    r.rows.push_back({"nan", "nan", std::to_string(camp.accepted.size()), "nan", "nan", "nan",
                      num(camp.accepted.empty() ? 0.0 : double(camp.ladder_verdicts) / camp.accepted.size()), "nan",
                      "nan"});
    r.timings.push_back({"ladder campaign", sw.seconds()});

    Stopwatch sm;
    auto R = potential::CorrelationProfile::wendland(double(P["sigma2"]), double(P["corr_length"]));
    boltzmann::ShellGrid sh{2, {double(P["shell_radius"])}, int(P["angles"])};
    auto prm = PathParams::defaults(double(P["r"]), double(P["alpha"]));
    auto eps_list = list(P["eps"]);
    std::vector<double> rate, se;
    json fixtures = json::array();
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        double eps = eps_list[e];
        auto k = boltzmann::CollisionKernel::build(R, eps, sh);
        double t = double(P["kinetic_time"]) / (eps * eps);
        PathMcOptions opt;
        opt.cones = P["cones"];
        opt.keep_paths = e == 0 && int(P["fixtures"]) > 0;
        auto st = sample_paths_mc(t, k, 0, int(P["n_paths"]), derive_seed(c.seed, hash_string("path-stats"), e), prm, opt);
        for (int i = 0; i < int(P["fixtures"]) && i < int(st.paths.size()); ++i)
            fixtures.push_back(json::parse(path_to_json(st.paths[i])));
        rate.push_back(st.rate_recollision);
        se.push_back(st.rate_stderr(st.rate_recollision));
        r.rows.push_back({num(eps), num(t), std::to_string(st.n_paths), num(st.rate_recollision), num(st.rate_tube),
                          opt.cones ? num(st.rate_cone) : "nan", "nan", num(st.mean_collisions),
                          num(st.expected_collisions)});
    }
    if (!fixtures.empty()) r.artifacts.push_back({"path_fixtures.json", fixtures.dump(1)});
    std::vector<std::size_t> idx(eps_list.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return eps_list[a] > eps_list[b]; });
    bool dec = true;
    std::string det;
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        std::size_t a = idx[i], b = idx[i + 1];
        double band = 2 * std::hypot(se[a], se[b]);
        dec = dec && rate[a] - rate[b] > band;
        det += num(rate[a]) + " -> " + num(rate[b]) + " (band " + num(band) + "); ";
    }
    if (!det.empty()) det.resize(det.size() - 2);
    add_check(r, "C10.recollision_rates", 10, dec && idx.size() >= 2, "recollision rate by decreasing eps: " + det);
    r.timings.push_back({"path monte carlo", sm.seconds()});
    return r;
}

}  // namespace

// ---------------------------------------------------------------- public API

bool ExperimentResult::pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

bool ExperimentResult::criterion_pass(int n) const {
    bool any = false;
    for (const auto& c : checks)
        if (c.acceptance == n) {
            any = true;
            if (!c.pass) return false;
        }
    return any;
}

json Config::to_json() const {
    return json{{"schema_version", schema_version}, {"experiment", experiment}, {"seed", seed}, {"params", params}};
}

std::string Config::hash() const {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)hash_string(to_json().dump()));
    return buf;
}

const std::vector<std::string>& experiment_ids() {
    static const std::vector<std::string> ids = {"combinat-verify", "quantize-check",  "evolve",    "kinetic-compare",
                                                 "semigroup-check", "boltzmann-solve", "path-stats"};
    return ids;
}

json default_params(const std::string& experiment) {
    json p = json::object();
    for (const auto& s : schema_of(experiment)) p[s.key] = s.def;
    return p;
}

Config default_config(const std::string& experiment, std::uint64_t seed) {
    Config c;
    c.experiment = experiment;
    c.seed = seed;
    c.params = default_params(experiment);
    return c;
}

Config parse_config(const json& doc) {
    require(doc.is_object(), "config: top level must be an object");
    for (auto it = doc.begin(); it != doc.end(); ++it)
        require(it.key() == "schema_version" || it.key() == "experiment" || it.key() == "seed" || it.key() == "params",
                "config: unknown key '" + it.key() + "'");
    require(doc.contains("schema_version") && doc["schema_version"].is_number_integer(),
            "config: schema_version (integer) is required");
    require(doc["schema_version"].get<int>() == kSchemaVersion,
            "config: unsupported schema_version " + doc["schema_version"].dump());
    require(doc.contains("experiment") && doc["experiment"].is_string(), "config: experiment (string) is required");
    Config c = default_config(doc["experiment"].get<std::string>());
    if (doc.contains("seed")) {
        require(doc["seed"].is_number_unsigned() || (doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0),
                "config: seed must be a nonnegative integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("params")) {
        require(doc["params"].is_object(), "config: params must be an object");
        const auto& sch = schema_of(c.experiment);
        for (auto it = doc["params"].begin(); it != doc["params"].end(); ++it) {
            auto s = std::find_if(sch.begin(), sch.end(), [&](const ParamSpec& p) { return p.key == it.key(); });
            require(s != sch.end(), "config: unknown parameter '" + it.key() + "' for " + c.experiment);
            require(same_kind(s->def, it.value()), "config: parameter '" + it.key() + "' has the wrong type");
            c.params[it.key()] = it.value();
        }
    }
    validate(c);
    return c;
}

void apply_override(Config& c, const std::string& key_in, const std::string& value) {
    std::string key = key_in;
    std::replace(key.begin(), key.end(), '-', '_');
    const auto& sch = schema_of(c.experiment);
    auto s = std::find_if(sch.begin(), sch.end(), [&](const ParamSpec& p) { return p.key == key; });
    require(s != sch.end(), "unknown option '--" + key_in + "' for " + c.experiment);
    auto number = [&](const std::string& txt) {
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(txt, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        require(pos == txt.size() && !txt.empty(), "option '--" + key_in + "': not a number: '" + txt + "'");
        return v;
    };
    json v;
    if (s->def.is_boolean()) {
        require(value == "true" || value == "false" || value == "1" || value == "0",
                "option '--" + key_in + "' expects true or false");
        v = value == "true" || value == "1";
    } else if (s->def.is_number_integer()) {
        double d = number(value);
        require(d == std::floor(d), "option '--" + key_in + "' expects an integer");
        v = (long long)d;
    } else if (s->def.is_number()) {
        v = number(value);
    } else if (s->def.is_array()) {
        v = json::array();
        std::stringstream ss(value);
        std::string item;
        bool ints = !s->def.empty() && s->def[0].is_number_integer();
        while (std::getline(ss, item, ',')) {
            double d = number(item);
            if (ints) {
                require(d == std::floor(d), "option '--" + key_in + "' expects integers");
                v.push_back((long long)d);
            } else {
                v.push_back(d);
            }
        }
    } else {
        v = value;
    }
    c.params[key] = v;
    validate(c);
}

void validate(const Config& c) {
    require(c.schema_version == kSchemaVersion, "unsupported schema_version");
    const auto& sch = schema_of(c.experiment);
    for (auto it = c.params.begin(); it != c.params.end(); ++it)
        require(std::any_of(sch.begin(), sch.end(), [&](const ParamSpec& p) { return p.key == it.key(); }),
                "unknown parameter '" + it.key() + "'");
    for (const auto& s : sch) {
        require(c.params.contains(s.key), "missing parameter '" + s.key + "'");
        require(same_kind(s.def, c.params[s.key]), "parameter '" + s.key + "' has the wrong type");
        check_rule(s, c.params[s.key]);
    }
}

ExperimentResult run(const Config& c, const std::string& out_dir) {
    validate(c);
    if (!out_dir.empty()) fs::create_directories(out_dir);
    Stopwatch sw;
    ExperimentResult r;
    if (c.experiment == "combinat-verify")
        r = run_combinat(c);
    else if (c.experiment == "quantize-check")
        r = run_quantize(c, out_dir);
    else if (c.experiment == "evolve")
        r = run_evolve(c, out_dir);
    else if (c.experiment == "kinetic-compare")
        r = run_kinetic(c, out_dir);
    else if (c.experiment == "semigroup-check")
        r = run_semigroup(c);
    else if (c.experiment == "boltzmann-solve")
        r = run_boltzmann(c, out_dir);
    else if (c.experiment == "path-stats")
        r = run_paths(c);
    else
        throw Error("unknown experiment '" + c.experiment + "'");
    r.experiment = c.experiment;
    r.timings.push_back({"total", sw.seconds()});
    return r;
}

std::string results_csv(const ExperimentResult& r) {
    auto field = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    };
    std::string out;
    for (std::size_t i = 0; i < r.columns.size(); ++i) out += (i ? "," : "") + field(r.columns[i]);
    out += "\n";
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + field(row[i]);
        out += "\n";
    }
    return out;
}

std::string summary_text(const Config& c, const ExperimentResult& r) {
    std::ostringstream o;
    o << "kinlab " << version() << "  experiment " << c.experiment << "\n";
    o << "schema_version " << c.schema_version << "\n";
    o << "seed " << c.seed << "\n";
    o << "config_hash " << c.hash() << "\n";
    o << "parameters\n";
    for (auto it = c.params.begin(); it != c.params.end(); ++it) o << "  " << it.key() << " = " << it.value().dump() << "\n";
    int failed = 0;
    for (const auto& ch : r.checks) failed += !ch.pass;
    o << "checks " << r.checks.size() << "\n";
    for (const auto& ch : r.checks) {
        o << "  " << (ch.pass ? "PASS" : "FAIL") << "  " << ch.id;
        if (ch.acceptance) o << "  [criterion " << ch.acceptance << "]";
        o << "  " << ch.detail << "\n";
    }
    o << "result " << (failed ? "FAIL" : "PASS") << " (" << failed << " of " << r.checks.size() << " checks failed)\n";
    for (const auto& t : r.timings) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f", t.seconds);
        o << "timing " << t.label << " " << buf << " s\n";
    }
    return o.str();
}

std::string version() { return KINLAB_VERSION; }

RunFiles write_run(const Config& c, const ExperimentResult& r, const std::string& out_dir, double wall_seconds,
                   const std::string& started_utc) {
    fs::create_directories(out_dir);
    auto write = [&](const std::string& name, const std::string& bytes) {
        std::ofstream f(join(out_dir, name), std::ios::binary);
        require(bool(f), "cannot write " + join(out_dir, name));
        f << bytes;
    };
    auto read = [&](const std::string& name) {
        std::ifstream f(join(out_dir, name), std::ios::binary);
        require(bool(f), "missing artifact " + join(out_dir, name));
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    auto hex = [](std::uint64_t h) {
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
        return std::string(buf);
    };
    RunFiles files{join(out_dir, "manifest.json"), join(out_dir, "results.csv"), join(out_dir, "summary.txt")};
    write("results.csv", results_csv(r));
    for (const auto& a : r.artifacts) write(a.name, a.bytes);
    write("summary.txt", summary_text(c, r));

    json m;
    m["schema_version"] = kSchemaVersion;
    m["kinlab_version"] = version();
    m["experiment"] = c.experiment;
    m["seed"] = c.seed;
    m["config"] = c.to_json();
    m["config_hash"] = c.hash();
    json arts = json::array();
    std::vector<std::string> names = {"results.csv"};
    for (const auto& a : r.artifacts) names.push_back(a.name);
    for (const auto& e : r.exported) names.push_back(e);
    for (const auto& n : names) arts.push_back({{"file", n}, {"fnv1a64", hex(hash_string(read(n)))}});
    m["artifacts"] = arts;
    json crit = json::array();
    for (const auto& ch : r.checks)
        crit.push_back({{"id", ch.id}, {"acceptance", ch.acceptance}, {"pass", ch.pass}, {"detail", ch.detail}});
    m["checks"] = crit;
    m["pass"] = r.pass();
    m["started_utc"] = started_utc;
    m["wall_clock_seconds"] = wall_seconds;
    write("manifest.json", m.dump(2) + "\n");
    return files;
}

}  // namespace kinlab::experiments
