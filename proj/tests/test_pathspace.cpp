#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "kinlab/pathspace.hpp"
#include "path_gen.hpp"

using namespace kinlab;
using namespace kinlab::pathspace;
using testgen::straight_path;

namespace {

const double kPi = std::numbers::pi;

bool has_pair(const std::vector<IdPair>& v, int a, int b) {
    for (auto [x, y] : v)
        if (x == a && y == b) return true;
    return false;
}

bool has_clause(const Membership& m, const std::string& c) {
    for (const auto& v : m.violations)
        if (v.clause == c) return true;
    return false;
}

// the one-dimensional pair with alternating momenta and crossed correlations
DoubledPath one_dim_example() {
    RVec v{1, 0}, mv{-1, 0};
    Path wp = straight_path({4, 2, 1, 2, 4}, {v, mv, v, mv, v}, {0, 0}, 1);
    Path wm = straight_path({4, 3, 2, 1, 3}, {v, mv, v, mv, v}, {0, 0}, 1);
    PhasePoint s{{0, 0}, v};
    return testgen::doubled(wp, wm, s, s);
}

// square loop: in along +x, turns at (0,0), (0,10), (-10,10), (-10,0)
Path cone_path(double y4_offset) {
    Path w = straight_path({10, 10, 10, 10, 10}, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 0}}, {-10, 0});
    w.y[3][1] += y4_offset;
    return w;
}

}  // namespace

TEST_CASE("path data model") {
    Path w = straight_path({1, 2, 3}, {{1, 0}, {0, 1}, {1, 1}}, {0, 0});
    CHECK(w.k() == 2);
    CHECK(w.time_of(2) == 3.0);
    CHECK_NOTHROW(w.validate());
    Path bad = w;
    bad.t_total = 7;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = w;
    bad.p.pop_back();
    CHECK_THROWS_AS(bad.validate(), Error);

    auto back = path_from_json(path_to_json(w));
    CHECK(back.s == w.s);
    CHECK(back.y == w.y);
    CHECK(back.p == w.p);

    PathParams p = PathParams::defaults(1.0, 0.5);
    CHECK_NOTHROW(p.validate());
    p.tube_radius = 0;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("path constraints") {
    PathParams prm = PathParams::defaults(1.0, 0.5);
    PhasePoint xi{{0, 0}, {1, 0}}, eta{{5, 0}, {1, 0}};
    Path straight = straight_path({5}, {{1, 0}}, {0, 0});
    CHECK(check_path_constraints(straight, prm, &xi, &eta).member);
    PhasePoint far{{9, 0}, {1, 0}};
    CHECK(has_clause(check_path_constraints(straight, prm, &xi, &far), "endpoint"));

    Path w = straight_path({3, 4, 4, 3}, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0, 0});
    CHECK(check_path_constraints(w, prm).member);
    Path moved = w;
    moved.y[1][0] += 3 * prm.alpha * prm.r;  // y_2 off the transport line
    auto m = check_path_constraints(moved, prm);
    CHECK_FALSE(m.member);
    CHECK(has_clause(m, "transport"));

    Path fast = straight_path({30, 30}, {{1, 0}, {0, 2}}, {0, 0});
    prm.r = 10;  // |p| r^-1 and alpha r^-2 small against the energy jump
    m = check_path_constraints(fast, prm);
    CHECK(has_clause(m, "kinetic"));
    CHECK_FALSE(has_clause(m, "transport"));

    Path short_start = straight_path({0.2, 3}, {{1, 0}, {0, 1}}, {0, 0});
    CHECK(has_clause(check_path_constraints(short_start, PathParams::defaults(1.0, 0.5)), "boundary"));
}

TEST_CASE("path phase") {
    Path w0 = straight_path({2.5}, {{1.2, -0.4}}, {0, 0});
    CHECK(path_phase(w0) == doctest::Approx(2.5 * (1.44 + 0.16) / 2).epsilon(1e-15));

    Rng rng(7);
    std::uniform_real_distribution<double> U(-1, 1);
    Path w;
    w.d = 2;
    for (int j = 0; j < 5; ++j) {
        w.s.push_back(1 + U(rng) * 0.5);
        w.p.push_back({U(rng), U(rng)});
        if (j < 4) w.y.push_back({5 * U(rng), 5 * U(rng)});
    }
    w.t_total = 0;
    for (double s : w.s) w.t_total += s;
    const double h = 1e-5;
    for (int j = 1; j < 4; ++j)
        for (int c = 0; c < 2; ++c) {
            Path a = w, b = w;
            a.p[j][c] += h;
            b.p[j][c] -= h;
            double num = (path_phase(a) - path_phase(b)) / (2 * h);
            // y_j is w.y[j-1]
            double exact = w.y[j - 1][c] + w.s[j] * w.p[j][c] - w.y[j][c];
            CHECK(std::abs(num - exact) < 1e-6);
        }
    RVec v{0.7, -2.1};
    Path t = w;
    for (auto& y : t.y) y = {y[0] + v[0], y[1] + v[1]};
    double shift = v[0] * (w.p[4][0] - w.p[0][0]) + v[1] * (w.p[4][1] - w.p[0][1]);
    CHECK(std::abs(path_phase(t) - path_phase(w) - shift) < 1e-12);
}

TEST_CASE("collision partition") {
    double rho = 1.3;
    auto P = collision_partition({{0, 0}, {5 * rho, 0}, {0.4 * rho, 0}}, RadiusPolicy::uniform(rho));
    CHECK(P == combinat::Partition::from_cells({{0, 2}, {1}}));
    std::vector<RVec> chain;
    for (int i = 0; i < 6; ++i) chain.push_back({1.5 * rho * i, 0});
    CHECK(collision_partition(chain, RadiusPolicy::uniform(1.6 * rho)).cells.size() == 1);
    CHECK(collision_partition({}, RadiusPolicy::uniform(rho)).cells.empty());

    // signed: 3 apart joins only across signs when cross = 4, same = 2
    std::vector<RVec> y{{0, 0}, {3, 0}, {6, 0}};
    auto S = collision_partition(y, RadiusPolicy::signed_radii(4, 2), {+1, -1, -1});
    CHECK(S == combinat::Partition::from_cells({{0, 1}, {2}}));
    CHECK_THROWS_AS(collision_partition(y, RadiusPolicy::signed_radii(4, 2)), Error);
}

TEST_CASE("beta completeness") {
    auto P = combinat::Partition::from_cells({{0, 1}});
    std::vector<CollisionPoint> zero{{{0, 0}, {0, 0}}, {{1, 0}, {0, 0}}};
    CHECK(beta_complete(zero, P, 1e-3, 1.0).complete);
    std::vector<CollisionPoint> cancel{{{0, 0}, {0.7, -2}}, {{1, 0}, {-0.7, 2}}};
    CHECK(beta_complete(cancel, P, 1e-3, 1.0).complete);
    double beta = 0.5, r = 2.0, delta = 1e-3;
    std::vector<CollisionPoint> over{{{0, 0}, {2 * beta / r + delta, 0}}, {{1, 0}, {0, 0}}};
    auto rep = beta_complete(over, P, beta, r);
    CHECK_FALSE(rep.complete);
    CHECK(rep.cells[0].bound == doctest::Approx(2 * beta / r));
    std::vector<CollisionPoint> at{{{0, 0}, {2 * beta / r, 0}}, {{1, 0}, {0, 0}}};
    CHECK(beta_complete(at, P, beta, r).complete);
}

TEST_CASE("concatenation") {
    Rng rng(11);
    ExtendedPath one = testgen::random_extended_path(rng, 1, 20.0, 0.2, 1.0);
    auto c1 = concatenate(one, 0.2, 1.0);
    CHECK(c1.S == one.segments[0].s);
    CHECK(c1.P == one.segments[0].p);
    CHECK(c1.Y == one.segments[0].y);

    // exact chain: two segments, one collision each, checkpoints matched
    Path a = straight_path({3, 7}, {{1, 0}, {0, 1}}, {0, 0});
    Path b;
    b.d = 2;
    b.s = {4, 6};
    b.p = {{0, 1}, {-1, 0}};
    b.y = {{3, 11}};
    b.t_total = 10;
    ExtendedPath G;
    G.tau = 10;
    G.segments = {a, b};
    G.xi = {{{0, 0}, {1, 0}}, {{3, 7}, {0, 1}}, {{3, 7}, {0, 1}}, {{-3, 11}, {-1, 0}}};
    auto c = concatenate(G, 0.2, 1.0);
    REQUIRE(c.k() == 2);
    CHECK(c.S[1] == 11.0);
    CHECK(c.T[1] == 14.0);
    CHECK(c.residual[0] == 0.0);
    CHECK(c.within);

    int worst_fail = 0;
    double worst_ratio = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto E = testgen::random_extended_path(rng, 2 + trial % 4, 20.0, 0.2, 1.0);
        auto cc = concatenate(E, 0.2, 1.0, 10.0);
        worst_fail += !cc.within;
        for (std::size_t i = 0; i < cc.residual.size(); ++i)
            worst_ratio = std::max(worst_ratio, cc.residual[i] / cc.bound[i]);
    }
    CHECK(worst_fail == 0);
    CHECK(worst_ratio <= 1.0);
}

TEST_CASE("event detection") {
    PathParams prm = PathParams::defaults(1.0, 0.5);

    SUBCASE("recollision") {
        // revisits the first site at collision 4
        Path w = straight_path({5, 5, 5, 5, 5}, {{1, 0}, {0, 1}, {1, 0}, {-1, -1}, {0, 1}}, {0, 0});
        w.y[3] = w.y[0];
        auto rep = detect_events(w, prm, {false, false});
        CHECK(has_pair(rep.recollisions, 0, 3));
        for (auto [a, b] : rep.immediate) CHECK_FALSE(has_pair(rep.recollisions, a, b));
        CHECK(std::find(rep.atypical.begin(), rep.atypical.end(), 0) != rep.atypical.end());
    }

    SUBCASE("immediate") {
        Path w = straight_path({5, 0.5, 5}, {{1, 0}, {0, 1}, {1, 0}}, {0, 0});
        auto rep = detect_events(w, prm, {false, false});
        CHECK(rep.immediate == std::vector<IdPair>{{0, 1}});
        CHECK(rep.recollisions.empty());
    }

    SUBCASE("tube") {
        // y_3 back on the incoming line of y_1, with collision 2 in between
        double d = 10 * std::sqrt(2.0);
        Path w = straight_path({10, 10, d, 5}, {{1, 0}, {0, 1}, {1 / std::sqrt(2.0), -1 / std::sqrt(2.0)}, {0, 1}},
                               {-10, 0});
        auto rep = detect_events(w, prm, {false, false});
        CHECK(has_pair(rep.tubes, 0, 2));
        // oracle: scan s for the distance to the line y_1 + s p_0
        double best = 1e300;
        for (double s = -100; s <= 100; s += 0.01)
            best = std::min(best, std::hypot(w.y[2][0] - (w.y[0][0] + s * w.p[0][0]),
                                             w.y[2][1] - (w.y[0][1] + s * w.p[0][1])));
        CHECK(best <= prm.tube_radius);
        // incidence mode needs an immediate index in between
        PathParams inc = prm;
        inc.tube_mode = TubeMode::Incidence;
        CHECK(detect_events(w, inc, {false, false}).tubes.empty());
    }

    SUBCASE("cone") {
        PathParams c = prm;
        c.cone_exclusion = 1.0;
        Path w = cone_path(0.5);
        REQUIRE(detect_events(w, c, {true, false}).cones.size() >= 1);
        CHECK(has_pair(detect_events(w, c, {true, false}).cones, 0, 3));
        // y_4 is off the p_1 ray
        CHECK(std::abs(w.y[3][0] - w.y[0][0]) > c.cone_radius);

        // oracle: Cartesian v grid, best t in closed form
        auto oracle = [&](const PathParams& q) {
            RVec qa{w.p[1][0] - w.p[0][0], w.p[1][1] - w.p[0][1]};
            RVec qb{w.p[4][0] - w.p[3][0], w.p[4][1] - w.p[3][1]};
            double E0 = 0.5, win = q.cone_energy_window;
            RVec D{w.y[3][0] - w.y[0][0], w.y[3][1] - w.y[0][1]};
            for (double vx = -2; vx <= 2; vx += 0.004)
                for (double vy = -2; vy <= 2; vy += 0.004) {
                    double v2 = vx * vx + vy * vy;
                    if (std::abs(0.5 * v2 - E0) > win) continue;
                    double a1 = 0.5 * ((vx - qa[0]) * (vx - qa[0]) + (vy - qa[1]) * (vy - qa[1]));
                    double a2 = 0.5 * ((vx + qb[0]) * (vx + qb[0]) + (vy + qb[1]) * (vy + qb[1]));
                    if (std::abs(a1 - E0) > win || std::abs(a2 - E0) > win) continue;
                    double t = (D[0] * vx + D[1] * vy) / v2;
                    if (std::hypot(D[0] - t * vx, D[1] - t * vy) > q.cone_radius) continue;
                    if (std::hypot(vx - w.p[1][0], vy - w.p[1][1]) < q.cone_exclusion) continue;
                    return true;
                }
            return false;
        };
        CHECK(oracle(c));
        PathParams tight = c;
        tight.cone_energy_window /= 100;
        tight.cone_radius /= 100;
        CHECK_FALSE(has_pair(detect_events(w, tight, {true, false}).cones, 0, 3));
        CHECK_FALSE(oracle(tight));
        // the actual momentum is excluded
        PathParams wide = c;
        wide.cone_exclusion = 3.0;
        CHECK(detect_events(w, wide, {true, false}).cones.empty());
    }

    SUBCASE("cluster and typicality") {
        // three sites within 2r on the two sides form a cluster
        Path wp = straight_path({5, 5, 5}, {{1, 0}, {0, 1}, {1, 0}}, {0, 0});
        Path wm = straight_path({5.5, 5, 5}, {{1, 0}, {0, 1}, {1, 0}}, {0, 0});
        wm.y[1] = {40, 40};
        wm.y[0] = {5.5, 0};
        PhasePoint s{{0, 0}, {1, 0}};
        auto G = testgen::doubled(wp, wm, s, s);
        auto rep = detect_events(G, prm, {false, false});
        // + ids 0, 1; - ids 2, 3. Sites: 0 (5,0), 1 (5,5), 2 (5.5,0), 3 (40,40)
        CHECK(rep.P == combinat::Partition::from_cells({{0, 2}, {1}, {3}}));
        CHECK(rep.cluster_edges.empty());
        Path wm2 = wm;
        wm2.y[1] = {5.2, 1.0};
        auto G2 = testgen::doubled(wp, wm2, s, s);
        auto rep2 = detect_events(G2, prm, {false, false});
        CHECK_FALSE(rep2.cluster_edges.empty());
        for (int a : rep2.P.cells[0]) CHECK(std::find(rep2.atypical.begin(), rep2.atypical.end(), a) != rep2.atypical.end());
    }

    SUBCASE("time consistency") {
        Path wp = straight_path({5, 5}, {{1, 0}, {0, 1}}, {0, 0});
        Path wm = straight_path({5, 5}, {{1, 0}, {0, 1}}, {0, 0});
        PhasePoint s{{0, 0}, {1, 0}};
        CHECK(detect_events(testgen::doubled(wp, wm, s, s), prm, {false, false}).time_consistent);
        Path late = straight_path({4, 6}, {{1, 0}, {0, 1}}, {1, 0});
        CHECK_FALSE(detect_events(testgen::doubled(wp, late, s, s), prm, {false, false}).time_consistent);
    }
}

TEST_CASE("skeleton and typical intervals") {
    PathParams prm = PathParams::defaults(1.0, 0.5);
    Path w = straight_path({5, 5, 5, 5, 5}, {{1, 0}, {0, 1}, {1, 0}, {-1, -1}, {0, 1}}, {0, 0});
    w.y[3] = w.y[0];
    auto rep = detect_events(w, prm, {false, false});
    auto sk = build_skeleton(rep);
    int n = rep.K.size();
    for (const auto* f : {&sk.rec, &sk.tube, &sk.cone, &sk.cluster, &sk.atypical})
        CHECK(combinat::is_acyclic(n, *f));
    CHECK(sk.complexity() == int(sk.rec.size() + sk.tube.size() + sk.cone.size() + sk.cluster.size() +
                                 sk.atypical.size()));
    CHECK(sk.rec.size() == 1);
    auto supp = sk.support();
    CHECK(std::find(supp.begin(), supp.end(), 0) != supp.end());
    auto spec = sk.spec();
    CHECK(spec.support() == supp);

    // intervals
    combinat::CollisionSet K = combinat::CollisionSet::single_segment(4, 3);
    EventReport clean;
    clean.K = K;
    for (int a = 0; a < 7; ++a) clean.typical.push_back(a);
    auto I = maximal_typical_intervals(clean);
    REQUIRE(I.size() == 2);
    CHECK(I[0].members == std::vector<int>{0, 1, 2, 3});
    CHECK(I[1].members == std::vector<int>{4, 5, 6});

    EventReport one = clean;
    one.atypical = {2};
    one.typical = {0, 1, 3, 4, 5, 6};
    I = maximal_typical_intervals(one);
    REQUIRE(I.size() == 3);
    CHECK(I[0].lo == -1);
    CHECK(I[0].hi == 2);
    CHECK(I[1].lo == 2);
    CHECK(I[1].hi == -1);

    Rng rng(5);
    std::uniform_int_distribution<int> kd(0, 6);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 100; ++trial) {
        EventReport r;
        r.K = combinat::CollisionSet::single_segment(kd(rng), kd(rng));
        for (int a = 0; a < r.K.size(); ++a) (coin(rng) ? r.atypical : r.typical).push_back(a);
        std::set<int> got;
        bool disjoint = true;
        for (const auto& iv : maximal_typical_intervals(r))
            for (int m : iv.members) disjoint &= got.insert(m).second;
        CHECK(disjoint);
        CHECK(std::vector<int>(got.begin(), got.end()) == r.typical);
    }
}

TEST_CASE("generalized ladder verification") {
    PathParams prm = PathParams::defaults(1.0, 0.5);

    SUBCASE("mirrored pair") {
        Path wp = straight_path({10, 10, 12, 9}, {{1, 0}, {0, 1}, {-0.6, 0.8}, {-1, 0}}, {0, 0});
        Path wm = wp;
        Rng rng(3);
        for (auto& y : wm.y) {
            RVec e = testgen::disk(rng, 0.1 * prm.r);
            y = {y[0] + e[0], y[1] + e[1]};
        }
        PhasePoint s{{0, 0}, {1, 0}};
        auto G = testgen::doubled(wp, wm, s, s);
        auto chk = verify_generalized_ladder(G, prm);
        CHECK(chk.hypotheses_hold);
        CHECK(chk.is_ladder);
    }

    SUBCASE("one-dimensional example") {
        auto G = one_dim_example();
        PathParams p1 = PathParams::defaults(0.25, 0.5);
        auto rep = detect_events(G, p1, {false, false});
        CHECK(rep.recollisions.empty());
        CHECK(rep.immediate.empty());
        CHECK(rep.P == combinat::Partition::from_cells({{0, 4}, {1, 7}, {2, 6}, {3, 5}}));
        CHECK_FALSE(rep.tubes.empty());
        auto chk = verify_generalized_ladder(G, p1);
        CHECK_FALSE(chk.hypotheses_hold);
        CHECK(chk.failed == "incidence");
        // the incidence-mode tube needs an immediate index in between and misses it
        p1.tube_mode = TubeMode::Incidence;
        auto chk2 = verify_generalized_ladder(G, p1);
        CHECK(chk2.hypotheses_hold);
        CHECK_FALSE(chk2.is_ladder);
    }

    SUBCASE("failed hypotheses are named") {
        Path wp = straight_path({10, 10}, {{1, 0}, {0, 1}}, {0, 0});
        Path wm = straight_path({10, 10}, {{1, 0}, {0, -1}}, {0, 0});
        PhasePoint s{{0, 0}, {1, 0}};
        PathParams tight = prm;
        tight.beta = 0.5;  // |sum q| = 2 against a bound of 1
        CHECK(verify_generalized_ladder(testgen::doubled(wp, wm, s, s), tight).failed == "beta_complete");
        PhasePoint far{{30, 0}, {1, 0}};
        CHECK(verify_generalized_ladder(testgen::doubled(wp, wp, s, far), prm).failed == "start_distance");
    }

    SUBCASE("reversed loop leaves its start point with the wrong momentum") {
        // + runs the triangle 0 -> A -> B -> 0, - runs it backwards; exactly beta-complete and
        // incidence-free, and the pairing is crossed
        const double h = std::sqrt(3.0) / 2;
        Path wp = straight_path({100, 100, 100}, {{1, 0}, {-0.5, h}, {-0.5, -h}}, {0, 0});
        Path wm = straight_path({100, 100, 100}, {{0.5, h}, {0.5, -h}, {-1, 0}}, {0, 0});
        PhasePoint s{{0, 0}, {1, 0}};
        auto G = testgen::doubled(wp, wm, s, s);
        PathParams p10 = PathParams::defaults(10.0, 0.5);
        auto rep = detect_events(G, p10, {false, false});
        CHECK(rep.incidence_free());
        CHECK(rep.P == combinat::Partition::from_cells({{0, 3}, {1, 2}}));
        CHECK(beta_complete(collision_points(G), rep.P, p10.beta, p10.r).complete);
        CHECK_FALSE(combinat::is_generalized_ladder(rep.P, rep.K.side(+1), rep.K.side(-1)));
        auto chk = verify_generalized_ladder(G, p10);
        CHECK_FALSE(chk.hypotheses_hold);
        CHECK(chk.failed == "endpoint");
    }

    SUBCASE("campaign") {
        // the beta window only bites once beta / r is small against unit momentum transfers
        auto res = ladder_campaign(PathParams::defaults(10.0, 0.5), 40, 4, 2024);
        CHECK(res.accepted.size() == 40);
        CHECK(res.ladder_verdicts == 40);
        CHECK(res.counterexamples.empty());
        CHECK(res.acceptance_rate > 0.0);
        CHECK(res.acceptance_rate < 1.0);
    }
}

TEST_CASE("constrained path sampler") {
    PathParams prm = PathParams::defaults(1.0, 1.0);
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        int k = trial % 6;
        int d = 1 + trial % 2;
        PhasePoint start{{0, 0}, {0.8, d == 2 ? 0.6 : 0.0}};
        Path w = sample_constrained_path(prm, k, start, 40.0, rng, d);
        CHECK(w.k() == k);
        auto m = check_path_constraints(w, prm, &start);
        CHECK(m.member);
    }
    CHECK_THROWS_AS(sample_constrained_path(prm, 10, {{0, 0}, {1, 0}}, 0.5, rng), Error);
}

TEST_CASE("momentum amplitudes and p-expectations") {
    // Parseval in 1D: int |<p|xi>|^2 dp = 1
    auto env1 = wavepacket::Envelope::make(2.0, 1);
    PhasePoint xi{{1.5, 0}, {0.7, 0}};
    auto q = gauss_legendre(32, -60, 60, 240);
    double tot = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) tot += q.w[i] * std::norm(packet_momentum_amplitude(xi, env1, {q.x[i], 0}));
    CHECK(tot == doctest::Approx(1.0).epsilon(1e-6));

    // against a direct sum over a wavepacket on a fine grid
    Grid fine{1, 1024, 64.0};
    auto psi = wavepacket::make_wavepacket(xi, env1, fine);
    RVec p{1.1, 0};
    cplx direct = 0;
    for (std::size_t k = 0; k < fine.size(); ++k) {
        double x = fine.position(k)[0];
        direct += std::exp(cplx(0, -p[0] * x)) * psi[k] * fine.h();
    }
    direct /= std::sqrt(2 * kPi);
    CHECK(std::abs(direct - packet_momentum_amplitude(xi, env1, p)) < 1e-6);

    // one-dimensional rung: p-expectation vs Monte Carlo over gaussian fields
    Grid g{1, 128, 64.0};
    auto R = potential::CorrelationProfile::wendland(1.0, 1.0);
    auto bump = potential::CutoffBump::make(0.4, 1);
    double dp = g.dp();
    RVec p0{8 * dp, 0}, p1{-6 * dp, 0};
    Path wp = straight_path({3, 4}, {p0, p1}, {0, 0}, 1);
    Path wm = straight_path({3.2, 3.8}, {p0, {-5 * dp, 0}}, {0, 0}, 1);
    wm.y[0][0] = wp.y[0][0] + 0.6;
    PhasePoint s{{0, 0}, p0};
    auto G = testgen::doubled(wp, wm, s, s);
    auto env = wavepacket::Envelope::make(2.0, 1);
    double eps = 0.3;
    auto P = combinat::Partition::from_cells({{0, 1}});
    cplx val = p_expectation(G, P, R, bump, g, env, eps);

    // the same integrand assembled by hand, moment by sampling
    auto ov = [&](const ExtendedPath& E, const Path& w) {
        return std::conj(packet_momentum_amplitude(E.xi[1], env, w.p.back())) *
               packet_momentum_amplitude(E.xi[0], env, w.p.front());
    };
    double dphi = path_phase(wp) - path_phase(wm);
    cplx pref = ov(G.plus, wp) * std::conj(ov(G.minus, wm)) * std::exp(cplx(0, dphi)) * eps * eps;
    potential::PotentialParams pp;
    pp.corr = R;
    const int n = 100000;
    cplx mean = 0;
    double m2r = 0, m2i = 0;
    for (int i = 0; i < n; ++i) {
        auto V = potential::sample_potential(pp, g, derive_seed(99, 1, i));
        cplx a = potential::localized_fourier(V, wp.y[0], {p1[0] - p0[0], 0}, bump).value;
        cplx b = potential::localized_fourier(V, wm.y[0], {wm.p[1][0] - wm.p[0][0], 0}, bump).value;
        cplx x = pref * a * std::conj(b);
        cplx d = x - mean;
        mean += d / double(i + 1);
        m2r += d.real() * (x - mean).real();
        m2i += d.imag() * (x - mean).imag();
    }
    double se_r = std::sqrt(m2r / (n - 1) / n), se_i = std::sqrt(m2i / (n - 1) / n);
    CHECK(std::abs(val.real() - mean.real()) <= 3 * se_r);
    CHECK(std::abs(val.imag() - mean.imag()) <= 3 * se_i);
    CHECK(std::abs(val) > 5 * std::max(se_r, se_i));

    // singleton cells and far-apart cells vanish
    CHECK(p_expectation(G, combinat::Partition::from_cells({{0}, {1}}), R, bump, g, env, eps) == 0.0);
    Path far = wm;
    far.y[0][0] += 20;
    auto Gf = testgen::doubled(wp, far, s, s);
    CHECK(p_expectation(Gf, P, R, bump, g, env, eps) == 0.0);
}

TEST_CASE("path Monte Carlo") {
    auto R = potential::CorrelationProfile::wendland(1.0, 1.0);
    boltzmann::ShellGrid sh{2, {1.0}, 32};
    auto k = boltzmann::CollisionKernel::build(R, 0.4, sh);
    PathParams prm = PathParams::defaults(1.0, 0.5);
    double t = 4.0 / (0.16 * k.K[0][0]);
    auto a = sample_paths_mc(t, k, 0, 400, 8, prm, {false, false});
    auto b = sample_paths_mc(t, k, 0, 400, 8, prm, {false, false});
    auto c = sample_paths_mc(t, k, 0, 400, 9, prm, {false, false});
    CHECK(a.ensemble_hash == b.ensemble_hash);
    CHECK(a.rate_recollision == b.rate_recollision);
    CHECK(a.ensemble_hash != c.ensemble_hash);
    CHECK(a.expected_collisions == doctest::Approx(4.0));
    CHECK(std::abs(a.mean_collisions - a.expected_collisions) <= 3 * a.mean_collisions_stderr);
    CHECK(a.rate_recollision > 0);
    CHECK_THROWS_AS(sample_paths_mc(t, k, 0, 50, 8, prm), Error);
}
