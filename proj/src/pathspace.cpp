#include "kinlab/pathspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "json.hpp"

namespace kinlab::pathspace {

namespace {

const double kPi = std::numbers::pi;
const double kInf = std::numeric_limits<double>::infinity();

RVec add(const RVec& a, const RVec& b) { return {a[0] + b[0], a[1] + b[1]}; }
RVec sub(const RVec& a, const RVec& b) { return {a[0] - b[0], a[1] - b[1]}; }
RVec scale(double s, const RVec& a) { return {s * a[0], s * a[1]}; }
double dot(const RVec& a, const RVec& b) { return a[0] * b[0] + a[1] * b[1]; }
double norm(const RVec& a) { return std::hypot(a[0], a[1]); }
double dist(const RVec& a, const RVec& b) { return norm(sub(a, b)); }

// distance from x to the line base + s dir, s real
double line_distance(const RVec& x, const RVec& base, const RVec& dir) {
    RVec w = sub(x, base);
    double n2 = dot(dir, dir);
    if (n2 == 0.0) return norm(w);
    return norm(sub(w, scale(dot(w, dir) / n2, dir)));
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(std::size_t(n)) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void join(int a, int b) { parent[find(a)] = find(b); }
};

combinat::Partition components(int n, const std::vector<IdPair>& edges) {
    UnionFind uf(n);
    for (auto [a, b] : edges) uf.join(a, b);
    std::vector<int> ids(n), labels(n);
    for (int i = 0; i < n; ++i) {
        ids[i] = i;
        labels[i] = uf.find(i);
    }
    if (n == 0) return combinat::Partition{};
    return combinat::Partition::from_labels(ids, labels);
}

// one side of a doubled path in concatenated form, collision a (1-based) has id offset + a - 1
struct Side {
    int sign = 1;
    int offset = 0;
    ConcatenatedPath c;
    RVec y0{};  // virtual start site Y_1 - S_0 P_0 (start checkpoint when k = 0)

    int k() const { return c.k(); }
    int id(int a) const { return offset + a - 1; }
    const RVec& Y(int a) const { return a == 0 ? y0 : c.Y[a - 1]; }
};

Side make_side(const ExtendedPath& G, int sign, int offset) {
    Side s;
    s.sign = sign;
    s.offset = offset;
    s.c = concatenate(G, 1.0, 1.0);
    if (s.k() > 0)
        s.y0 = sub(s.c.Y[0], scale(s.c.S[0], s.c.P[0]));
    else if (!G.xi.empty())
        s.y0 = G.xi[0].x;
    return s;
}

std::uint64_t mix(std::uint64_t h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return splitmix64(h ^ bits);
}

double envelope_transform(const wavepacket::Envelope& env, double k) {
    // int e^{-i k u} chi(|u|) du over the unit ball
    static const Quadrature q = gauss_legendre(32, 0.0, 1.0, 8);
    double acc = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
        double u = q.x[i];
        if (env.d == 1)
            acc += q.w[i] * 2.0 * std::cos(k * u) * env(u);
        else
            acc += q.w[i] * 2.0 * kPi * std::cyl_bessel_j(0.0, k * u) * env(u) * u;
    }
    return acc;
}

}  // namespace

// ---------------------------------------------------------------- data model

void Path::validate() const {
    require(d == 1 || d == 2, "path: d must be 1 or 2");
    require(s.size() == y.size() + 1 && p.size() == y.size() + 1, "path: need k+1 durations and momenta for k collisions");
    for (double v : s) require(v >= 0 && std::isfinite(v), "path: durations must be nonnegative");
    CompensatedSum<double> tot;
    for (double v : s) tot.add(v);
    require(std::abs(tot.value() - t_total) <= 1e-12 * std::max(1.0, std::abs(t_total)),
            "path: durations do not sum to t_total");
}

double Path::time_of(int j) const {
    require(j >= 1 && j <= k(), "path: collision index out of range");
    double t = 0;
    for (int i = 0; i < j; ++i) t += s[i];
    return t;
}

ExtendedPath ExtendedPath::single(const Path& w, const PhasePoint& start, const PhasePoint& end) {
    ExtendedPath G;
    G.xi = {start, end};
    G.segments = {w};
    G.tau = w.t_total;
    return G;
}

int ExtendedPath::collisions() const {
    int n = 0;
    for (const auto& w : segments) n += w.k();
    return n;
}

void ExtendedPath::validate() const {
    require(!segments.empty(), "extended path: need at least one segment");
    require(xi.size() == 2 * segments.size(), "extended path: need 2N checkpoints");
    for (const auto& w : segments) {
        w.validate();
        require(std::abs(w.t_total - tau) <= 1e-12 * std::max(1.0, tau), "extended path: segment duration differs from tau");
    }
}

combinat::CollisionSet DoubledPath::index_set() const {
    combinat::CollisionSet K;
    for (int l = 0; l < plus.n_segments(); ++l)
        for (int j = 0; j < plus.segments[l].k(); ++j) K.plus_seg.push_back(l);
    for (int l = 0; l < minus.n_segments(); ++l)
        for (int j = 0; j < minus.segments[l].k(); ++j) K.minus_seg.push_back(l);
    return K;
}

PathParams PathParams::defaults(double r, double alpha) {
    PathParams p;
    p.alpha = alpha;
    p.r = r;
    p.sigma = r;
    p.rec_radius = 2 * r;
    p.cross_radius = 2 * r;
    p.same_radius = 4 * r;
    p.tube_radius = 2 * r;
    p.cone_energy_window = alpha / r;
    p.cone_radius = 2 * r;
    p.cone_exclusion = 1.0 / r;
    p.beta = 1.0;
    p.start_distance = 1.0;
    return p;
}

void PathParams::validate() const {
    for (double v : {alpha, r, sigma, rec_radius, cross_radius, same_radius, tube_radius, cone_energy_window,
                     cone_radius, cone_exclusion, cone_radial_step, beta, start_distance, time_tol})
        require(v > 0 && std::isfinite(v), "path params: thresholds must be positive");
    require(cone_angles >= 8, "path params: cone_angles must be >= 8");
    require(cone_radial_max >= 0, "path params: cone_radial_max must be >= 0");
}

// ---------------------------------------------------------------- membership

Membership check_path_constraints(const Path& w, const PathParams& prm, const PhasePoint* xi, const PhasePoint* eta) {
    Membership m;
    auto fail = [&](const std::string& clause, int index, double excess) {
        m.member = false;
        m.violations.push_back({clause, index, excess});
    };
    const int k = w.k();
    if (w.s.size() != std::size_t(k + 1) || w.p.size() != std::size_t(k + 1)) {
        fail("shape", 0, 0);
        return m;
    }
    CompensatedSum<double> tot;
    for (int j = 0; j <= k; ++j) {
        if (w.s[j] < 0) fail("shape", j, -w.s[j]);
        tot.add(w.s[j]);
    }
    double drift = std::abs(tot.value() - w.t_total);
    if (drift > 1e-12 * std::max(1.0, w.t_total)) fail("shape", k + 1, drift);

    const double ar = prm.alpha * prm.r;
    for (int j = 1; j < k; ++j) {
        double e = dist(w.y[j], add(w.y[j - 1], scale(w.s[j], w.p[j])));
        if (e > ar) fail("transport", j, e - ar);
    }
    auto inv = [](double s) { return s > 0 ? 1.0 / s : kInf; };
    for (int j = 0; j <= k; ++j)
        for (int jp = 0; jp <= k; ++jp) {
            if (j == jp) continue;
            double lhs = 0.5 * std::abs(dot(w.p[j], w.p[j]) - dot(w.p[jp], w.p[jp]));
            double rhs = prm.alpha * std::max({inv(w.s[jp]), inv(w.s[j]), norm(w.p[j]) / prm.r,
                                               prm.alpha / (prm.r * prm.r)});
            if (lhs > rhs) fail("kinetic", j * (k + 1) + jp, lhs - rhs);
        }
    const double ap = prm.alpha / prm.r;
    if (xi) {
        double e = norm(sub(w.p[0], xi->p));
        if (e > ap) fail("endpoint", 0, e - ap);
        if (k > 0) {
            double ex = dist(w.y[0], add(xi->x, scale(w.s[0], w.p[0])));
            if (ex > ar) fail("endpoint", 0, ex - ar);
        }
    }
    if (eta) {
        double e = norm(sub(w.p[k], eta->p));
        if (e > ap) fail("endpoint", k, e - ap);
        RVec from = k > 0 ? w.y[k - 1] : (xi ? xi->x : RVec{kInf, kInf});
        if (k > 0 || xi) {
            double ex = dist(eta->x, add(from, scale(w.s[k], w.p[k])));
            if (ex > ar) fail("endpoint", k, ex - ar);
        }
    }
    if (w.s[0] < prm.sigma) fail("boundary", 0, prm.sigma - w.s[0]);
    if (k > 0 && w.s[k] < prm.sigma) fail("boundary", k, prm.sigma - w.s[k]);
    return m;
}

double path_phase(const Path& w) {
    CompensatedSum<double> phi;
    for (std::size_t j = 0; j < w.s.size(); ++j) phi.add(0.5 * w.s[j] * dot(w.p[j], w.p[j]));
    for (int j = 1; j <= w.k(); ++j) phi.add(dot(w.y[j - 1], sub(w.p[j], w.p[j - 1])));
    return phi.value();
}

// ---------------------------------------------------------------- partitions

combinat::Partition collision_partition(const std::vector<RVec>& y, const RadiusPolicy& pol,
                                        const std::vector<int>& signs) {
    const int n = int(y.size());
    if (pol.kind == RadiusPolicy::Signed) require(int(signs.size()) == n, "collision_partition: signed policy needs signs");
    std::vector<IdPair> edges;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            double r = dist(y[a], y[b]);
            bool e = pol.kind == RadiusPolicy::Uniform
                         ? r <= pol.rho
                         : (signs[a] != signs[b] && r <= pol.rho_cross) || r <= pol.rho_same;
            if (e) edges.emplace_back(a, b);
        }
    return components(n, edges);
}

CompletenessReport beta_complete(const std::vector<CollisionPoint>& X, const combinat::Partition& P, double beta,
                                 double r) {
    require(beta > 0 && r > 0, "beta_complete: beta and r must be positive");
    CompletenessReport rep;
    for (const auto& c : P.cells) {
        RVec s{0, 0};
        for (int a : c) {
            require(a >= 0 && a < int(X.size()), "beta_complete: partition id outside the collision set");
            s = add(s, X[a].q);
        }
        CellSlack cs{c, norm(s), beta * double(c.size()) / r};
        if (cs.sum_norm > cs.bound * (1 + 1e-12)) rep.complete = false;
        rep.cells.push_back(cs);
    }
    return rep;
}

// ---------------------------------------------------------------- concatenation

Path ConcatenatedPath::as_path(int d) const {
    Path w;
    w.d = d;
    w.s = S;
    w.p = P;
    w.y = Y;
    CompensatedSum<double> t;
    for (double v : S) t.add(v);
    w.t_total = t.value();
    return w;
}

ConcatenatedPath concatenate(const ExtendedPath& G, double alpha, double r, double C) {
    G.validate();
    ConcatenatedPath c;
    c.S.push_back(0.0);
    c.P.push_back(G.segments[0].p[0]);
    for (int l = 0; l < G.n_segments(); ++l) {
        const Path& w = G.segments[l];
        double t = l * G.tau;
        for (int j = 0; j <= w.k(); ++j) {
            c.S.back() += w.s[j];
            if (j < w.k()) {
                t += w.s[j];
                c.T.push_back(t);
                c.Y.push_back(w.y[j]);
                c.seg.push_back(l);
                c.P.push_back(w.p[j + 1]);
                c.S.push_back(0.0);
            }
        }
    }
    for (int a = 1; a < c.k(); ++a) {
        double S = c.S[a];
        double res = dist(c.Y[a], add(c.Y[a - 1], scale(S, c.P[a])));
        double b = C * alpha * (r + S * S / (G.tau * r) + S * r / G.tau);
        c.residual.push_back(res);
        c.bound.push_back(b);
        if (res > b) c.within = false;
    }
    return c;
}

double straightness_residual(const ConcatenatedPath& c, int a, int b) {
    require(a >= 1 && b >= 1 && a <= c.k() && b <= c.k(), "straightness_residual: index out of range");
    return dist(c.Y[b - 1], add(c.Y[a - 1], scale(c.T[b - 1] - c.T[a - 1], c.P[a])));
}

// ---------------------------------------------------------------- events

std::vector<int> EventReport::immediate_ids() const {
    std::set<int> s;
    for (auto [a, b] : immediate) {
        s.insert(a);
        s.insert(b);
    }
    return {s.begin(), s.end()};
}

bool cone_feasible(const std::vector<RVec>& P, const std::vector<RVec>& Y, int a, int b, int d,
                   const PathParams& prm, double exclusion) {
    require(a >= 1 && b > a && b <= int(Y.size()) && P.size() == Y.size() + 1, "cone_feasible: bad indices");
    const double E0 = 0.5 * dot(P[0], P[0]);
    const double rho0 = norm(P[0]);
    const double w = prm.cone_energy_window;
    const RVec qa = sub(P[a], P[a - 1]), qb = sub(P[b], P[b - 1]);
    const int na = d == 1 ? 2 : prm.cone_angles;
    std::vector<RVec> dirs(na);
    for (int i = 0; i < na; ++i) {
        double th = d == 1 ? kPi * i : 2 * kPi * i / na;
        dirs[i] = {std::cos(th), d == 1 ? 0.0 : std::sin(th)};
    }
    for (int j = -prm.cone_radial_max; j <= prm.cone_radial_max; ++j) {
        double rho = rho0 * (1 + j * prm.cone_radial_step);
        if (rho <= 0 || std::abs(0.5 * rho * rho - E0) > w) continue;
        for (const RVec& u : dirs) {
            RVec v = scale(rho, u);
            RVec vi = sub(v, qa), vo = add(v, qb);
            if (std::abs(0.5 * dot(vi, vi) - E0) > w) continue;
            if (std::abs(0.5 * dot(vo, vo) - E0) > w) continue;
            if (line_distance(Y[b - 1], Y[a - 1], v) > prm.cone_radius) continue;
            if (norm(sub(v, P[a])) < exclusion) continue;
            return true;
        }
    }
    return false;
}

namespace {

void side_events(const Side& s, const PathParams& prm, const DetectOptions& opt, int d, EventReport& rep) {
    const int k = s.k();
    std::vector<bool> imm(k + 1, false);
    for (int a = 1; a < k; ++a)
        if (dist(s.Y(a), s.Y(a + 1)) <= prm.rec_radius) {
            rep.immediate.emplace_back(s.id(a), s.id(a + 1));
            imm[a] = imm[a + 1] = true;
        }
    for (int a = 1; a <= k; ++a)
        for (int b = a + 2; b <= k; ++b)
            if (dist(s.Y(a), s.Y(b)) <= prm.rec_radius) rep.recollisions.emplace_back(s.id(a), s.id(b));

    auto id0 = [&](int a) { return a == 0 ? kStart : s.id(a); };
    auto non_imm_between = [&](int a, int b) {
        for (int c = a + 1; c < b; ++c)
            if (!imm[c]) return true;
        return false;
    };
    auto imm_between = [&](int a, int b) {
        for (int c = a + 1; c < b; ++c)
            if (imm[c]) return true;
        return false;
    };
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b <= k; ++b) {
            bool hit = false;
            if (prm.tube_mode == TubeMode::Segment) {
                if (imm[a] || imm[b]) continue;
                if (a == 0 && !non_imm_between(0, b)) continue;
                const RVec& dir = a == 0 ? s.c.P[0] : s.c.P[a - 1];
                hit = line_distance(s.Y(b), s.Y(a), dir) <= prm.tube_radius;
            } else {
                if (!imm_between(a, b)) continue;
                hit = line_distance(s.Y(b), s.Y(a), s.c.P[a]) <= prm.tube_radius;
            }
            if (hit) rep.tubes.emplace_back(id0(a), s.id(b));
        }

    if (opt.cones)
        for (int a = 1; a < k; ++a)
            for (int b = a + 1; b <= k; ++b)
                if (cone_feasible(s.c.P, s.c.Y, a, b, d, prm, prm.cone_exclusion))
                    rep.cones.emplace_back(s.id(a), s.id(b));

    if (opt.ladder_breaking) {
        const double E0 = 0.5 * dot(s.c.P[0], s.c.P[0]);
        for (int b = 2; b <= k; ++b) {
            if (!non_imm_between(0, b)) continue;
            RVec out = add(s.c.P[0], sub(s.c.P[b], s.c.P[b - 1]));
            if (std::abs(0.5 * dot(out, out) - E0) <= prm.cone_energy_window &&
                line_distance(s.Y(b), s.y0, s.c.P[0]) <= prm.cone_radius)
                rep.ladder_breaking.emplace_back(kStart, s.id(b));
        }
        for (int a = 1; a < k; ++a)
            for (int b = a + 2; b <= k; ++b)
                if (non_imm_between(a, b) && cone_feasible(s.c.P, s.c.Y, a, b, d, prm, 0.0))
                    rep.ladder_breaking.emplace_back(s.id(a), s.id(b));
    }
}

}  // namespace

EventReport detect_events(const DoubledPath& G, const PathParams& prm, const DetectOptions& opt) {
    prm.validate();
    EventReport rep;
    rep.K = G.index_set();
    const int n = rep.K.size();
    const int d = G.plus.segments.at(0).d;
    Side sp = make_side(G.plus, +1, 0);
    Side sm = make_side(G.minus, -1, rep.K.kp());

    std::vector<RVec> Y(n);
    std::vector<double> T(n);
    for (const Side* s : {&sp, &sm})
        for (int a = 1; a <= s->k(); ++a) {
            Y[s->id(a)] = s->Y(a);
            T[s->id(a)] = s->c.T[a - 1];
        }
    rep.P = collision_partition(Y, RadiusPolicy::uniform(prm.rec_radius));

    side_events(sp, prm, opt, d, rep);
    side_events(sm, prm, opt, d, rep);

    // cluster graph: dependency edges with a further neighbour at either end
    std::vector<IdPair> Gedges;
    std::vector<int> deg(n, 0);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (dist(Y[a], Y[b]) <= prm.rec_radius) {
                Gedges.emplace_back(a, b);
                ++deg[a];
                ++deg[b];
            }
    for (auto [a, b] : Gedges)
        if (deg[a] >= 2 || deg[b] >= 2) rep.cluster_edges.emplace_back(a, b);

    std::vector<bool> seed(n, false);
    for (const auto* list : {&rep.recollisions, &rep.tubes, &rep.cones, &rep.cluster_edges})
        for (auto [a, b] : *list) {
            if (a >= 0) seed[a] = true;
            if (b >= 0) seed[b] = true;
        }
    std::vector<bool> bad(n, false);
    for (const auto& c : rep.P.cells) {
        bool any = std::any_of(c.begin(), c.end(), [&](int a) { return seed[a]; });
        if (any)
            for (int a : c) bad[a] = true;
    }
    for (int a = 0; a < n; ++a) (bad[a] ? rep.atypical : rep.typical).push_back(a);

    for (int a = 0; a < n && rep.time_consistent; ++a)
        for (int b = a + 1; b < n; ++b)
            if (dist(Y[a], Y[b]) <= 1e-12 && std::abs(T[a] - T[b]) > prm.time_tol) {
                rep.time_consistent = false;
                break;
            }
    return rep;
}

EventReport detect_events(const Path& w, const PathParams& prm, const DetectOptions& opt) {
    PhasePoint start{{0, 0}, w.p.front()}, end{{0, 0}, w.p.back()};
    DoubledPath G;
    G.plus = ExtendedPath::single(w, start, end);
    Path empty;
    empty.d = w.d;
    empty.s = {w.t_total};
    empty.p = {w.p.front()};
    empty.t_total = w.t_total;
    G.minus = ExtendedPath::single(empty, start, end);
    return detect_events(G, prm, opt);
}

int Skeleton::complexity() const {
    return int(rec.size() + tube.size() + cone.size() + cluster.size() + atypical.size());
}

std::vector<int> Skeleton::support() const {
    std::set<int> s;
    for (const auto* f : {&rec, &tube, &cone, &cluster, &atypical})
        for (auto [a, b] : *f) {
            s.insert(a);
            s.insert(b);
        }
    return {s.begin(), s.end()};
}

combinat::SkeletonSpec Skeleton::spec() const {
    std::vector<std::pair<int, int>> all;
    for (const auto* f : {&rec, &tube, &cone, &cluster, &atypical}) all.insert(all.end(), f->begin(), f->end());
    return combinat::skeleton_from_edges(all);
}

Skeleton build_skeleton(const EventReport& rep) {
    const int n = rep.K.size();
    Skeleton sk;
    if (n < 2) return sk;
    std::vector<int> sign(n);
    for (int a = 0; a < n; ++a) sign[a] = rep.K.sign(a);
    const auto W = combinat::EdgeWeights::signed_rank(sign);
    auto forest = [&](const std::vector<IdPair>& pairs) {
        std::set<combinat::Edge> g;
        for (auto [a, b] : pairs)
            if (a >= 0 && b >= 0 && a != b) g.insert({std::min(a, b), std::max(a, b)});
        if (g.empty()) return std::vector<combinat::Edge>{};
        return combinat::min_spanning_forest(n, {g.begin(), g.end()}, W).forest;
    };
    sk.rec = forest(rep.recollisions);
    sk.tube = forest(rep.tubes);
    sk.cone = forest(rep.cones);
    sk.cluster = forest(rep.cluster_edges);
    // atypical cells joined along their own cells
    std::vector<IdPair> at;
    std::set<int> bad(rep.atypical.begin(), rep.atypical.end());
    for (const auto& c : rep.P.cells)
        if (c.size() > 1 && bad.count(c[0]))
            for (std::size_t i = 1; i < c.size(); ++i) at.emplace_back(c[0], c[i]);
    sk.atypical = forest(at);
    return sk;
}

std::vector<combinat::AbstractInterval> maximal_typical_intervals(const EventReport& rep) {
    std::set<int> bad(rep.atypical.begin(), rep.atypical.end());
    std::vector<combinat::AbstractInterval> out;
    for (int sign : {+1, -1}) {
        combinat::AbstractInterval cur;
        cur.sign = sign;
        for (int id : rep.K.side(sign)) {
            if (bad.count(id)) {
                cur.hi = id;
                out.push_back(cur);
                cur = combinat::AbstractInterval{};
                cur.sign = sign;
                cur.lo = id;
            } else {
                cur.members.push_back(id);
            }
        }
        cur.hi = -1;
        out.push_back(cur);
    }
    return out;
}

// ---------------------------------------------------------------- ladder structure

std::vector<CollisionPoint> collision_points(const DoubledPath& G) {
    std::vector<CollisionPoint> X;
    for (int sign : {+1, -1}) {
        auto c = concatenate(sign > 0 ? G.plus : G.minus, 1.0, 1.0);
        for (int a = 1; a <= c.k(); ++a) {
            RVec q = sub(c.P[a], c.P[a - 1]);
            X.push_back({c.Y[a - 1], sign > 0 ? q : scale(-1.0, q)});
        }
    }
    return X;
}

LadderCheck verify_generalized_ladder(const DoubledPath& G, const PathParams& prm) {
    LadderCheck out;
    auto rep = detect_events(G, prm, {false, false});
    out.P = rep.P;
    auto bc = beta_complete(collision_points(G), rep.P, prm.beta, prm.r);
    if (!bc.complete) {
        out.failed = "beta_complete";
        return out;
    }
    if (wavepacket::phase_distance(G.plus.xi.at(0), G.minus.xi.at(0), prm.r) > prm.start_distance) {
        out.failed = "start_distance";
        return out;
    }
    for (const ExtendedPath* side : {&G.plus, &G.minus})
        for (int l = 0; l < side->n_segments(); ++l) {
            auto m = check_path_constraints(side->segments[l], prm, &side->xi.at(2 * l), &side->xi.at(2 * l + 1));
            for (const auto& v : m.violations)
                if (v.clause == "endpoint") {
                    out.failed = "endpoint";
                    return out;
                }
        }
    if (!rep.incidence_free()) {
        out.failed = "incidence";
        return out;
    }
    if (!rep.P.is_matching()) {
        out.failed = "matching";
        return out;
    }
    out.hypotheses_hold = true;
    out.is_ladder = combinat::is_generalized_ladder(rep.P, rep.K.side(+1), rep.K.side(-1));
    return out;
}

Path sample_constrained_path(const PathParams& prm, int k, const PhasePoint& start, double t_total, Rng& rng,
                             int d) {
    require(k >= 0, "sample_constrained_path: k must be nonnegative");
    const double speed = norm(start.p);
    require(speed > 0, "sample_constrained_path: start momentum must be nonzero");
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto rotate = [](const RVec& v, double th) {
        return RVec{std::cos(th) * v[0] - std::sin(th) * v[1], std::sin(th) * v[0] + std::cos(th) * v[1]};
    };
    require(d == 1 || d == 2, "sample_constrained_path: d must be 1 or 2");
    // flight plan: regular flights (weights) and immediate hops (fixed short durations)
    std::vector<double> weight(k + 1, 0.0), hop(k + 1, 0.0);
    std::vector<RVec> p(k + 1);
    p[0] = start.p;
    for (int j = 1; j <= k; ++j) {
        bool imm = j + 1 <= k && U(rng) < 0.3 && !(hop[j - 1] > 0);
        if (hop[j - 1] > 0) {
            // leave the hop with the momentum held before it, up to a small turn
            double th = d == 1 ? 0.0 : 0.1 * prm.alpha * (2 * U(rng) - 1);
            p[j] = rotate(p[j - 2], th);
            if (d == 1) p[j] = p[j - 2];
            weight[j] = 1 + U(rng);
        } else if (imm) {
            double th = d == 1 ? kPi : 2 * kPi * U(rng);
            p[j] = rotate(p[j - 1], th);
            if (d == 1) p[j] = scale(-1.0, p[j - 1]);
            hop[j] = (0.2 + 0.8 * U(rng)) * prm.r / speed;
        } else {
            double th = d == 1 ? (U(rng) < 0.5 ? kPi : 0.0) : kPi * (0.25 + 0.5 * U(rng)) * (U(rng) < 0.5 ? -1 : 1);
            p[j] = rotate(p[j - 1], th);
            weight[j] = 1 + U(rng);
        }
    }
    weight[0] = 1 + U(rng);
    double hops = std::accumulate(hop.begin(), hop.end(), 0.0);
    double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);
    require(t_total > hops, "sample_constrained_path: t_total too short");
    Path w;
    w.d = d;
    w.p = p;
    w.s.resize(k + 1);
    for (int j = 0; j <= k; ++j) w.s[j] = hop[j] > 0 ? hop[j] : (t_total - hops) * weight[j] / wsum;
    require(w.s[0] >= prm.sigma && w.s[k] >= prm.sigma, "sample_constrained_path: t_total too short for sigma");
    // absorb rounding into the last flight
    CompensatedSum<double> acc;
    for (int j = 0; j < k; ++j) acc.add(w.s[j]);
    w.s[k] = t_total - acc.value();
    w.t_total = t_total;
    RVec x = start.x;
    for (int j = 0; j < k; ++j) {
        double rad = 0.9 * prm.alpha * prm.r * std::sqrt(U(rng)), th = 2 * kPi * U(rng);
        RVec e = d == 1 ? RVec{rad * (U(rng) < 0.5 ? -1 : 1), 0.0} : RVec{rad * std::cos(th), rad * std::sin(th)};
        x = add(add(x, scale(w.s[j], w.p[j])), e);
        w.y.push_back(x);
    }
    return w;
}

namespace {

// regular flight plan on the unit shell with optional immediate hops mid-flight
struct Plan {
    std::vector<RVec> dirs;      // direction of each regular leg
    std::vector<double> len;     // duration of each regular leg
    std::vector<int> hop_after;  // leg index after which an immediate pair is inserted (-1: none)
};

Path realize(const PhasePoint& start, const std::vector<RVec>& dirs, const std::vector<double>& len,
             const std::vector<std::pair<int, RVec>>& hops, double hop_len, double jitter, Rng& rng) {
    // legs visited in order; each hop splits its leg halfway with an immediate pair
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Path w;
    w.d = 2;
    RVec x = start.x;
    auto jit = [&]() {
        double rad = jitter * std::sqrt(U(rng)), th = 2 * kPi * U(rng);
        return RVec{rad * std::cos(th), rad * std::sin(th)};
    };
    for (std::size_t l = 0; l < dirs.size(); ++l) {
        const RVec& v = dirs[l];
        auto it = std::find_if(hops.begin(), hops.end(), [&](const auto& h) { return h.first == int(l); });
        if (it != hops.end()) {
            double half = 0.5 * len[l];
            w.s.push_back(half);
            w.p.push_back(v);
            x = add(x, scale(half, v));
            w.y.push_back(x);
            w.s.push_back(hop_len);
            w.p.push_back(it->second);
            x = add(x, scale(hop_len, it->second));
            w.y.push_back(x);
            w.s.push_back(len[l] - half);
            w.p.push_back(v);
            x = add(x, scale(len[l] - half, v));
        } else {
            w.s.push_back(len[l]);
            w.p.push_back(v);
            x = add(x, scale(len[l], v));
        }
        if (l + 1 < dirs.size()) w.y.push_back(add(x, jit()));
    }
    CompensatedSum<double> t;
    for (double s : w.s) t.add(s);
    w.t_total = t.value();
    return w;
}

}  // namespace

CampaignResult ladder_campaign(const PathParams& prm, int n_target, int k_max, std::uint64_t seed, long max_attempts) {
    prm.validate();
    require(n_target >= 1 && k_max >= 1, "ladder_campaign: need n_target >= 1 and k_max >= 1");
    CampaignResult res;
    res.proposals_by_kind.assign(4, 0);
    res.accepted_by_kind.assign(4, 0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double r = prm.r;
    for (long att = 0; att < max_attempts && int(res.accepted.size()) < n_target; ++att) {
        Rng rng = make_rng(seed, hash_string("ladder-campaign"), std::uint64_t(att));
        ++res.attempts;
        int kind = int(4 * U(rng));
        ++res.proposals_by_kind[kind];

        // + side: regular legs with large turns, at most k_max collisions in total
        int kp = 1 + int(k_max * U(rng));
        int n_imm = (kp >= 3 && U(rng) < 0.5) ? 1 : 0;
        int n_reg = kp - 2 * n_imm;
        std::vector<RVec> dirs(n_reg + 1);
        std::vector<double> len(n_reg + 1);
        double th = 2 * kPi * U(rng);
        for (int l = 0; l <= n_reg; ++l) {
            if (l > 0) th += kPi * (0.25 + 0.5 * U(rng)) * (U(rng) < 0.5 ? -1 : 1);
            dirs[l] = {std::cos(th), std::sin(th)};
            len[l] = (8 + 8 * U(rng)) * r;
        }
        std::vector<std::pair<int, RVec>> hops_p;
        if (n_imm) {
            double ph = 2 * kPi * U(rng);
            hops_p.push_back({int(U(rng) * (n_reg + 1)), RVec{std::cos(ph), std::sin(ph)}});
        }
        PhasePoint start{{0, 0}, dirs[0]};
        Path wp = realize(start, dirs, len, hops_p, 0.5 * r, 0.0, rng);

        Path wm;
        if (kind == 0) {
            wm = realize(start, dirs, len, {}, 0.5 * r, 0.1 * r, rng);
        } else if (kind == 1) {
            double ph = 2 * kPi * U(rng);
            wm = realize(start, dirs, len, {{int(U(rng) * (n_reg + 1)), RVec{std::cos(ph), std::sin(ph)}}}, 0.5 * r,
                         0.1 * r, rng);
        } else if (kind == 2 && n_reg >= 2) {
            // visit two consecutive regular sites in swapped order with straight legs
            std::vector<RVec> sites;
            RVec x = start.x;
            for (int l = 0; l < n_reg; ++l) {
                x = add(x, scale(len[l], dirs[l]));
                sites.push_back(x);
            }
            RVec end = add(x, scale(len[n_reg], dirs[n_reg]));
            int i = int(U(rng) * (n_reg - 1));
            std::swap(sites[i], sites[i + 1]);
            std::vector<RVec> d2;
            std::vector<double> l2;
            RVec from = start.x;
            sites.push_back(end);
            for (const RVec& s : sites) {
                RVec dv = sub(s, from);
                double L = norm(dv);
                d2.push_back(scale(1.0 / L, dv));
                l2.push_back(L);
                from = s;
            }
            wm = realize(start, d2, l2, {}, 0.5 * r, 0.1 * r, rng);
        } else {
            int km = 1 + int(k_max * U(rng));
            std::vector<RVec> d2(km + 1);
            std::vector<double> l2(km + 1);
            double t2 = std::atan2(dirs[0][1], dirs[0][0]);
            for (int l = 0; l <= km; ++l) {
                if (l > 0) t2 += kPi * (0.25 + 0.5 * U(rng)) * (U(rng) < 0.5 ? -1 : 1);
                d2[l] = {std::cos(t2), std::sin(t2)};
                l2[l] = (8 + 8 * U(rng)) * r;
            }
            wm = realize(start, d2, l2, {}, 0.5 * r, 0.0, rng);
        }
        if (wp.k() > k_max || wm.k() > k_max) continue;
        auto endpoint = [](const Path& w, const PhasePoint& s) {
            RVec x = w.k() > 0 ? w.y.back() : s.x;
            return PhasePoint{add(x, scale(w.s.back(), w.p.back())), w.p.back()};
        };
        DoubledPath G;
        G.plus = ExtendedPath::single(wp, start, endpoint(wp, start));
        G.minus = ExtendedPath::single(wm, start, endpoint(wm, start));
        if (!check_path_constraints(wp, prm, &G.plus.xi[0], &G.plus.xi[1]).member ||
            !check_path_constraints(wm, prm, &G.minus.xi[0], &G.minus.xi[1]).member)
            continue;
        auto chk = verify_generalized_ladder(G, prm);
        if (!chk.hypotheses_hold) continue;
        ++res.accepted_by_kind[kind];
        if (chk.is_ladder)
            ++res.ladder_verdicts;
        else
            res.counterexamples.push_back(G);
        res.accepted.push_back(G);
        res.checks.push_back(chk);
    }
    res.acceptance_rate = res.attempts ? double(res.accepted.size()) / double(res.attempts) : 0.0;
    return res;
}

// ---------------------------------------------------------------- expectations

cplx packet_momentum_amplitude(const PhasePoint& xi, const wavepacket::Envelope& env, const RVec& p) {
    const int d = env.d;
    RVec dp = sub(p, xi.p);
    double k = d == 1 ? std::abs(dp[0]) : norm(dp);
    double ph = -dot(dp, xi.x);
    double amp = std::pow(2 * kPi, -0.5 * d) * std::pow(env.r, 0.5 * d) * envelope_transform(env, env.r * k);
    return amp * cplx(std::cos(ph), std::sin(ph));
}

cplx p_expectation(const DoubledPath& G, const combinat::Partition& P, const potential::CorrelationProfile& R,
                   const potential::CutoffBump& bump, const Grid& g, const wavepacket::Envelope& env, double eps,
                   cplx a_value) {
    require(G.plus.n_segments() == 1 && G.minus.n_segments() == 1, "p_expectation: single-segment paths only");
    const Path& wp = G.plus.segments[0];
    const Path& wm = G.minus.segments[0];
    auto overlaps = [&](const ExtendedPath& E, const Path& w) {
        return std::conj(packet_momentum_amplitude(E.xi[1], env, w.p.back())) *
               packet_momentum_amplitude(E.xi[0], env, w.p.front());
    };
    auto X = collision_points(G);
    std::vector<potential::WindowPoint> W;
    for (const auto& c : X) W.push_back({c.y, c.q});
    cplx moment = W.empty() ? cplx(1.0) : potential::partition_moment(P, W, R, bump, g);
    double dphi = path_phase(wp) - path_phase(wm);
    return overlaps(G.plus, wp) * std::conj(overlaps(G.minus, wm)) * cplx(std::cos(dphi), std::sin(dphi)) *
           std::pow(eps, wp.k() + wm.k()) * a_value * moment;
}

// ---------------------------------------------------------------- Monte Carlo

double PathStats::rate_stderr(double rate) const {
    return n_paths > 1 ? std::sqrt(std::max(rate * (1 - rate), 0.0) / n_paths) : 0.0;
}

PathStats sample_paths_mc(double t, const boltzmann::CollisionKernel& kernel, std::size_t shell, int n,
                          std::uint64_t seed, const PathParams& prm, const PathMcOptions& opt) {
    require(n >= 100, "sample_paths_mc: need at least 100 paths");
    require(t > 0, "sample_paths_mc: t must be positive");
    require(shell < kernel.shells.radii.size(), "sample_paths_mc: shell out of range");
    const auto& sh = kernel.shells;
    const int M = sh.nodes();
    const double e2 = kernel.eps * kernel.eps;
    std::vector<std::discrete_distribution<int>> jump(M);
    for (int j = 0; j < M; ++j) {
        std::vector<double> row(M);
        for (int k = 0; k < M; ++k) row[k] = kernel.gain[shell](j, k);
        jump[j] = std::discrete_distribution<int>(row.begin(), row.end());
    }
    PathStats st;
    st.eps = kernel.eps;
    st.t = t;
    st.n_paths = n;
    st.expected_collisions = e2 * kernel.K[shell][0] * t;
    std::uint64_t h = splitmix64(seed);
    double sum = 0, sum2 = 0;
    int n_rec = 0, n_tube = 0, n_cone = 0;
    for (int i = 0; i < n; ++i) {
        Rng rng = make_rng(seed, hash_string("path-mc"), std::uint64_t(i));
        int j = 0;
        double time = 0;
        RVec x{0, 0};
        Path w;
        w.d = sh.d;
        w.p.push_back(sh.momentum(shell, j));
        while (true) {
            double rate = e2 * kernel.K[shell][j];
            double wait = rate > 0 ? std::exponential_distribution<double>(rate)(rng) : kInf;
            if (time + wait >= t) {
                w.s.push_back(t - time);
                break;
            }
            w.s.push_back(wait);
            x = add(x, scale(wait, w.p.back()));
            w.y.push_back(x);
            j = jump[j](rng);
            w.p.push_back(sh.momentum(shell, j));
            time += wait;
        }
        w.t_total = t;
        double k = w.k();
        sum += k;
        sum2 += k * k;
        for (double v : w.s) h = mix(h, v);
        for (const auto& y : w.y) h = mix(mix(h, y[0]), y[1]);
        auto rep = detect_events(w, prm, {opt.cones, false});
        n_rec += !rep.recollisions.empty();
        n_tube += !rep.tubes.empty();
        n_cone += !rep.cones.empty();
        if (opt.keep_paths) st.paths.push_back(std::move(w));
    }
    st.mean_collisions = sum / n;
    st.mean_collisions_stderr = std::sqrt(std::max(0.0, (sum2 / n - st.mean_collisions * st.mean_collisions)) / (n - 1));
    st.rate_recollision = double(n_rec) / n;
    st.rate_tube = double(n_tube) / n;
    st.rate_cone = double(n_cone) / n;
    st.ensemble_hash = h;
    return st;
}

std::string path_to_json(const Path& w) {
    nlohmann::json j;
    j["d"] = w.d;
    j["t_total"] = w.t_total;
    j["s"] = w.s;
    auto vecs = [](const std::vector<RVec>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& x : v) a.push_back({x[0], x[1]});
        return a;
    };
    j["p"] = vecs(w.p);
    j["y"] = vecs(w.y);
    return j.dump();
}

Path path_from_json(const std::string& s) {
    auto j = nlohmann::json::parse(s);
    Path w;
    w.d = j.at("d").get<int>();
    w.t_total = j.at("t_total").get<double>();
    w.s = j.at("s").get<std::vector<double>>();
    for (const auto& x : j.at("p")) w.p.push_back({x.at(0).get<double>(), x.at(1).get<double>()});
    for (const auto& x : j.at("y")) w.y.push_back({x.at(0).get<double>(), x.at(1).get<double>()});
    w.validate();
    return w;
}

}  // namespace kinlab::pathspace
