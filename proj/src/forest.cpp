#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "kinlab/combinat.hpp"

namespace kinlab::combinat {

std::vector<Edge> all_edges(int n) {
    std::vector<Edge> e;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) e.emplace_back(u, v);
    return e;
}

int edge_index(int n, int u, int v) {
    if (u > v) std::swap(u, v);
    // rows before u: sum_{i<u} (n-1-i)
    return u * (2 * n - u - 1) / 2 + (v - u - 1);
}

EdgeWeights EdgeWeights::lexicographic(int n) {
    EdgeWeights W;
    W.n = n;
    W.w.assign(std::size_t(n) * n, 0.0);
    for (auto [u, v] : all_edges(n)) {
        double r = edge_index(n, u, v) + 1;
        W.w[std::size_t(u) * n + v] = W.w[std::size_t(v) * n + u] = r;
    }
    return W;
}

EdgeWeights EdgeWeights::signed_rank(const std::vector<int>& sign) {
    int n = int(sign.size());
    EdgeWeights W = lexicographic(n);
    double shift = double(n) * n;
    for (auto [u, v] : all_edges(n)) {
        if (sign[u] == sign[v]) continue;
        W.w[std::size_t(u) * n + v] += shift;
        W.w[std::size_t(v) * n + u] += shift;
    }
    return W;
}

namespace {

struct Dsu {
    std::vector<int> p;
    explicit Dsu(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) {
        while (p[x] != x) x = p[x] = p[p[x]];
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        p[a] = b;
        return true;
    }
};

void check_injective(const EdgeWeights& w) {
    std::vector<double> vals;
    for (auto [u, v] : all_edges(w.n)) vals.push_back(w(u, v));
    std::sort(vals.begin(), vals.end());
    for (std::size_t i = 1; i < vals.size(); ++i)
        require(vals[i] != vals[i - 1], "min_spanning_forest: duplicate edge weights");
}

}  // namespace

ForestResult min_spanning_forest(int n, const std::vector<Edge>& graph, const EdgeWeights& w) {
    require(w.n == n, "min_spanning_forest: weight table size mismatch");
    check_injective(w);
    std::vector<Edge> g;
    for (auto [u, v] : graph) {
        require(u != v && u >= 0 && v >= 0 && u < n && v < n, "min_spanning_forest: bad edge");
        g.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    std::sort(g.begin(), g.end(), [&](Edge a, Edge b) { return w(a.first, a.second) < w(b.first, b.second); });
    ForestResult r;
    Dsu d(n);
    for (auto e : g)
        if (d.unite(e.first, e.second)) r.forest.push_back(e);
    std::sort(r.forest.begin(), r.forest.end());
    std::set<Edge> inF(r.forest.begin(), r.forest.end());
    for (auto e : all_edges(n)) {
        if (d.find(e.first) == d.find(e.second)) r.connected.push_back(e);
        if (inF.count(e)) continue;
        Dsu light(n);
        double we = w(e.first, e.second);
        for (auto f : r.forest)
            if (w(f.first, f.second) < we) light.unite(f.first, f.second);
        if (light.find(e.first) == light.find(e.second)) r.dominated.push_back(e);
    }
    return r;
}

bool is_acyclic(int n, const std::vector<Edge>& edges) {
    Dsu d(n);
    for (auto [u, v] : edges)
        if (!d.unite(u, v)) return false;
    return true;
}

namespace {

std::vector<Edge> edges_of(int n, std::uint32_t mask) {
    auto all = all_edges(n);
    std::vector<Edge> e;
    for (std::size_t i = 0; i < all.size(); ++i)
        if (mask >> i & 1) e.push_back(all[i]);
    return e;
}

std::uint32_t mask_of(int n, const std::vector<Edge>& edges) {
    std::uint32_t m = 0;
    for (auto [u, v] : edges) m |= 1u << edge_index(n, u, v);
    return m;
}

}  // namespace

std::vector<std::uint32_t> enumerate_forests(int n) {
    require(n >= 1 && n <= 7, "enumerate_forests: n out of range");
    int E = n * (n - 1) / 2;
    std::vector<std::uint32_t> out;
    for (std::uint32_t m = 0; m < (1u << E); ++m)
        if (is_acyclic(n, edges_of(n, m))) out.push_back(m);
    return out;
}

ForestIdentityReport verify_forest_identities(int n, int trials, YDistribution dist,
                                              std::uint64_t seed) {
    require(n >= 1 && n <= 5, "verify_forest_identities: n must be in [1,5]");
    ForestIdentityReport rep;
    rep.n = n;
    rep.trials = trials;
    rep.dist = dist;
    const int E = n * (n - 1) / 2;
    const auto all = all_edges(n);
    const EdgeWeights W = EdgeWeights::lexicographic(n);
    const auto forests = enumerate_forests(n);
    rep.forest_count = forests.size();

    struct FData {
        std::uint32_t F, D, C;  // D includes F
    };
    std::vector<FData> fd;
    for (auto m : forests) {
        auto r = min_spanning_forest(n, edges_of(n, m), W);
        require(mask_of(n, r.forest) == m, "forest is not its own minimal forest");
        fd.push_back({m, m | mask_of(n, r.dominated), mask_of(n, r.connected)});
    }

    // (i) indicator decomposition over all graphs
    rep.indicator_ok = true;
    for (std::uint32_t g = 0; g < (1u << E); ++g) {
        auto r = min_spanning_forest(n, edges_of(n, g), W);
        std::uint32_t fg = mask_of(n, r.forest);
        int hits = 0;
        for (const auto& f : fd) hits += (f.F == fg);
        ++rep.graphs_checked;
        if (hits != 1) {
            rep.indicator_ok = false;
            rep.counterexamples.push_back("graph mask " + std::to_string(g) + " hits " +
                                          std::to_string(hits));
        }
    }

    // modified-weight dominated sets for the refinement identity
    double wmax = 0;
    for (auto [u, v] : all) wmax = std::max(wmax, W(u, v));
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> refine(fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
        EdgeWeights Wf = W;
        for (std::size_t e = 0; e < all.size(); ++e) {
            if (fd[i].C >> e & 1) continue;
            auto [u, v] = all[e];
            Wf.w[std::size_t(u) * n + v] += wmax;
            Wf.w[std::size_t(v) * n + u] += wmax;
        }
        for (const auto& g : fd) {
            if ((g.F & fd[i].F) != fd[i].F) continue;
            auto r = min_spanning_forest(n, edges_of(n, g.F), Wf);
            refine[i].push_back({g.F, g.F | mask_of(n, r.dominated)});
        }
    }

    Rng rng(derive_seed(seed, hash_string("forest-identities"), std::uint64_t(n)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> nor(0.0, 1.0);
    std::bernoulli_distribution ber(0.5);
    std::vector<double> Y(E);
    auto prodY = [&](std::uint32_t m) {
        double p = 1;
        for (int e = 0; e < E; ++e)
            if (m >> e & 1) p *= Y[e];
        return p;
    };
    auto prod1mY = [&](std::uint32_t m) {
        double p = 1;
        for (int e = 0; e < E; ++e)
            if (m >> e & 1) p *= 1.0 - Y[e];
        return p;
    };
    const std::uint32_t full = E == 32 ? ~0u : ((1u << E) - 1);
    for (int t = 0; t < trials; ++t) {
        for (auto& y : Y)
            y = dist == YDistribution::Binary ? double(ber(rng))
                : dist == YDistribution::Uniform ? uni(rng) : nor(rng);
        double total = 0;
        for (const auto& f : fd) total += prodY(f.F) * prod1mY(full & ~f.D);
        rep.poly_max_dev = std::max(rep.poly_max_dev, std::abs(total - 1.0));
        for (std::size_t i = 0; i < fd.size(); ++i) {
            const auto& f = fd[i];
            double lhs = prodY(f.F) * prod1mY(full & ~f.D);
            double written = 0, local = 0;
            for (const auto& g : fd) {
                if ((g.F & f.F) != f.F) continue;
                double s = (std::popcount(g.F & ~f.F) % 2) ? -1.0 : 1.0;
                written += s * prodY(g.F) * prod1mY(f.C & ~f.D);
                local += s * prodY(g.F) * prod1mY(g.C & ~g.D);
            }
            double dev_w = std::abs(lhs - written), dev_l = std::abs(lhs - local);
            if (dev_w > 1e-10 && rep.counterexamples.size() < 8)
                rep.counterexamples.push_back("inversion fails for forest mask " +
                                              std::to_string(f.F) + " (dev " +
                                              std::to_string(dev_w) + ")");
            rep.mobius_max_dev = std::max(rep.mobius_max_dev, dev_w);
            rep.mobius_local_max_dev = std::max(rep.mobius_local_max_dev, dev_l);
            double lind = prodY(f.F) * prod1mY(f.C & ~f.D);
            double rs = 0;
            for (auto [gm, gd] : refine[i]) rs += prodY(gm) * prod1mY(full & ~gd);
            rep.refinement_max_dev = std::max(rep.refinement_max_dev, std::abs(lind - rs));
        }
    }
    return rep;
}

std::string ForestIdentityReport::to_json() const {
    nlohmann::json j;
    j["identity"] = "forest-decomposition";
    j["n"] = n;
    j["trials"] = trials;
    j["distribution"] = dist == YDistribution::Binary ? "binary"
                        : dist == YDistribution::Uniform ? "uniform" : "normal";
    j["forest_count"] = forest_count;
    j["graphs_checked"] = graphs_checked;
    j["indicator_ok"] = indicator_ok;
    j["poly_max_dev"] = poly_max_dev;
    j["inversion_max_dev"] = mobius_max_dev;
    j["inversion_local_max_dev"] = mobius_local_max_dev;
    j["refinement_max_dev"] = refinement_max_dev;
    j["counterexamples"] = counterexamples;
    return j.dump(2);
}

}  // namespace kinlab::combinat
