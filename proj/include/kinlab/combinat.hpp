#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kinlab/common.hpp"

namespace kinlab::combinat {

using Cell = std::vector<int>;

// Set partition of integer ids. Canonical form: each cell sorted, cells sorted
// by their minimum element.
struct Partition {
    std::vector<Cell> cells;

    static Partition from_cells(std::vector<Cell> cells);
    static Partition from_labels(const std::vector<int>& ids, const std::vector<int>& labels);
    std::vector<int> ground() const;
    bool has_singleton() const;
    bool is_matching() const;
    // cell containing id, or -1
    int cell_of(int id) const;
    // restriction to a subset of ids (cells intersected, empties dropped)
    Partition restrict_to(const std::vector<int>& ids) const;
    // every cell meeting ids lies inside ids
    bool saturates(const std::vector<int>& ids) const;
    std::string str() const;

    bool operator==(const Partition& o) const { return cells == o.cells; }
    bool operator<(const Partition& o) const { return cells < o.cells; }
};

// Calls f for every set partition of {0..n-1} given as a restricted growth string.
void for_each_set_partition(int n, const std::function<void(const std::vector<int>&)>& f);
std::uint64_t bell_number(int n);

// Doubled collision index set: + side ids 0..kp-1, - side ids kp..kp+km-1,
// each side ordered lexicographically by (segment, position).
struct CollisionSet {
    std::vector<int> plus_seg;
    std::vector<int> minus_seg;

    static CollisionSet single_segment(int kp, int km);
    int kp() const { return int(plus_seg.size()); }
    int km() const { return int(minus_seg.size()); }
    int size() const { return kp() + km(); }
    int id(int sign, int pos) const { return sign > 0 ? pos : kp() + pos; }
    int sign(int id) const { return id < kp() ? +1 : -1; }
    int pos(int id) const { return id < kp() ? id : id - kp(); }
    int seg(int id) const { return id < kp() ? plus_seg[id] : minus_seg[id - kp()]; }
    std::vector<int> side(int sign) const;
    std::string label(int id) const;
};

enum class Orientation { Ladder, AntiLadder };

// {a, phi(a)} with phi the order preserving (ladder) or reversing bijection.
Partition ladder_partition(const std::vector<int>& A, const std::vector<int>& B, Orientation o);

struct LadderVerdict {
    bool ok = false;
    std::vector<int> I_A, I_B;  // immediate-pair witness sets
    std::string clause;         // violated clause when !ok
};

// Renormalized (anti)ladder test on A u B (both ordered). The witness sets are
// the supports of the same-side pairs.
LadderVerdict is_renormalized_ladder(const Partition& P, const std::vector<int>& A,
                                     const std::vector<int>& B, Orientation o);

// Generalized ladder test by the existential form: search over sets of first
// elements j with {j, j+1} a cell, remove both elements, and test the rest for
// a ladder. Exponential in |A|+|B|; intended for small sets.
bool is_generalized_ladder(const Partition& P, const std::vector<int>& A,
                           const std::vector<int>& B, Orientation o = Orientation::Ladder);

// Simple partition: perfect matching of successive pairs of the ordered set A.
bool is_simple_partition(const Partition& P, const std::vector<int>& A);

// All generalized ladders on [k+] u [k-] with ids 0..kp-1 then kp..kp+km-1.
std::vector<Partition> enumerate_generalized_ladders(int kp, int km);

// ---- colorings ----

struct Color {
    enum Kind : int { Imrec = 0, Ext = 1 };
    int kind = Imrec;
    int label = 0;  // palette label; 0 for the plain ext palette
    int n = 0;      // rung number or cell index
    bool operator==(const Color& o) const { return kind == o.kind && label == o.label && n == o.n; }
    bool operator<(const Color& o) const {
        if (kind != o.kind) return kind < o.kind;
        if (label != o.label) return label < o.label;
        return n < o.n;
    }
    static Color imrec() { return {Imrec, 0, 0}; }
    static Color ext(int label, int n) { return {Ext, label, n}; }
};

// Label reserved for colors naming a fixed skeleton cell (n = cell index).
constexpr int kCellLabel = -1;
// Label for rungs of an interval pair (plus interval i, minus interval j).
inline int pair_label(int i, int j) { return 1 + 64 * i + j; }

// A coloring of one side: ids in increasing order with their segments.
struct Coloring {
    std::vector<int> ids;
    std::vector<int> seg;
    std::vector<Color> c;

    // first elements of the imrec pairs; throws when invalid
    std::vector<int> imm_firsts() const;
    bool valid() const;
    bool operator==(const Coloring& o) const { return ids == o.ids && c == o.c; }
    bool operator<(const Coloring& o) const {
        if (ids != o.ids) return ids < o.ids;
        return c < o.c;
    }
};

// Canonical coloring of a renormalized (anti)ladder: rungs numbered by the
// order of their A element, immediate pairs imrec. Returns (psi|A, psi|B).
std::pair<Coloring, Coloring> canonical_coloring(const Partition& P, const std::vector<int>& A,
                                                 const std::vector<int>& B,
                                                 const std::vector<int>& segA,
                                                 const std::vector<int>& segB, Orientation o,
                                                 int label = 0);

struct ColoredPartition {
    Partition P;
    bool has_singleton = false;
};

ColoredPartition coloring_to_partition(const Coloring& plus, const Coloring& minus);

// Skeleton data as seen by the coloring machine: the fixed cells P_F over the
// ids of a collision set. supp F is the union of the cells.
struct SkeletonSpec {
    std::vector<Cell> cells;
    std::vector<int> support() const;
};

// Builds P_F from forest edges (pairs of ids): connected components of the
// union of all forests.
SkeletonSpec skeleton_from_edges(const std::vector<std::pair<int, int>>& edges);

struct AbstractInterval {
    int sign = 1;
    int lo = -1;  // id of the left endpoint or -1 for 0
    int hi = -1;  // id of the right endpoint or -1 for infinity
    std::vector<int> members;  // realization I_K (ids, increasing)
};

std::vector<AbstractInterval> abstract_intervals(const SkeletonSpec& F, const CollisionSet& K,
                                                 int sign);

enum class PairPolicy {
    LadderOnly,          // interval pairs saturate as ladders only
    LadderOrAntiLadder,  // either orientation
};

// All partitions of K in the canonical collection of the skeleton (brute-force
// filter over set partitions). |K| <= 12.
std::vector<Partition> canonical_partitions(const SkeletonSpec& F, const CollisionSet& K,
                                            PairPolicy policy = PairPolicy::LadderOrAntiLadder);
bool in_canonical_collection(const Partition& P, const SkeletonSpec& F, const CollisionSet& K,
                             PairPolicy policy);

// All colorings of the given side. On the - side each matched interval pair
// carries an orientation; with LadderOnly the orientation is fixed to +.
// |K+|+|K-| <= 10.
std::vector<Coloring> enumerate_coloring_sets(const SkeletonSpec& F, const CollisionSet& K,
                                              int sign,
                                              PairPolicy policy = PairPolicy::LadderOrAntiLadder);

// Q(Psi+, Psi-): partitions from all pairs, singleton-free, deduplicated.
std::vector<Partition> partitions_from_colorings(const std::vector<Coloring>& plus,
                                                 const std::vector<Coloring>& minus);

// ---- graphs and forests ----

using Edge = std::pair<int, int>;  // u < v

// Complete edge list of K_n in lexicographic order.
std::vector<Edge> all_edges(int n);
int edge_index(int n, int u, int v);

// Weights on every pair of vertices (n x n, symmetric). Must be injective.
struct EdgeWeights {
    int n = 0;
    std::vector<double> w;  // row-major n*n
    double operator()(int u, int v) const { return w[std::size_t(u) * n + v]; }
    static EdgeWeights lexicographic(int n);
    // lexicographic rank, with edges joining different signs ranked above
    // all same-sign edges
    static EdgeWeights signed_rank(const std::vector<int>& sign);
};

struct ForestResult {
    std::vector<Edge> forest;     // F
    std::vector<Edge> dominated;  // edges outside F joined by a strictly lighter F-path
    std::vector<Edge> connected;  // C(F): all edges inside components of F (F included)
};

// Kruskal on graph edges; D and C are taken over all vertex pairs.
ForestResult min_spanning_forest(int n, const std::vector<Edge>& graph, const EdgeWeights& w);

bool is_acyclic(int n, const std::vector<Edge>& edges);

// bitmask over all_edges(n)
std::vector<std::uint32_t> enumerate_forests(int n);

enum class YDistribution { Binary, Uniform, Normal };

struct ForestIdentityReport {
    int n = 0;
    int trials = 0;
    YDistribution dist = YDistribution::Normal;
    std::size_t forest_count = 0;
    std::size_t graphs_checked = 0;
    bool indicator_ok = false;        // sum_F 1(F_G = F) = 1 for all graphs
    double poly_max_dev = 0;          // |sum_F prod Y prod (1-Y) - 1|
    double mobius_max_dev = 0;        // per-forest inversion as written
    double mobius_local_max_dev = 0;  // variant with C(F')\D(F') in each term
    double refinement_max_dev = 0;    // local indicator = sum of modified-weight forest indicators
    std::vector<std::string> counterexamples;
    std::string to_json() const;
};

ForestIdentityReport verify_forest_identities(int n, int trials, YDistribution dist,
                                              std::uint64_t seed);

}  // namespace kinlab::combinat
