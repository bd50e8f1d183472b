#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "kinlab/combinat.hpp"

namespace kinlab::combinat {

std::vector<int> Coloring::imm_firsts() const {
    require(ids.size() == c.size() && seg.size() == c.size(), "coloring: size mismatch");
    std::vector<int> firsts;
    std::size_t i = 0;
    while (i < c.size()) {
        if (c[i].kind != Color::Imrec) {
            ++i;
            continue;
        }
        require(i + 1 < c.size() && c[i + 1].kind == Color::Imrec,
                "invalid coloring: imrec run of odd length");
        require(seg[i] == seg[i + 1], "invalid coloring: imrec pair crosses a segment boundary");
        firsts.push_back(ids[i]);
        i += 2;
    }
    return firsts;
}

bool Coloring::valid() const {
    try {
        imm_firsts();
        return true;
    } catch (const Error&) {
        return false;
    }
}

std::pair<Coloring, Coloring> canonical_coloring(const Partition& P, const std::vector<int>& A,
                                                 const std::vector<int>& B,
                                                 const std::vector<int>& segA,
                                                 const std::vector<int>& segB, Orientation o,
                                                 int label) {
    LadderVerdict v = is_renormalized_ladder(P, A, B, o);
    require(v.ok, "canonical_coloring: not a renormalized ladder (" + v.clause + ")");
    std::map<int, int> rung_of;  // A element -> B element
    for (const auto& cell : P.cells) {
        bool a0 = std::find(A.begin(), A.end(), cell[0]) != A.end();
        bool a1 = std::find(A.begin(), A.end(), cell[1]) != A.end();
        if (a0 != a1) rung_of[a0 ? cell[0] : cell[1]] = a0 ? cell[1] : cell[0];
    }
    std::map<int, Color> col;
    for (int x : v.I_A) col[x] = Color::imrec();
    for (int x : v.I_B) col[x] = Color::imrec();
    int number = 0;
    for (int a : A) {
        auto it = rung_of.find(a);
        if (it == rung_of.end()) continue;
        ++number;
        col[a] = Color::ext(label, number);
        col[it->second] = Color::ext(label, number);
    }
    auto build = [&](const std::vector<int>& S, const std::vector<int>& segs) {
        Coloring c;
        c.ids = S;
        c.seg = segs.empty() ? std::vector<int>(S.size(), 1) : segs;
        require(c.seg.size() == S.size(), "canonical_coloring: segment list size mismatch");
        for (int x : S) c.c.push_back(col.at(x));
        return c;
    };
    return {build(A, segA), build(B, segB)};
}

ColoredPartition coloring_to_partition(const Coloring& plus, const Coloring& minus) {
    std::vector<int> ids = plus.ids;
    ids.insert(ids.end(), minus.ids.begin(), minus.ids.end());
    std::vector<int> parent(ids.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
    std::map<Color, int> first;
    std::map<int, int> slot;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        require(!slot.count(ids[i]), "coloring_to_partition: overlapping ground sets");
        slot[ids[i]] = int(i);
    }
    auto scan = [&](const Coloring& c, std::size_t offset) {
        for (int f : c.imm_firsts()) {
            auto it = std::find(c.ids.begin(), c.ids.end(), f);
            int k = int(it - c.ids.begin());
            unite(int(offset) + k, int(offset) + k + 1);
        }
        for (std::size_t i = 0; i < c.c.size(); ++i) {
            if (c.c[i].kind != Color::Ext) continue;
            auto [it, ins] = first.emplace(c.c[i], int(offset + i));
            if (!ins) unite(int(offset + i), it->second);
        }
    };
    scan(plus, 0);
    scan(minus, plus.ids.size());
    std::vector<int> labels(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) labels[i] = find(int(i));
    ColoredPartition out;
    out.P = Partition::from_labels(ids, labels);
    out.has_singleton = out.P.has_singleton();
    return out;
}

std::vector<int> SkeletonSpec::support() const {
    std::vector<int> s;
    for (const auto& c : cells) s.insert(s.end(), c.begin(), c.end());
    std::sort(s.begin(), s.end());
    return s;
}

SkeletonSpec skeleton_from_edges(const std::vector<std::pair<int, int>>& edges) {
    std::map<int, int> parent;
    std::function<int(int)> find = [&](int x) {
        if (!parent.count(x)) parent[x] = x;
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto [a, b] : edges) parent[find(a)] = find(b);
    std::map<int, Cell> comps;
    for (auto& [x, p] : parent) comps[find(x)].push_back(x);
    SkeletonSpec F;
    for (auto& [r, c] : comps) F.cells.push_back(c);
    F.cells = Partition::from_cells(F.cells).cells;
    return F;
}

std::vector<AbstractInterval> abstract_intervals(const SkeletonSpec& F, const CollisionSet& K,
                                                 int sign) {
    std::vector<int> supp = F.support();
    for (int x : supp) require(x >= 0 && x < K.size(), "skeleton support outside collision set");
    std::vector<int> side = K.side(sign);
    std::vector<AbstractInterval> out;
    AbstractInterval cur;
    cur.sign = sign;
    for (int x : side) {
        if (std::binary_search(supp.begin(), supp.end(), x)) {
            cur.hi = x;
            out.push_back(cur);
            cur = AbstractInterval{};
            cur.sign = sign;
            cur.lo = x;
        } else {
            cur.members.push_back(x);
        }
    }
    cur.hi = -1;
    out.push_back(cur);
    return out;
}

namespace {

bool fixed_cells_present(const Partition& P, const SkeletonSpec& F) {
    for (auto c : F.cells) {
        std::sort(c.begin(), c.end());
        if (std::find(P.cells.begin(), P.cells.end(), c) == P.cells.end()) return false;
    }
    return true;
}

bool pair_saturated_ladder(const Partition& P, const AbstractInterval& I, const AbstractInterval& J,
                           PairPolicy policy) {
    std::vector<int> U = I.members;
    U.insert(U.end(), J.members.begin(), J.members.end());
    if (!P.saturates(U)) return false;
    Partition R = P.restrict_to(U);
    const auto& A = I.sign > 0 ? I.members : J.members;
    const auto& B = I.sign > 0 ? J.members : I.members;
    if (is_generalized_ladder(R, A, B, Orientation::Ladder)) return true;
    return policy == PairPolicy::LadderOrAntiLadder &&
           is_generalized_ladder(R, A, B, Orientation::AntiLadder);
}

}  // namespace

bool in_canonical_collection(const Partition& P, const SkeletonSpec& F, const CollisionSet& K,
                             PairPolicy policy) {
    std::vector<int> all(K.size());
    std::iota(all.begin(), all.end(), 0);
    if (P.ground() != all) return false;
    if (!fixed_cells_present(P, F)) return false;
    auto Ip = abstract_intervals(F, K, +1);
    auto Im = abstract_intervals(F, K, -1);
    auto interval_ok = [&](const AbstractInterval& I, const std::vector<AbstractInterval>& other) {
        if (P.saturates(I.members) && is_simple_partition(P.restrict_to(I.members), I.members))
            return true;
        for (const auto& J : other)
            if (pair_saturated_ladder(P, I, J, policy)) return true;
        return false;
    };
    for (const auto& I : Ip)
        if (!interval_ok(I, Im)) return false;
    for (const auto& I : Im)
        if (!interval_ok(I, Ip)) return false;
    // immediate pairs stay inside one segment (skeleton cells are exempt)
    std::vector<int> supp = F.support();
    for (const auto& c : P.cells) {
        if (c.size() != 2 || K.sign(c[0]) != K.sign(c[1])) continue;
        if (std::binary_search(supp.begin(), supp.end(), c[0])) continue;
        if (K.seg(c[0]) != K.seg(c[1])) return false;
    }
    return true;
}

std::vector<Partition> canonical_partitions(const SkeletonSpec& F, const CollisionSet& K,
                                            PairPolicy policy) {
    require(K.size() <= 12, "canonical_partitions: size cap |K| <= 12 exceeded");
    std::vector<int> ids(K.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<Partition> out;
    for_each_set_partition(K.size(), [&](const std::vector<int>& rgs) {
        // cheap filter: only cells of size 2 outside the support can appear
        Partition P = Partition::from_labels(ids, rgs);
        if (in_canonical_collection(P, F, K, policy)) out.push_back(std::move(P));
    });
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Half colorings of one interval realization: disjoint adjacent same-segment
// imrec pairs, the remaining elements numbered as rungs.
void interval_colorings(const std::vector<int>& members, const CollisionSet& K, bool matched,
                        int label, bool decreasing, std::vector<std::vector<Color>>& out) {
    int m = int(members.size());
    if (!matched) {
        if (m % 2) return;
        for (int j = 0; j < m; j += 2)
            if (K.seg(members[j]) != K.seg(members[j + 1])) return;
        out.emplace_back(m, Color::imrec());
        return;
    }
    std::vector<std::vector<int>> pairsets;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int start) {
        pairsets.push_back(cur);
        for (int j = start; j + 1 < m; ++j) {
            if (K.seg(members[j]) != K.seg(members[j + 1])) continue;
            cur.push_back(j);
            rec(j + 2);
            cur.pop_back();
        }
    };
    rec(0);
    for (const auto& ps : pairsets) {
        std::vector<Color> col(m);
        std::vector<char> imm(m, 0);
        for (int j : ps) imm[j] = imm[j + 1] = 1;
        int h = m - 2 * int(ps.size());
        int r = 0;
        for (int j = 0; j < m; ++j) {
            if (imm[j]) {
                col[j] = Color::imrec();
            } else {
                ++r;
                col[j] = Color::ext(label, decreasing ? h + 1 - r : r);
            }
        }
        out.push_back(std::move(col));
    }
}

}  // namespace

std::vector<Coloring> enumerate_coloring_sets(const SkeletonSpec& F, const CollisionSet& K,
                                              int sign, PairPolicy policy) {
    require(K.size() <= 10, "enumerate_coloring_sets: size cap |K+|+|K-| <= 10 exceeded");
    auto mine = abstract_intervals(F, K, sign);
    auto other = abstract_intervals(F, K, -sign);
    std::vector<int> side = K.side(sign);
    std::map<int, int> cell_index;
    for (std::size_t i = 0; i < F.cells.size(); ++i)
        for (int x : F.cells[i]) cell_index[x] = int(i);

    std::set<Coloring> out;
    int mi = int(mine.size()), mo = int(other.size());
    std::vector<int> partner(mi, -1);
    std::vector<char> used(mo, 0);

    auto emit = [&]() {
        // options per interval, then the cartesian product
        std::vector<std::vector<std::vector<Color>>> opts(mi);
        for (int i = 0; i < mi; ++i) {
            bool matched = partner[i] >= 0;
            if (!matched) {
                interval_colorings(mine[i].members, K, false, 0, false, opts[i]);
            } else {
                int label = sign > 0 ? pair_label(i, partner[i]) : pair_label(partner[i], i);
                interval_colorings(mine[i].members, K, true, label, false, opts[i]);
                if (sign < 0 && policy == PairPolicy::LadderOrAntiLadder)
                    interval_colorings(mine[i].members, K, true, label, true, opts[i]);
            }
            if (opts[i].empty()) return;
        }
        std::vector<std::size_t> choice(mi, 0);
        while (true) {
            Coloring c;
            c.ids = side;
            for (int x : side) c.seg.push_back(K.seg(x));
            c.c.assign(side.size(), Color::imrec());
            std::map<int, Color> assigned;
            for (int i = 0; i < mi; ++i) {
                const auto& col = opts[i][choice[i]];
                for (std::size_t t = 0; t < mine[i].members.size(); ++t)
                    assigned[mine[i].members[t]] = col[t];
            }
            for (std::size_t t = 0; t < side.size(); ++t) {
                int x = side[t];
                if (cell_index.count(x))
                    c.c[t] = Color::ext(kCellLabel, cell_index[x]);
                else
                    c.c[t] = assigned.at(x);
            }
            // per-segment imrec parity; validity covers it but check explicitly
            std::map<int, int> parity;
            for (std::size_t t = 0; t < side.size(); ++t)
                if (c.c[t].kind == Color::Imrec) parity[c.seg[t]] ^= 1;
            bool even = std::all_of(parity.begin(), parity.end(),
                                    [](const auto& kv) { return kv.second == 0; });
            if (even && c.valid()) out.insert(std::move(c));
            int k = 0;
            while (k < mi && ++choice[k] == opts[k].size()) choice[k++] = 0;
            if (k == mi) break;
        }
    };

    std::function<void(int)> match = [&](int i) {
        if (i == mi) {
            emit();
            return;
        }
        partner[i] = -1;
        match(i + 1);
        for (int j = 0; j < mo; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            partner[i] = j;
            match(i + 1);
            partner[i] = -1;
            used[j] = 0;
        }
    };
    match(0);
    return {out.begin(), out.end()};
}

std::vector<Partition> partitions_from_colorings(const std::vector<Coloring>& plus,
                                                 const std::vector<Coloring>& minus) {
    std::set<Partition> out;
    for (const auto& a : plus)
        for (const auto& b : minus) {
            auto cp = coloring_to_partition(a, b);
            if (!cp.has_singleton) out.insert(std::move(cp.P));
        }
    return {out.begin(), out.end()};
}

}  // namespace kinlab::combinat
