#include "kinlab/combinat.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace kinlab::combinat {

Partition Partition::from_cells(std::vector<Cell> cells) {
    Partition P;
    for (auto& c : cells) {
        if (c.empty()) continue;
        std::sort(c.begin(), c.end());
        P.cells.push_back(std::move(c));
    }
    std::sort(P.cells.begin(), P.cells.end(),
              [](const Cell& a, const Cell& b) { return a.front() < b.front(); });
    std::vector<int> g = P.ground();
    for (std::size_t i = 1; i < g.size(); ++i)
        require(g[i] != g[i - 1], "partition cells overlap");
    return P;
}

Partition Partition::from_labels(const std::vector<int>& ids, const std::vector<int>& labels) {
    require(ids.size() == labels.size(), "from_labels: size mismatch");
    std::map<int, Cell> m;
    for (std::size_t i = 0; i < ids.size(); ++i) m[labels[i]].push_back(ids[i]);
    std::vector<Cell> cells;
    for (auto& [k, c] : m) cells.push_back(std::move(c));
    return from_cells(std::move(cells));
}

std::vector<int> Partition::ground() const {
    std::vector<int> g;
    for (const auto& c : cells) g.insert(g.end(), c.begin(), c.end());
    std::sort(g.begin(), g.end());
    return g;
}

bool Partition::has_singleton() const {
    return std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return c.size() == 1; });
}

bool Partition::is_matching() const {
    return std::all_of(cells.begin(), cells.end(), [](const Cell& c) { return c.size() == 2; });
}

int Partition::cell_of(int id) const {
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (std::binary_search(cells[i].begin(), cells[i].end(), id)) return int(i);
    return -1;
}

Partition Partition::restrict_to(const std::vector<int>& ids) const {
    std::set<int> s(ids.begin(), ids.end());
    std::vector<Cell> out;
    for (const auto& c : cells) {
        Cell r;
        for (int v : c)
            if (s.count(v)) r.push_back(v);
        if (!r.empty()) out.push_back(std::move(r));
    }
    return from_cells(std::move(out));
}

bool Partition::saturates(const std::vector<int>& ids) const {
    std::set<int> s(ids.begin(), ids.end());
    for (const auto& c : cells) {
        std::size_t in = 0;
        for (int v : c) in += s.count(v);
        if (in != 0 && in != c.size()) return false;
    }
    return true;
}

std::string Partition::str() const {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ",";
        os << "{";
        for (std::size_t j = 0; j < cells[i].size(); ++j) os << (j ? "," : "") << cells[i][j];
        os << "}";
    }
    os << "}";
    return os.str();
}

void for_each_set_partition(int n, const std::function<void(const std::vector<int>&)>& f) {
    require(n >= 0, "set partition size must be nonnegative");
    std::vector<int> a(n, 0), mx(n + 1, 0);
    if (n == 0) {
        f(a);
        return;
    }
    // restricted growth strings in lexicographic order; mx[i] = max(a[0..i-1])
    while (true) {
        f(a);
        int i = n - 1;
        while (i > 0 && a[i] == mx[i] + 1) --i;
        if (i == 0) return;
        ++a[i];
        for (int j = i + 1; j < n; ++j) {
            a[j] = 0;
            mx[j] = std::max(mx[j - 1], a[j - 1]);
        }
    }
}

std::uint64_t bell_number(int n) {
    std::vector<std::uint64_t> row{1};
    for (int i = 0; i < n; ++i) {
        std::vector<std::uint64_t> next{row.back()};
        for (auto v : row) next.push_back(next.back() + v);
        row = next;
    }
    return row.front();
}

CollisionSet CollisionSet::single_segment(int kp, int km) {
    CollisionSet K;
    K.plus_seg.assign(kp, 1);
    K.minus_seg.assign(km, 1);
    return K;
}

std::vector<int> CollisionSet::side(int s) const {
    std::vector<int> v(s > 0 ? kp() : km());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = id(s, int(i));
    return v;
}

std::string CollisionSet::label(int i) const {
    std::ostringstream os;
    os << (sign(i) > 0 ? "+" : "-") << "(" << seg(i) << "," << pos(i) + 1 << ")";
    return os.str();
}

Partition ladder_partition(const std::vector<int>& A, const std::vector<int>& B, Orientation o) {
    require(A.size() == B.size(), "ladder_partition: |A| != |B|");
    std::vector<Cell> cells;
    std::size_t m = A.size();
    for (std::size_t i = 0; i < m; ++i)
        cells.push_back({A[i], o == Orientation::Ladder ? B[i] : B[m - 1 - i]});
    return Partition::from_cells(std::move(cells));
}

namespace {

int position_in(const std::vector<int>& v, int x) {
    auto it = std::find(v.begin(), v.end(), x);
    return it == v.end() ? -1 : int(it - v.begin());
}

bool ladder_on_remainder(const Partition& R, const std::vector<int>& A, const std::vector<int>& B,
                         Orientation o) {
    if (A.size() != B.size()) return false;
    return R == ladder_partition(A, B, o);
}

}  // namespace

LadderVerdict is_renormalized_ladder(const Partition& P, const std::vector<int>& A,
                                     const std::vector<int>& B, Orientation o) {
    LadderVerdict v;
    if (!P.is_matching()) {
        v.clause = "matching: a cell does not have exactly two elements";
        return v;
    }
    for (const auto& c : P.cells) {
        int pa0 = position_in(A, c[0]), pa1 = position_in(A, c[1]);
        int pb0 = position_in(B, c[0]), pb1 = position_in(B, c[1]);
        if ((pa0 < 0 && pb0 < 0) || (pa1 < 0 && pb1 < 0)) {
            v.clause = "ground: cell element outside A u B";
            return v;
        }
        if (pa0 >= 0 && pa1 >= 0) {
            if (std::abs(pa0 - pa1) != 1) {
                v.clause = "adjacency: same-side pair of non-adjacent elements in A";
                return v;
            }
            v.I_A.push_back(c[0]);
            v.I_A.push_back(c[1]);
        } else if (pb0 >= 0 && pb1 >= 0) {
            if (std::abs(pb0 - pb1) != 1) {
                v.clause = "adjacency: same-side pair of non-adjacent elements in B";
                return v;
            }
            v.I_B.push_back(c[0]);
            v.I_B.push_back(c[1]);
        }
    }
    std::vector<int> Ar, Br, rest;
    for (int a : A)
        if (std::find(v.I_A.begin(), v.I_A.end(), a) == v.I_A.end()) Ar.push_back(a);
    for (int b : B)
        if (std::find(v.I_B.begin(), v.I_B.end(), b) == v.I_B.end()) Br.push_back(b);
    rest = Ar;
    rest.insert(rest.end(), Br.begin(), Br.end());
    if (Ar.size() != Br.size()) {
        v.clause = "ladder: unequal rung counts after removing immediate pairs";
        return v;
    }
    if (!ladder_on_remainder(P.restrict_to(rest), Ar, Br, o)) {
        v.clause = o == Orientation::Ladder ? "ladder: rungs are not order preserving"
                                            : "ladder: rungs are not order reversing";
        return v;
    }
    std::sort(v.I_A.begin(), v.I_A.end());
    std::sort(v.I_B.begin(), v.I_B.end());
    v.ok = true;
    return v;
}

bool is_generalized_ladder(const Partition& P, const std::vector<int>& A,
                           const std::vector<int>& B, Orientation o) {
    std::vector<int> ground = A;
    ground.insert(ground.end(), B.begin(), B.end());
    std::sort(ground.begin(), ground.end());
    if (P.ground() != ground) return false;
    auto is_cell = [&](int x, int y) {
        Cell c{std::min(x, y), std::max(x, y)};
        return std::find(P.cells.begin(), P.cells.end(), c) != P.cells.end();
    };
    std::vector<int> candA, candB;
    for (std::size_t j = 0; j + 1 < A.size(); ++j)
        if (is_cell(A[j], A[j + 1])) candA.push_back(int(j));
    for (std::size_t j = 0; j + 1 < B.size(); ++j)
        if (is_cell(B[j], B[j + 1])) candB.push_back(int(j));
    for (std::uint32_t ma = 0; ma < (1u << candA.size()); ++ma) {
        for (std::uint32_t mb = 0; mb < (1u << candB.size()); ++mb) {
            std::vector<char> remA(A.size(), 1), remB(B.size(), 1);
            for (std::size_t t = 0; t < candA.size(); ++t)
                if (ma >> t & 1) remA[candA[t]] = remA[candA[t] + 1] = 0;
            for (std::size_t t = 0; t < candB.size(); ++t)
                if (mb >> t & 1) remB[candB[t]] = remB[candB[t] + 1] = 0;
            std::vector<int> Ar, Br, rest;
            for (std::size_t i = 0; i < A.size(); ++i)
                if (remA[i]) Ar.push_back(A[i]);
            for (std::size_t i = 0; i < B.size(); ++i)
                if (remB[i]) Br.push_back(B[i]);
            rest = Ar;
            rest.insert(rest.end(), Br.begin(), Br.end());
            if (Ar.size() != Br.size()) continue;
            Partition R = P.restrict_to(rest);
            if (ladder_on_remainder(R, Ar, Br, o)) return true;
        }
    }
    return false;
}

bool is_simple_partition(const Partition& P, const std::vector<int>& A) {
    std::vector<int> g = A;
    std::sort(g.begin(), g.end());
    if (P.ground() != g || !P.is_matching()) return false;
    for (const auto& c : P.cells)
        if (std::abs(position_in(A, c[0]) - position_in(A, c[1])) != 1) return false;
    return true;
}

namespace {

// all sets of disjoint adjacent pairs (given by first positions) on a path of length k
void path_matchings(int k, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    out.push_back(cur);
    for (int j = start; j + 1 < k; ++j) {
        cur.push_back(j);
        path_matchings(k, j + 2, cur, out);
        cur.pop_back();
    }
}

}  // namespace

std::vector<Partition> enumerate_generalized_ladders(int kp, int km) {
    require(kp >= 0 && km >= 0, "enumerate_generalized_ladders: negative size");
    require(kp + km <= 12, "enumerate_generalized_ladders: size cap k+ + k- <= 12 exceeded");
    std::vector<std::vector<int>> mp, mm;
    std::vector<int> cur;
    path_matchings(kp, 0, cur, mp);
    path_matchings(km, 0, cur, mm);
    std::set<Partition> out;
    for (const auto& sp : mp) {
        for (const auto& sm : mm) {
            if (kp - 2 * int(sp.size()) != km - 2 * int(sm.size())) continue;
            std::vector<Cell> cells;
            std::vector<char> usedp(kp, 0), usedm(km, 0);
            for (int j : sp) {
                cells.push_back({j, j + 1});
                usedp[j] = usedp[j + 1] = 1;
            }
            for (int j : sm) {
                cells.push_back({kp + j, kp + j + 1});
                usedm[j] = usedm[j + 1] = 1;
            }
            std::vector<int> Ar, Br;
            for (int i = 0; i < kp; ++i)
                if (!usedp[i]) Ar.push_back(i);
            for (int i = 0; i < km; ++i)
                if (!usedm[i]) Br.push_back(kp + i);
            for (std::size_t i = 0; i < Ar.size(); ++i) cells.push_back({Ar[i], Br[i]});
            out.insert(Partition::from_cells(std::move(cells)));
        }
    }
    return {out.begin(), out.end()};
}

}  // namespace kinlab::combinat
