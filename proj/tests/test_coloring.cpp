#include <algorithm>
#include <set>

#include "doctest.h"
#include "kinlab/combinat.hpp"

using namespace kinlab::combinat;

namespace {

std::vector<int> iota_vec(int lo, int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + i;
    return v;
}

// random renormalized (anti)ladder on A = [0, a), B = [a, a + b)
struct RandomLadder {
    Partition P;
    std::vector<int> A, B;
    Orientation o;
};

RandomLadder random_ladder(kinlab::Rng& rng) {
    std::uniform_int_distribution<int> rungs(0, 3), pairs(0, 2), coin(0, 1);
    int h = rungs(rng);
    // interleave rungs and immediate pairs on each side
    auto side = [&](int np) {
        std::vector<int> tokens(h, 0);
        tokens.insert(tokens.end(), np, 1);
        std::shuffle(tokens.begin(), tokens.end(), rng);
        return tokens;
    };
    auto ta = side(pairs(rng)), tb = side(pairs(rng));
    int a = 0, b = 0;
    for (int t : ta) a += t ? 2 : 1;
    for (int t : tb) b += t ? 2 : 1;
    RandomLadder r;
    r.A = iota_vec(0, a);
    r.B = iota_vec(a, b);
    r.o = coin(rng) ? Orientation::Ladder : Orientation::AntiLadder;
    std::vector<Cell> cells;
    std::vector<int> ra, rb;
    int x = 0;
    for (int t : ta) {
        if (t) {
            cells.push_back({x, x + 1});
            x += 2;
        } else {
            ra.push_back(x++);
        }
    }
    x = a;
    for (int t : tb) {
        if (t) {
            cells.push_back({x, x + 1});
            x += 2;
        } else {
            rb.push_back(x++);
        }
    }
    for (int i = 0; i < h; ++i)
        cells.push_back({ra[i], r.o == Orientation::Ladder ? rb[i] : rb[h - 1 - i]});
    r.P = Partition::from_cells(cells);
    return r;
}

Coloring make(std::vector<int> ids, std::vector<Color> c) {
    Coloring k;
    k.seg.assign(ids.size(), 1);
    k.ids = std::move(ids);
    k.c = std::move(c);
    return k;
}

}  // namespace

TEST_CASE("single rung is colored (ext, 1) on both sides") {
    auto [cp, cm] = canonical_coloring(Partition::from_cells({{0, 1}}), {0}, {1}, {}, {},
                                       Orientation::Ladder);
    CHECK(cp.c == std::vector<Color>{Color::ext(0, 1)});
    CHECK(cm.c == std::vector<Color>{Color::ext(0, 1)});
}

TEST_CASE("all-immediate ladder colors everything imrec") {
    Partition P = Partition::from_cells({{0, 1}, {2, 3}, {4, 5}});
    auto [cp, cm] = canonical_coloring(P, {0, 1, 2, 3}, {4, 5}, {}, {}, Orientation::Ladder);
    for (const auto& col : cp.c) CHECK(col.kind == Color::Imrec);
    for (const auto& col : cm.c) CHECK(col.kind == Color::Imrec);
}

TEST_CASE("non-ladder input is rejected") {
    CHECK_THROWS_AS(canonical_coloring(Partition::from_cells({{0, 3}, {1, 2}}), {0, 1}, {2, 3},
                                       {}, {}, Orientation::Ladder),
                    kinlab::Error);
}

TEST_CASE("coloring round trip on random renormalized ladders") {
    auto rng = kinlab::make_rng(2024, kinlab::hash_string("ladder-roundtrip"));
    for (int t = 0; t < 500; ++t) {
        auto r = random_ladder(rng);
        auto [cp, cm] = canonical_coloring(r.P, r.A, r.B, {}, {}, r.o);
        auto back = coloring_to_partition(cp, cm);
        CHECK(back.P == r.P);
        CHECK_FALSE(back.has_singleton);
    }
}

TEST_CASE("coloring to partition on small examples") {
    // matching ext colors join across sides, imrec pairs join neighbours
    auto a = make({0, 1, 2}, {Color::ext(0, 1), Color::imrec(), Color::imrec()});
    auto b = make({3}, {Color::ext(0, 1)});
    auto r = coloring_to_partition(a, b);
    CHECK(r.P.str() == "{{0,3},{1,2}}");
    CHECK_FALSE(r.has_singleton);

    auto c = make({0, 1}, {Color::ext(0, 1), Color::ext(0, 2)});
    auto d = make({2}, {Color::ext(0, 1)});
    auto s = coloring_to_partition(c, d);
    CHECK(s.P.str() == "{{0,2},{1}}");
    CHECK(s.has_singleton);

    auto odd = make({0}, {Color::imrec()});
    CHECK_FALSE(odd.valid());
    CHECK_THROWS_AS(coloring_to_partition(odd, make({}, {})), kinlab::Error);

    auto cross = make({0, 1}, {Color::imrec(), Color::imrec()});
    cross.seg = {1, 2};
    CHECK_FALSE(cross.valid());
}

TEST_CASE("abstract intervals split each side at the support") {
    CollisionSet K = CollisionSet::single_segment(4, 3);
    SkeletonSpec F{{{1, 5}}};
    auto Ip = abstract_intervals(F, K, +1);
    REQUIRE(Ip.size() == 2);
    CHECK(Ip[0].members == std::vector<int>{0});
    CHECK(Ip[0].lo == -1);
    CHECK(Ip[0].hi == 1);
    CHECK(Ip[1].members == std::vector<int>{2, 3});
    CHECK(Ip[1].hi == -1);
    auto Im = abstract_intervals(F, K, -1);
    REQUIRE(Im.size() == 2);
    CHECK(Im[0].members == std::vector<int>{4});
    CHECK(Im[1].members == std::vector<int>{6});
}

TEST_CASE("empty skeleton") {
    SkeletonSpec F;
    auto K11 = CollisionSet::single_segment(1, 1);
    auto q = canonical_partitions(F, K11, PairPolicy::LadderOnly);
    REQUIRE(q.size() == 1);
    CHECK(q[0].str() == "{{0,1}}");

    auto K22 = CollisionSet::single_segment(2, 2);
    auto q2 = canonical_partitions(F, K22, PairPolicy::LadderOnly);
    CHECK(q2.size() == 2);
    auto plus = enumerate_coloring_sets(F, K22, +1, PairPolicy::LadderOnly);
    auto minus = enumerate_coloring_sets(F, K22, -1, PairPolicy::LadderOnly);
    CHECK(partitions_from_colorings(plus, minus) == q2);

    // both orientations add the antiladder
    CHECK(canonical_partitions(F, K22, PairPolicy::LadderOrAntiLadder).size() == 3);
}

TEST_CASE("segment boundaries forbid immediate pairs") {
    CollisionSet K;
    K.plus_seg = {1, 2};
    K.minus_seg = {1, 1};
    auto q = canonical_partitions(SkeletonSpec{}, K, PairPolicy::LadderOnly);
    for (const auto& P : q) CHECK(P.cell_of(0) != P.cell_of(1));
}

TEST_CASE("three-element skeleton cell forces one color") {
    CollisionSet K = CollisionSet::single_segment(3, 2);
    SkeletonSpec F{{{0, 2, 3}}};
    for (int s : {+1, -1}) {
        for (const auto& c : enumerate_coloring_sets(F, K, s)) {
            std::set<Color> seen;
            for (std::size_t t = 0; t < c.ids.size(); ++t)
                if (c.ids[t] == 0 || c.ids[t] == 2 || c.ids[t] == 3) seen.insert(c.c[t]);
            CHECK(seen.size() == 1);
        }
    }
}

TEST_CASE("colorings reproduce the canonical collection") {
    struct Case {
        int kp, km;
        SkeletonSpec F;
        std::vector<int> segp, segm;
    };
    std::vector<Case> cases = {
        {2, 2, {}, {}, {}},
        {3, 1, {}, {}, {}},
        {3, 3, {{{1, 4}}}, {}, {}},
        {4, 2, {{{0, 1, 5}}}, {}, {}},
        {3, 3, {}, {1, 1, 2}, {1, 2, 2}},
        {4, 4, {{{2, 6}}}, {}, {}},
    };
    for (auto pol : {PairPolicy::LadderOnly, PairPolicy::LadderOrAntiLadder}) {
        for (const auto& cs : cases) {
            CollisionSet K = CollisionSet::single_segment(cs.kp, cs.km);
            if (!cs.segp.empty()) K.plus_seg = cs.segp;
            if (!cs.segm.empty()) K.minus_seg = cs.segm;
            auto want = canonical_partitions(cs.F, K, pol);
            auto got = partitions_from_colorings(enumerate_coloring_sets(cs.F, K, +1, pol),
                                                 enumerate_coloring_sets(cs.F, K, -1, pol));
            INFO("kp=" << cs.kp << " km=" << cs.km);
            CHECK(got == want);
        }
    }
}

TEST_CASE("distinct interval pairings give disjoint partition sets") {
    // an interval cannot be saturated as a ladder with two different partners
    CollisionSet K = CollisionSet::single_segment(3, 3);
    SkeletonSpec F{{{1, 4}}};
    auto Ip = abstract_intervals(F, K, +1);
    auto Im = abstract_intervals(F, K, -1);
    for (const auto& P : canonical_partitions(F, K)) {
        for (const auto& I : Ip) {
            if (I.members.empty()) continue;
            int partners = 0;
            for (const auto& J : Im) {
                std::vector<int> U = I.members;
                U.insert(U.end(), J.members.begin(), J.members.end());
                bool crosses = false;
                for (const auto& c : P.cells)
                    for (int x : c)
                        for (int y : c)
                            if (std::count(I.members.begin(), I.members.end(), x) &&
                                std::count(J.members.begin(), J.members.end(), y))
                                crosses = true;
                partners += crosses;
            }
            CHECK(partners <= 1);
        }
    }
}
