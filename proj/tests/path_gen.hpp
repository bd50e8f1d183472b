#pragma once

// Hand-rolled generators shared by the path tests.

#include <cmath>
#include <numbers>
#include <random>

#include "kinlab/pathspace.hpp"

namespace testgen {

using namespace kinlab;
using namespace kinlab::pathspace;

inline RVec disk(Rng& rng, double radius) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double rad = radius * std::sqrt(U(rng)), th = 2 * std::numbers::pi * U(rng);
    return {rad * std::cos(th), rad * std::sin(th)};
}

inline RVec rotate(const RVec& v, double th) {
    return {std::cos(th) * v[0] - std::sin(th) * v[1], std::sin(th) * v[0] + std::cos(th) * v[1]};
}

// N segments of duration tau on the unit shell. Each segment starts at a
// checkpoint perturbed by alpha r / 2 in position and alpha / (2 r) in momentum
// from the previous end, collision sites carry transport offsets below alpha r / 2.
inline ExtendedPath random_extended_path(Rng& rng, int N, double tau, double alpha, double r) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    ExtendedPath G;
    G.tau = tau;
    RVec x{0, 0};
    RVec p{1, 0};
    for (int l = 0; l < N; ++l) {
        PhasePoint start{x, p};
        if (l > 0) {
            RVec dx = disk(rng, 0.5 * alpha * r), dp = disk(rng, 0.5 * alpha / r);
            start = {{x[0] + dx[0], x[1] + dx[1]}, {p[0] + dp[0], p[1] + dp[1]}};
        }
        int k = int(3 * U(rng));
        std::vector<double> cuts;
        for (int j = 0; j < k; ++j) cuts.push_back(tau * (0.05 + 0.9 * U(rng)));
        std::sort(cuts.begin(), cuts.end());
        Path w;
        w.d = 2;
        double prev = 0;
        for (double c : cuts) {
            w.s.push_back(c - prev);
            prev = c;
        }
        w.s.push_back(tau - prev);
        w.t_total = tau;
        RVec dp0 = disk(rng, 0.5 * alpha / r);
        RVec mom{start.p[0] + dp0[0], start.p[1] + dp0[1]};
        RVec y = start.x;
        for (int j = 0; j <= k; ++j) {
            w.p.push_back(mom);
            RVec e = disk(rng, 0.5 * alpha * r);
            y = {y[0] + w.s[j] * mom[0] + e[0], y[1] + w.s[j] * mom[1] + e[1]};
            if (j < k) {
                w.y.push_back(y);
                mom = rotate(mom, std::numbers::pi * (0.25 + 0.5 * U(rng)) * (U(rng) < 0.5 ? -1 : 1));
            }
        }
        x = y;
        p = mom;
        G.segments.push_back(w);
        G.xi.push_back(start);
        G.xi.push_back({x, p});
    }
    return G;
}

inline Path straight_path(const std::vector<double>& s, const std::vector<RVec>& p, const RVec& x0, int d = 2) {
    Path w;
    w.d = d;
    w.s = s;
    w.p = p;
    RVec x = x0;
    double t = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        x = {x[0] + s[j] * p[j][0], x[1] + s[j] * p[j][1]};
        t += s[j];
        if (j + 1 < s.size()) w.y.push_back(x);
    }
    w.t_total = t;
    return w;
}

inline DoubledPath doubled(const Path& wp, const Path& wm, const PhasePoint& sp, const PhasePoint& sm) {
    auto end = [](const Path& w, const PhasePoint& s) {
        RVec x = w.k() > 0 ? w.y.back() : s.x;
        return PhasePoint{{x[0] + w.s.back() * w.p.back()[0], x[1] + w.s.back() * w.p.back()[1]}, w.p.back()};
    };
    DoubledPath G;
    G.plus = ExtendedPath::single(wp, sp, end(wp, sp));
    G.minus = ExtendedPath::single(wm, sm, end(wm, sm));
    return G;
}

}  // namespace testgen
