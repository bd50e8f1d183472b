#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kinlab/wavepacket.hpp"

using namespace kinlab;
using namespace kinlab::wavepacket;

namespace {

const double kPi = std::numbers::pi;

CVec gaussian(const Grid& g, double x0, double p0, double s) {
    CVec f(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        RVec x = g.position(k);
        double r2 = (x[0] - x0) * (x[0] - x0) + (g.d == 2 ? x[1] * x[1] : 0.0);
        f[k] = std::exp(-r2 / (2 * s * s)) * std::exp(cplx(0, p0 * x[0]));
    }
    double nrm = l2norm(g, f);
    for (auto& v : f) v /= nrm;
    return f;
}

// Weyl matrix straight from the definition: midpoint of x_i and x_i + m h,
// momentum sum over the lattice
Matrix direct_weyl_1d(const Grid& g, const SymbolFn& a) {
    int n = g.n;
    Matrix M = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int m = ((j - i) % n + n) % n;
            if (m >= n / 2) m -= n;
            std::vector<double> mids = {g.coord(i) + 0.5 * m * g.h()};
            if (m == -n / 2) mids.push_back(mids[0] + 0.5 * g.L);
            cplx s = 0;
            for (double X : mids)
                for (int k = 0; k < n; ++k) {
                    double p = g.momentum(k);
                    s += a({g.wrap(X), 0}, {p, 0}) * std::exp(cplx(0, m * g.h() * p)) / double(mids.size());
                }
            M(j, i) = s * g.h() * g.dp() / (2 * kPi);
        }
    return M;
}

double max_abs_diff(const Matrix& A, const Matrix& B) { return (A - B).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("envelope is normalized and supported in the unit ball") {
    for (int d : {1, 2}) {
        auto e = Envelope::make(3.0, d);
        CHECK(e(1.0) == 0.0);
        CHECK(e(0.999) >= 0.0);
        CHECK(e(0.5) > 0.0);
    }
}

TEST_CASE("wavepacket normalization and localization") {
    Grid g{1, 512, 512.0};
    auto env = Envelope::make(16.0, 1);
    auto phi = make_wavepacket({{3.3, 0}, {0.7, 0}}, env, g);
    CHECK(std::abs(l2norm(g, phi) - 1.0) <= 1e-6);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (std::abs(g.wrap(g.coord(int(k)) - 3.3)) >= 16.0) CHECK(phi[k] == cplx(0.0));

    Grid g2{2, 64, 64.0};
    auto env2 = Envelope::make(16.0, 2);
    auto phi2 = make_wavepacket({{1.0, -2.0}, {0.3, 0.1}}, env2, g2);
    CHECK(std::abs(l2norm(g2, phi2) - 1.0) <= 1e-6);

    CHECK_THROWS_AS(make_wavepacket({}, Envelope::make(3.0, 1), g), Error);
    CHECK_THROWS_AS(make_wavepacket({}, Envelope::make(200.0, 1), g), Error);
}

TEST_CASE("wavepacket translation covariance on grid shifts") {
    Grid g{1, 256, 128.0};
    auto env = Envelope::make(8.0, 1);
    PhasePoint xi{{-40.0, 0}, {0.9, 0}};
    int shift = 37;
    double v = shift * g.h();
    auto a = make_wavepacket({{xi.x[0] + v, 0}, xi.p}, env, g);
    auto b = make_wavepacket(xi, env, g);
    for (int k = 0; k < g.n; ++k) {
        cplx expect = b[((k - shift) % g.n + g.n) % g.n] * std::exp(cplx(0, v * xi.p[0]));
        CHECK(std::abs(a[k] - expect) < 1e-12);
    }
}

TEST_CASE("wavepacket overlaps decay in phase distance") {
    Grid g{1, 512, 512.0};
    double r = 8.0;
    auto env = Envelope::make(r, 1);
    auto rng = make_rng(5, hash_string("overlap"));
    std::uniform_real_distribution<double> U(0, 1);
    double cmin = 1e300;
    std::vector<double> xs, ys;
    for (int t = 0; t < 100; ++t) {
        double d = 1.0 + 9.0 * U(rng);
        double fx = U(rng);
        // split the distance between position and momentum
        double dx = fx * d * r * 0.2, dp = (d - dx / r) / r;
        PhasePoint a{{0, 0}, {0.5, 0}}, b{{dx, 0}, {0.5 + dp, 0}};
        CHECK(phase_distance(a, b, r, g.L) == doctest::Approx(d));
        double ov = std::abs(inner(g, make_wavepacket(a, env, g), make_wavepacket(b, env, g)));
        REQUIRE(ov < 1.0);
        if (ov < 1e-300) continue;
        double dd = std::pow(d, 0.9);
        cmin = std::min(cmin, -std::log(ov) / dd);
        xs.push_back(dd);
        ys.push_back(std::log(ov));
    }
    CHECK(cmin > 0);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    CHECK(sxy / sxx < 0);
}

TEST_CASE("phase distance is a metric with the stated scaling") {
    PhasePoint a{{1.0, 0}, {0.2, 0}}, b{{4.0, 0}, {0.2, 0}};
    CHECK(phase_distance(a, a, 2.0) == 0.0);
    CHECK(phase_distance(a, b, 2.0) == doctest::Approx(1.5));
    PhasePoint c{{1.0, 0}, {0.7, 0}};
    CHECK(phase_distance(a, c, 2.0) == doctest::Approx(1.0));
    CHECK(phase_distance(a, c, 4.0) == doctest::Approx(2.0));
    CHECK(phase_distance(a, b, 4.0) == doctest::Approx(0.75));
    // minimal image
    CHECK(phase_distance({{-9.5, 0}, {}}, {{9.5, 0}, {}}, 1.0, 20.0) == doctest::Approx(1.0));
    auto rng = make_rng(1, hash_string("metric"));
    std::uniform_real_distribution<double> U(-10, 10);
    for (int t = 0; t < 200; ++t) {
        PhasePoint p{{U(rng), U(rng)}, {U(rng), U(rng)}}, q{{U(rng), U(rng)}, {U(rng), U(rng)}},
            s{{U(rng), U(rng)}, {U(rng), U(rng)}};
        double r = 0.5 + std::abs(U(rng));
        CHECK(phase_distance(p, q, r, 20.0) == doctest::Approx(phase_distance(q, p, r, 20.0)));
        CHECK(phase_distance(p, s, r, 20.0) <= phase_distance(p, q, r, 20.0) + phase_distance(q, s, r, 20.0) + 1e-12);
    }
}

TEST_CASE("Wigner transform of the standard Gaussian") {
    // pair separations reach L/2 only, so L must cover the Gaussian tails
    Grid g{1, 128, 24.0};
    CVec psi(g.size());
    for (int i = 0; i < g.n; ++i) psi[i] = std::pow(kPi, -0.25) * std::exp(-0.5 * g.coord(i) * g.coord(i));
    auto W = wigner_transform(psi, g);
    double maxW = 0, maxIm = 0, err = 0;
    for (std::size_t s = 0; s < W.nx(); ++s)
        for (std::size_t k = 0; k < W.np(); ++k) {
            maxW = std::max(maxW, std::abs(W(s, k)));
            maxIm = std::max(maxIm, std::abs(W(s, k).imag()));
            double x = W.x_at(s)[0], p = W.p_at(k)[0];
            if (std::abs(p) < 0.5 * kPi / g.h()) err = std::max(err, std::abs(W(s, k).real() - 2 * std::exp(-x * x - p * p)));
        }
    CHECK(maxIm <= 1e-10 * maxW);
    CHECK(err < 1e-10);
    // total mass
    Observable one = sample_observable(g, [](const RVec&, const RVec&) { return cplx(1.0); });
    CHECK(std::abs(phase_pairing(one, W) - std::pow(l2norm(g, psi), 2)) < 1e-8);
    auto marg = wigner_position_marginal(W);
    for (int i = 0; i < g.n; ++i) CHECK(std::abs(marg[i] - std::norm(psi[i])) < 1e-12);
}

TEST_CASE("Wigner transform in two dimensions") {
    Grid g{2, 16, 12.0};
    auto psi = gaussian(g, 0.5, 1.0, 1.2);
    auto W = wigner_transform(psi, g);
    double maxIm = 0, maxW = 0;
    for (auto v : W.values) {
        maxIm = std::max(maxIm, std::abs(v.imag()));
        maxW = std::max(maxW, std::abs(v));
    }
    CHECK(maxIm <= 1e-10 * maxW);
    auto marg = wigner_position_marginal(W);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(marg[i] - std::norm(psi[i])) < 1e-12);
}

TEST_CASE("Weyl quantization of simple symbols") {
    Grid g{1, 64, 20.0};
    auto I = weyl_quantize(sample_observable(g, [](const RVec&, const RVec&) { return cplx(1.0); }));
    CHECK(max_abs_diff(I, Matrix::Identity(g.n, g.n)) <= 1e-8);
    auto X = weyl_quantize(sample_observable(g, [](const RVec& x, const RVec&) { return cplx(x[0]); }));
    auto rng = make_rng(3, hash_string("weyl-x"));
    std::normal_distribution<double> N;
    for (int t = 0; t < 10; ++t) {
        CVec psi(g.size());
        for (auto& v : psi) v = cplx(N(rng), N(rng));
        Eigen::Map<Eigen::VectorXcd> v(psi.data(), g.n);
        Eigen::VectorXcd out = X * v;
        for (int i = 0; i < g.n; ++i) CHECK(std::abs(out(i) - g.coord(i) * psi[i]) < 1e-10);
    }
    Grid g2{2, 8, 8.0};
    auto I2 = weyl_quantize(sample_observable(g2, [](const RVec&, const RVec&) { return cplx(1.0); }));
    CHECK(max_abs_diff(I2, Matrix::Identity(64, 64)) <= 1e-8);
}

TEST_CASE("Weyl quantization matches the defining sum and is self-adjoint") {
    Grid g{1, 32, 12.0};
    SymbolFn a = [](const RVec& x, const RVec& p) {
        return cplx(std::cos(2 * kPi * x[0] / 12.0) * std::exp(-p[0] * p[0] / 4) + 0.3 * p[0]);
    };
    auto M = weyl_quantize(sample_observable(g, a));
    CHECK(max_abs_diff(M, direct_weyl_1d(g, a)) < 1e-12);
    CHECK(max_abs_diff(M, M.adjoint()) < 1e-10);
}

TEST_CASE("pairing identity for random smooth symbols") {
    Grid g{1, 64, 24.0};
    auto rng = make_rng(11, hash_string("pairing"));
    std::uniform_real_distribution<double> U(-1, 1);
    for (int t = 0; t < 5; ++t) {
        double c1 = U(rng), c2 = U(rng), c3 = U(rng), x0 = 3 * U(rng), p0 = U(rng);
        SymbolFn a = [=](const RVec& x, const RVec& p) {
            return cplx(c1 * std::sin(2 * kPi * x[0] / 24.0 + c2) * std::exp(-(p[0] - c3) * (p[0] - c3)) + c3 * p[0] * p[0]);
        };
        auto A = sample_observable(g, a);
        auto psi = gaussian(g, x0, p0, 1.5);
        cplx lhs = expectation(g, weyl_quantize(A), psi);
        cplx rhs = phase_pairing(A, wigner_transform(psi, g));
        CHECK(std::abs(lhs - rhs) <= 1e-6 * std::abs(lhs));
    }
}

TEST_CASE("wavepacket quantization of constants is close to the identity") {
    Grid g{1, 512, 512.0};
    auto env = Envelope::make(16.0, 1);
    auto one = [](const RVec&, const RVec&) { return cplx(1.0); };
    std::vector<double> devs;
    for (double frac : {4.0, 8.0, 16.0}) {
        WavepacketQuadrature q;
        q.nx = int(g.L / (env.r / frac));
        auto S = wavepacket_quantize(one, env, g, q);
        devs.push_back(opnorm(S - Matrix::Identity(g.n, g.n)));
    }
    CHECK(devs[0] <= 1e-2);
    CHECK(devs[1] < devs[0]);
    CHECK(devs[2] < devs[1]);
    WavepacketQuadrature coarse;
    coarse.nx = int(g.L / (env.r / 2));
    CHECK_THROWS_AS(wavepacket_quantize(one, env, g, coarse), Error);
}

TEST_CASE("wavepacket quantization: positivity, adjointness and a single node") {
    Grid g{1, 128, 128.0};
    auto env = Envelope::make(4.0, 1);
    auto q = default_quadrature(g, env);
    SymbolFn a = [](const RVec& x, const RVec& p) { return cplx(std::exp(-x[0] * x[0] / 200) * (1 + std::cos(p[0]))); };
    auto M = wavepacket_quantize(a, env, g, q);
    CHECK(max_abs_diff(M, M.adjoint()) < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);

    // mass one at a single node
    double dx = g.L / q.nx;
    double w = dx * g.dp() / (2 * kPi);
    RVec x0{-0.5 * g.L + 20 * dx, 0};
    double p0 = 7 * g.dp();
    SymbolFn bump = [&](const RVec& x, const RVec& p) {
        return std::abs(x[0] - x0[0]) < 1e-9 && std::abs(p[0] - p0) < 1e-9 ? cplx(1.0 / w) : cplx(0.0);
    };
    auto B = wavepacket_quantize(bump, env, g, q);
    auto phi = make_wavepacket({x0, {p0, 0}}, env, g);
    Eigen::Map<Eigen::VectorXcd> v(phi.data(), g.n);
    Matrix P = v * v.adjoint() * g.h();
    CHECK(max_abs_diff(B, P) < 1e-12);
}

TEST_CASE("wavepacket and Weyl quantizations agree for slowly varying symbols") {
    Grid g{1, 256, 256.0};
    double r = 8.0, delta = 1.0 / 8;
    auto env = Envelope::make(r, 1);
    SymbolFn a = [&](const RVec& x, const RVec& p) {
        return cplx(std::cos(2 * kPi * x[0] / 256.0) * std::exp(-(p[0] * r * delta) * (p[0] * r * delta)));
    };
    auto A = sample_observable(g, a, r, 1 / delta);
    double diff = opnorm(wavepacket_quantize(a, env, g, default_quadrature(g, env)) - weyl_quantize(A));
    double nrm = ck_norm(A, 3, r, 1 / delta).value;
    CHECK(diff <= 0.5 * delta * nrm);
}

TEST_CASE("C^k norms") {
    Grid g{1, 128, 64.0};
    auto c = sample_observable(g, [](const RVec&, const RVec&) { return cplx(-2.5); });
    CHECK(ck_norm(c, 3, 1.0, 4.0).value == doctest::Approx(2.5));

    double rL = 64.0 / (4 * kPi);
    auto cs = sample_observable(g, [&](const RVec& x, const RVec&) { return cplx(std::cos(x[0] / rL)); });
    for (int k = 0; k <= 4; ++k) {
        auto n = ck_norm(cs, k, 1.0, rL);
        CHECK(n.value == doctest::Approx(k + 1).epsilon(1e-9));
        CHECK_FALSE(n.under_resolved);
    }
    CHECK(ck_norm(cs, 2, 0.01, 1.0).under_resolved);

    // homogeneity and triangle inequality
    auto a = sample_observable(g, [](const RVec& x, const RVec& p) {
        return cplx(std::sin(2 * kPi * x[0] / 64.0) * std::exp(-p[0] * p[0]));
    });
    auto b = sample_observable(g, [](const RVec& x, const RVec& p) {
        return cplx(std::cos(4 * kPi * x[0] / 64.0) * std::exp(-(p[0] - 1) * (p[0] - 1)));
    });
    Observable s = a, m = a;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        s.values[i] = a.values[i] + b.values[i];
        m.values[i] = -3.0 * a.values[i];
    }
    double na = ck_norm(a, 3, 2.0, 1.5).value, nb = ck_norm(b, 3, 2.0, 1.5).value;
    CHECK(ck_norm(m, 3, 2.0, 1.5).value == doctest::Approx(3 * na));
    CHECK(ck_norm(s, 3, 2.0, 1.5).value <= na + nb + 1e-12);

    // substitution x -> 2x
    auto f = [](double x) { return std::sin(2 * kPi * x / 64.0) + 0.5 * std::cos(6 * kPi * x / 64.0); };
    auto a1 = sample_observable(g, [&](const RVec& x, const RVec&) { return cplx(f(x[0])); });
    // twice the points so the rescaled samples coincide
    Grid g2{1, 256, 64.0};
    auto a2 = sample_observable(g2, [&](const RVec& x, const RVec&) { return cplx(f(2 * x[0])); });
    CHECK(ck_norm(a2, 3, 1.5, 2.0).value == doctest::Approx(ck_norm(a1, 3, 1.5, 4.0).value).epsilon(1e-9));
}

TEST_CASE("good support") {
    Grid g{1, 32, 16.0};
    auto a = sample_observable(g, [](const RVec&, const RVec& p) { return cplx(std::abs(p[0]) >= 1.0 ? 1.0 : 0.0); });
    CHECK(has_good_support(a, 1.0));
    CHECK_FALSE(has_good_support(a, 1.5));
}

TEST_CASE("Schur bound") {
    Grid g{1, 64, 64.0};
    auto env = Envelope::make(4.0, 1);
    std::vector<PhaseNode> nodes;
    for (int i = 0; i < 16; ++i)
        for (int j = -2; j <= 2; ++j) nodes.push_back({{{-32.0 + 4 * i, 0}, {0.25 * j, 0}}, 4.0 * 0.25 / (2 * kPi)});
    Matrix Z = Matrix::Zero(nodes.size(), nodes.size());
    CHECK(schur_opnorm_bound(nodes, Z, env, g).bound == 0.0);

    Matrix D = Z;
    D(7, 7) = 3.0;
    auto b = schur_opnorm_bound(nodes, D, env, g);
    CHECK(b.bound == doctest::Approx(b.frame_norm * 3.0 * nodes[7].w));
    CHECK(b.bound >= opnorm(kernel_operator(nodes, D, env, g)) - 1e-12);

    auto rng = make_rng(8, hash_string("schur"));
    std::uniform_real_distribution<double> U(-1, 1);
    std::bernoulli_distribution keep(0.05);
    for (int t = 0; t < 20; ++t) {
        Matrix K = Z;
        for (Eigen::Index i = 0; i < K.rows(); ++i)
            for (Eigen::Index j = 0; j < K.cols(); ++j)
                if (keep(rng)) K(i, j) = cplx(U(rng), U(rng));
        auto sb = schur_opnorm_bound(nodes, K, env, g);
        CHECK(sb.bound >= opnorm(kernel_operator(nodes, K, env, g)) * (1 - 1e-12));
    }
}

TEST_CASE("operator norm: dense and power iteration paths") {
    Matrix A(2, 2);
    A << cplx(3, 0), cplx(0, 1), cplx(0, 0), cplx(1, 0);
    Eigen::BDCSVD<Matrix> svd(A);
    CHECK(opnorm(A) == doctest::Approx(svd.singularValues()(0)));
    Matrix big = Matrix::Zero(1100, 1100);
    for (int i = 0; i < 1100; ++i) big(i, i) = 1.0 + i / 1100.0;
    big(1099, 1099) = 3.0;
    big(3, 5) = 0.5;
    double pn = opnorm(big);
    CHECK(pn == doctest::Approx(3.0).epsilon(1e-6));
}
