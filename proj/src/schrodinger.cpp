#include "kinlab/schrodinger.hpp"

#include <cmath>
#include <numbers>

namespace kinlab::schrodinger {

namespace {

const double kPi = std::numbers::pi;

std::vector<double> kinetic_energy(const Grid& g) {
    std::vector<double> e(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        RVec p = g.momentum_at(k);
        e[k] = 0.5 * (p[0] * p[0] + p[1] * p[1]);
    }
    return e;
}

}  // namespace

int EvolutionParams::steps() const { return std::max(0, int(std::lround(t / dt))); }

void EvolutionParams::validate(const Grid& g) const {
    require(dt > 0, "evolution: dt must be positive");
    require(eps >= 0, "evolution: eps must be nonnegative");
    require(t >= 0, "evolution: t must be nonnegative");
    require(scheme == "strang", "evolution: unknown scheme " + scheme);
    require(dt * g.max_momentum2() / 2 < kPi, "evolution: dt * max|p|^2 / 2 >= pi (aliasing guard)");
}

CVec free_evolve(const CVec& psi, const Grid& g, double s) {
    require(std::isfinite(s), "free_evolve: s must be finite");
    require(psi.size() == g.size(), "free_evolve: size mismatch");
    CVec f = psi;
    fft_forward(g, f);
    auto e = kinetic_energy(g);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] *= std::exp(cplx(0, -s * e[k]));
    fft_inverse(g, f);
    return f;
}

SplitStepper::SplitStepper(const Grid& g, const std::vector<double>& V, double eps, double dt) : g_(g) {
    require(V.size() == g.size(), "split step: potential size mismatch");
    half_pot_.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) half_pot_[k] = std::exp(cplx(0, -0.5 * dt * eps * V[k]));
    auto e = kinetic_energy(g);
    kin_.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) kin_[k] = std::exp(cplx(0, -dt * e[k]));
}

void SplitStepper::step(CVec& psi) const { evolve(psi, 1); }

void SplitStepper::evolve(CVec& psi, int nsteps) const {
    if (nsteps <= 0) return;
    const std::size_t N = psi.size();
    for (std::size_t k = 0; k < N; ++k) psi[k] *= half_pot_[k];
    for (int s = 0; s < nsteps; ++s) {
        fft_forward(g_, psi);
        for (std::size_t k = 0; k < N; ++k) psi[k] *= kin_[k];
        fft_inverse(g_, psi);
        // merge consecutive half steps
        if (s + 1 < nsteps)
            for (std::size_t k = 0; k < N; ++k) psi[k] *= half_pot_[k] * half_pot_[k];
    }
    for (std::size_t k = 0; k < N; ++k) psi[k] *= half_pot_[k];
}

CVec split_step_evolve(const CVec& psi, const potential::PotentialField& V, const EvolutionParams& p) {
    const Grid& g = V.grid;
    p.validate(g);
    require(psi.size() == g.size(), "split step: size mismatch");
    int n = p.steps();
    double dt = n > 0 ? p.t / n : p.dt;
    SplitStepper st(g, V.values, p.eps, dt);
    CVec out = psi;
    st.evolve(out, n);
    return out;
}

CVec born_term(int k, const std::vector<double>& V, double eps, const CVec& psi, const Grid& g, double t,
               const BornQuadrature& quad) {
    require(k >= 0 && k <= 2, "born_term: k must be 0, 1 or 2");
    require(quad.nodes >= 16 && quad.panels >= 1, "born_term: need >= 16 quadrature nodes");
    require(V.size() == g.size() && psi.size() == g.size(), "born_term: size mismatch");
    if (k == 0) return free_evolve(psi, g, t);
    const std::size_t N = g.size();
    auto e = kinetic_energy(g);
    CVec hat = psi;
    fft_forward(g, hat);

    // Fourier transform of -i eps V applied to the real-space vector of f_hat
    auto kick = [&](CVec f) {
        fft_inverse(g, f);
        for (std::size_t j = 0; j < N; ++j) f[j] *= cplx(0, -eps * V[j]);
        fft_forward(g, f);
        return f;
    };
    auto propagate = [&](const CVec& f, double s) {
        CVec out(N);
        for (std::size_t j = 0; j < N; ++j) out[j] = f[j] * std::exp(cplx(0, -s * e[j]));
        return out;
    };
    // T1(s) in Fourier space
    auto first = [&](double s) {
        CVec acc(N, 0.0);
        if (s <= 0) return acc;
        auto q = gauss_legendre(quad.nodes, 0.0, s, quad.panels);
        for (std::size_t i = 0; i < q.x.size(); ++i) {
            CVec f = propagate(kick(propagate(hat, q.x[i])), s - q.x[i]);
            for (std::size_t j = 0; j < N; ++j) acc[j] += q.w[i] * f[j];
        }
        return acc;
    };

    CVec res;
    if (k == 1) {
        res = first(t);
    } else {
        res.assign(N, 0.0);
        auto q = gauss_legendre(quad.nodes, 0.0, t, quad.panels);
        for (std::size_t i = 0; i < q.x.size(); ++i) {
            CVec f = propagate(kick(first(q.x[i])), t - q.x[i]);
            for (std::size_t j = 0; j < N; ++j) res[j] += q.w[i] * f[j];
        }
    }
    fft_inverse(g, res);
    return res;
}

Matrix propagator(const Grid& g, const std::vector<double>& V, double eps, double t, double dt) {
    const std::size_t N = g.size();
    require(N <= 1024, "propagator: dense matrices limited to 1024 points");
    Matrix U = Matrix::Identity(N, N);
    int n = std::max(0, int(std::lround(t / dt)));
    if (n == 0) return U;
    SplitStepper st(g, V, eps, t / n);
    CVec col(N);
    for (std::size_t c = 0; c < N; ++c) {
        std::fill(col.begin(), col.end(), cplx(0.0));
        col[c] = 1.0;
        st.evolve(col, n);
        for (std::size_t r = 0; r < N; ++r) U(r, c) = col[r];
    }
    return U;
}

Matrix sample_propagator(const Grid& g, const ChannelParams& p, int sample) {
    std::vector<double> cuts = {0.0};
    for (double s : p.refresh_times) {
        require(s > cuts.back() && s < p.evo.t, "channel: refresh times must increase inside (0, t)");
        cuts.push_back(s);
    }
    cuts.push_back(p.evo.t);
    std::uint64_t sseed = derive_seed(p.seed, hash_string("channel-sample"), std::uint64_t(sample));
    Matrix U = Matrix::Identity(g.size(), g.size());
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
        double len = cuts[j + 1] - cuts[j];
        if (len <= 0) continue;
        std::vector<double> V(g.size(), 0.0);
        if (p.evo.eps > 0) V = potential::sample_potential(p.potential, g, derive_seed(sseed, 0, j)).values;
        U = propagator(g, V, p.evo.eps, len, p.evo.dt) * U;
    }
    return U;
}

std::vector<ChannelEstimate> evolution_channel_mc(const std::vector<Matrix>& As, const Grid& g,
                                                  const ChannelParams& p) {
    p.evo.validate(g);
    require(p.n_samples >= 10, "channel: need at least 10 samples");
    const Eigen::Index N = Eigen::Index(g.size());
    for (const auto& A : As) require(A.rows() == N && A.cols() == N, "channel: observable size mismatch");

    std::vector<std::vector<CompensatedSum<cplx>>> sum(As.size(), std::vector<CompensatedSum<cplx>>(N * N));
    // Welford second moments around the running mean
    std::vector<std::vector<cplx>> run_mean(As.size(), std::vector<cplx>(N * N, 0.0));
    std::vector<std::vector<double>> m2(As.size(), std::vector<double>(N * N, 0.0));
    for (int s = 0; s < p.n_samples; ++s) {
        Matrix U = sample_propagator(g, p, s);
        for (std::size_t a = 0; a < As.size(); ++a) {
            Matrix C = U.adjoint() * As[a] * U;
            for (Eigen::Index j = 0; j < N; ++j)
                for (Eigen::Index i = 0; i < N; ++i) {
                    std::size_t e = std::size_t(j * N + i);
                    sum[a][e].add(C(i, j));
                    cplx d = C(i, j) - run_mean[a][e];
                    run_mean[a][e] += d / double(s + 1);
                    m2[a][e] += std::real(d * std::conj(C(i, j) - run_mean[a][e]));
                }
        }
    }
    std::vector<ChannelEstimate> out(As.size());
    const double n = p.n_samples;
    for (std::size_t a = 0; a < As.size(); ++a) {
        auto& est = out[a];
        est.n_samples = p.n_samples;
        est.mean = Matrix(N, N);
        double tot = 0;
        for (Eigen::Index j = 0; j < N; ++j)
            for (Eigen::Index i = 0; i < N; ++i) {
                cplx m = sum[a][j * N + i].value() / n;
                est.mean(i, j) = m;
                double var = std::max(0.0, m2[a][j * N + i] / (n - 1));
                double se = std::sqrt(var / n);
                est.max_stderr = std::max(est.max_stderr, se);
                tot += se;
            }
        est.mean_stderr = tot / double(N * N);
        est.flagged = p.target_stderr > 0 && est.max_stderr > p.target_stderr;
    }
    return out;
}

ChannelEstimate evolution_channel_mc(const Matrix& A, const Grid& g, const ChannelParams& p) {
    return evolution_channel_mc(std::vector<Matrix>{A}, g, p).front();
}

cplx plane_wave_pairing(const Grid& g, const CVec& psi, const RVec& kappa, const std::vector<cplx>& mult) {
    require(psi.size() == g.size() && mult.size() == g.size(), "plane_wave_pairing: size mismatch");
    for (int a = 0; a < g.d; ++a) {
        double m = 0.5 * kappa[a] / g.dp();
        require(std::abs(m - std::round(m)) < 1e-9, "plane_wave_pairing: kappa / 2 must be a lattice momentum");
    }
    const std::size_t N = g.size();
    CVec phi(N), chi(N);
    for (std::size_t k = 0; k < N; ++k) {
        RVec x = g.position(k);
        cplx ph = std::exp(cplx(0, 0.5 * (kappa[0] * x[0] + kappa[1] * x[1])));
        phi[k] = ph * psi[k];
        chi[k] = std::conj(ph) * psi[k];
    }
    fft_forward(g, phi);
    for (std::size_t k = 0; k < N; ++k) phi[k] *= mult[k];
    fft_inverse(g, phi);
    CompensatedSum<cplx> s;
    for (std::size_t k = 0; k < N; ++k) s.add(std::conj(chi[k]) * phi[k]);
    return s.value() * g.cell_volume();
}

}  // namespace kinlab::schrodinger
