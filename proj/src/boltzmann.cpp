#include "kinlab/boltzmann.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <unsupported/Eigen/MatrixFunctions>

namespace kinlab::boltzmann {

namespace {

const double kPi = std::numbers::pi;

void check_same_layout(const KineticState& a, const CollisionKernel& k) {
    require(a.shells.d == k.shells.d && a.shells.radii == k.shells.radii && a.shells.n_angles == k.shells.n_angles,
            "boltzmann: kernel built for different shells");
    require(a.space.d == a.shells.d, "boltzmann: space and momentum dimensions differ");
}

// per-node spatial FFT of the state, in place
void to_modes(KineticState& s) {
    const std::size_t N = s.nx();
    CVec buf(N);
    for (std::size_t node = 0; node < s.shells.total_nodes(); ++node) {
        std::copy(s.f.begin() + node * N, s.f.begin() + (node + 1) * N, buf.begin());
        fft_forward(s.space, buf);
        std::copy(buf.begin(), buf.end(), s.f.begin() + node * N);
    }
}

void from_modes(KineticState& s) {
    const std::size_t N = s.nx();
    CVec buf(N);
    for (std::size_t node = 0; node < s.shells.total_nodes(); ++node) {
        std::copy(s.f.begin() + node * N, s.f.begin() + (node + 1) * N, buf.begin());
        fft_inverse(s.space, buf);
        std::copy(buf.begin(), buf.end(), s.f.begin() + node * N);
    }
}

double dot(const RVec& a, const RVec& b) { return a[0] * b[0] + a[1] * b[1]; }

// (e^z - 1) / z
cplx phi1(cplx z) {
    if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
    return (std::exp(z) - 1.0) / z;
}

// apply a per-shell M x M real matrix to every spatial point
void apply_shell_matrix(KineticState& s, std::size_t shell, const Eigen::MatrixXd& P) {
    const int M = s.shells.nodes();
    const std::size_t N = s.nx();
    Eigen::Map<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> block(
        s.f.data() + shell * M * N, M, Eigen::Index(N));
    Eigen::MatrixXcd out = P.cast<cplx>() * block;
    block = out;
}

}  // namespace

RVec ShellGrid::momentum(std::size_t shell, int j) const {
    double r = radii.at(shell);
    if (d == 1) return {j == 0 ? r : -r, 0.0};
    double th = 2 * kPi * j / n_angles;
    return {r * std::cos(th), r * std::sin(th)};
}

double ShellGrid::angle_weight() const { return d == 1 ? 1.0 : 2 * kPi / n_angles; }

double ShellGrid::jacobian(std::size_t shell) const {
    double r = radii.at(shell);
    return d == 1 ? 0.5 / r : 0.5;
}

void ShellGrid::validate() const {
    require(d == 1 || d == 2, "shells: d must be 1 or 2");
    require(!radii.empty(), "shells: need at least one shell");
    for (double r : radii) require(r > 0 && std::isfinite(r), "shells: radii must be positive");
    require(d == 1 || n_angles >= 2, "shells: need at least 2 angles");
}

KineticState KineticState::zeros(const Grid& space, const ShellGrid& shells) {
    validate_grid(space);
    shells.validate();
    require(space.d == shells.d, "kinetic state: dimension mismatch");
    KineticState s;
    s.space = space;
    s.shells = shells;
    s.f.assign(space.size() * shells.total_nodes(), 0.0);
    return s;
}

double KineticState::shell_mass(std::size_t shell) const {
    CompensatedSum<double> acc;
    for (int j = 0; j < shells.nodes(); ++j)
        for (std::size_t x = 0; x < nx(); ++x) acc.add(at(shell, j, x).real());
    return acc.value() * space.cell_volume() * shells.angle_weight();
}

double KineticState::mass() const {
    double m = 0;
    for (std::size_t s = 0; s < shells.radii.size(); ++s) m += shell_mass(s);
    return m;
}

double KineticState::second_moment(std::size_t shell) const {
    CompensatedSum<double> acc;
    for (int j = 0; j < shells.nodes(); ++j)
        for (std::size_t x = 0; x < nx(); ++x) {
            RVec p = space.position(x);
            acc.add(dot(p, p) * at(shell, j, x).real());
        }
    return acc.value() * space.cell_volume() * shells.angle_weight();
}

double KineticState::sup_norm() const {
    double m = 0;
    for (auto v : f) m = std::max(m, std::abs(v));
    return m;
}

double golden_rule_prefactor(int d) { return 4 * kPi / std::pow(2 * kPi, d); }

CollisionKernel CollisionKernel::build(const RadialTransform& Rhat, double eps, const ShellGrid& shells,
                                       double prefactor) {
    shells.validate();
    require(eps >= 0, "kernel: eps must be nonnegative");
    CollisionKernel k;
    k.eps = eps;
    k.prefactor = prefactor;
    k.shells = shells;
    const int M = shells.nodes();
    for (std::size_t s = 0; s < shells.radii.size(); ++s) {
        Eigen::MatrixXd G(M, M);
        double w = shells.node_weight(s);
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j) {
                RVec a = shells.momentum(s, i), b = shells.momentum(s, j);
                RVec dlt{a[0] - b[0], a[1] - b[1]};
                G(i, j) = prefactor * Rhat(std::sqrt(dot(dlt, dlt))) * w;
            }
        G = 0.5 * (G + G.transpose());
        std::vector<double> K(M);
        for (int i = 0; i < M; ++i) K[i] = G.row(i).sum();
        k.gain.push_back(G);
        k.K.push_back(K);
    }
    return k;
}

CollisionKernel CollisionKernel::build(const potential::CorrelationProfile& R, double eps, const ShellGrid& shells) {
    int d = shells.d;
    return build([&R, d](double q) { return R.fourier(q, d); }, eps, shells, golden_rule_prefactor(d));
}

double CollisionKernel::max_K() const {
    double m = 0;
    for (const auto& row : K)
        for (double v : row) m = std::max(m, v);
    return m;
}

Eigen::MatrixXd CollisionKernel::generator(std::size_t shell) const {
    Eigen::MatrixXd C = gain.at(shell);
    for (Eigen::Index i = 0; i < C.rows(); ++i) C(i, i) -= K[shell][i];
    return eps * eps * C;
}

KineticState collision_operator(const KineticState& f, const CollisionKernel& kernel) {
    check_same_layout(f, kernel);
    KineticState out = f;
    for (std::size_t s = 0; s < f.shells.radii.size(); ++s) apply_shell_matrix(out, s, kernel.generator(s));
    return out;
}

KineticState transport(const KineticState& f, double s) {
    KineticState out = f;
    if (s == 0) return out;
    to_modes(out);
    const std::size_t N = out.nx();
    for (std::size_t sh = 0; sh < out.shells.radii.size(); ++sh)
        for (int j = 0; j < out.shells.nodes(); ++j) {
            RVec p = out.shells.momentum(sh, j);
            for (std::size_t k = 0; k < N; ++k)
                out.at(sh, j, k) *= std::exp(cplx(0, -s * dot(p, out.space.momentum_at(k))));
        }
    from_modes(out);
    return out;
}

ClassicalTerms duhamel_terms_classical(const KineticState& a0, double t, const CollisionKernel& kernel) {
    check_same_layout(a0, kernel);
    ClassicalTerms T{transport(a0, -t), KineticState::zeros(a0.space, a0.shells), KineticState{}};
    const double e2 = kernel.eps * kernel.eps;
    T.T2 = T.T0;
    for (std::size_t s = 0; s < a0.shells.radii.size(); ++s)
        for (int j = 0; j < a0.shells.nodes(); ++j)
            for (std::size_t x = 0; x < a0.nx(); ++x) T.T2.at(s, j, x) *= -e2 * t * kernel.K[s][j];

    KineticState hat = a0;
    to_modes(hat);
    const int M = a0.shells.nodes();
    for (std::size_t s = 0; s < a0.shells.radii.size(); ++s)
        for (std::size_t k = 0; k < a0.nx(); ++k) {
            RVec kap = a0.space.momentum_at(k);
            for (int j = 0; j < M; ++j) {
                double kp = dot(kap, a0.shells.momentum(s, j));
                cplx acc = 0;
                for (int q = 0; q < M; ++q) {
                    double kq = dot(kap, a0.shells.momentum(s, q));
                    // int_0^t exp(i kappa.((t - u) p + u q)) du
                    cplx I = t * std::exp(cplx(0, kp * t)) * phi1(cplx(0, (kq - kp) * t));
                    acc += kernel.gain[s](j, q) * I * hat.at(s, q, k);
                }
                T.T1.at(s, j, k) = e2 * acc;
            }
        }
    from_modes(T.T1);
    return T;
}

SeriesResult boltzmann_series(const KineticState& f0, double t, int j_max, const CollisionKernel& kernel,
                              Direction dir) {
    check_same_layout(f0, kernel);
    require(j_max >= 0, "series: j_max must be nonnegative");
    require(t >= 0, "series: t must be nonnegative");
    const int M = f0.shells.nodes();
    const std::size_t N = f0.nx();
    const double e2 = kernel.eps * kernel.eps;
    const double sigma = dir == Direction::Forward ? -1.0 : 1.0;
    const double strength = 2 * e2 * t * kernel.max_K();
    // contour radius balancing the Taylor coefficients
    const double rho = strength > 0 ? std::clamp(1.0 / strength, 1e-6, 1e6) : 1.0;
    const int Q = 2 * (j_max + 1) + 24;

    std::vector<KineticState> g(j_max + 1, KineticState::zeros(f0.space, f0.shells));
    KineticState hat = f0;
    to_modes(hat);
    std::vector<Eigen::MatrixXcd> lams(Q);
    for (std::size_t s = 0; s < f0.shells.radii.size(); ++s) {
        Eigen::MatrixXcd C = kernel.generator(s).cast<cplx>();
        for (std::size_t k = 0; k < N; ++k) {
            RVec kap = f0.space.momentum_at(k);
            Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(M, M);
            Eigen::VectorXcd v(M);
            for (int j = 0; j < M; ++j) {
                A(j, j) = cplx(0, sigma * dot(kap, f0.shells.momentum(s, j)));
                v(j) = hat.at(s, j, k);
            }
            if (v.cwiseAbs().maxCoeff() == 0.0) continue;
            std::vector<Eigen::VectorXcd> acc(j_max + 1, Eigen::VectorXcd::Zero(M));
            for (int q = 0; q < Q; ++q) {
                cplx lam = rho * std::exp(cplx(0, 2 * kPi * q / Q));
                Eigen::MatrixXcd E = (t * (A + lam * C)).exp();
                Eigen::VectorXcd fv = E * v;
                cplx inv = 1.0 / lam, pw = 1.0;
                for (int j = 0; j <= j_max; ++j) {
                    acc[j] += pw * fv;
                    pw *= inv;
                }
            }
            for (int j = 0; j <= j_max; ++j)
                for (int m = 0; m < M; ++m) g[j].at(s, m, k) = acc[j](m) / double(Q);
        }
    }
    SeriesResult res{KineticState::zeros(f0.space, f0.shells), {}};
    int growth = 0;
    for (int j = 0; j <= j_max; ++j) {
        from_modes(g[j]);
        double nrm = g[j].sup_norm();
        if (j > 0 && res.term_norms.back() > 0 && nrm > res.term_norms.back()) {
            if (++growth >= 3) throw Error("series: terms grew for 3 consecutive orders (divergence)");
        } else {
            growth = 0;
        }
        res.term_norms.push_back(nrm);
        for (std::size_t i = 0; i < res.sum.f.size(); ++i) res.sum.f[i] += g[j].f[i];
    }
    return res;
}

Eigen::MatrixXd collision_propagator(const CollisionKernel& kernel, std::size_t shell, double tau) {
    Eigen::MatrixXd C = kernel.generator(shell);
    const Eigen::Index M = C.rows();
    if (M <= 128) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
        Eigen::VectorXd ex = (tau * es.eigenvalues().array()).exp();
        return es.eigenvectors() * ex.asDiagonal() * es.eigenvectors().transpose();
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(M, M) - tau * C;
    return A.inverse();
}

KineticState solve_boltzmann(const KineticState& f0, double t, double dt, const CollisionKernel& kernel,
                             Direction dir) {
    check_same_layout(f0, kernel);
    require(dt > 0 && t >= 0, "solver: need dt > 0 and t >= 0");
    require(dt * kernel.eps * kernel.eps * kernel.max_K() <= 0.1, "solver: dt eps^2 max K > 0.1");
    int n = int(std::ceil(t / dt - 1e-12));
    KineticState f = f0;
    if (n == 0) return f;
    double h = t / n;
    std::vector<Eigen::MatrixXd> half;
    for (std::size_t s = 0; s < f0.shells.radii.size(); ++s) half.push_back(collision_propagator(kernel, s, 0.5 * h));

    // transport multipliers per node and mode
    const std::size_t N = f.nx();
    const int M = f.shells.nodes();
    const double sign = dir == Direction::Forward ? 1.0 : -1.0;
    CVec mult(f.f.size());
    for (std::size_t s = 0; s < f.shells.radii.size(); ++s)
        for (int j = 0; j < M; ++j) {
            RVec p = f.shells.momentum(s, j);
            for (std::size_t k = 0; k < N; ++k)
                mult[(s * M + j) * N + k] = std::exp(cplx(0, -sign * h * dot(p, f.space.momentum_at(k))));
        }
    for (int step = 0; step < n; ++step) {
        for (std::size_t s = 0; s < half.size(); ++s) apply_shell_matrix(f, s, half[s]);
        to_modes(f);
        for (std::size_t i = 0; i < f.f.size(); ++i) f.f[i] *= mult[i];
        from_modes(f);
        for (std::size_t s = 0; s < half.size(); ++s) apply_shell_matrix(f, s, half[s]);
    }
    return f;
}

DiffusionEstimate diffusion_diagnostics(const CollisionKernel& kernel, std::size_t shell,
                                        const DiffusionParams& params) {
    require(shell < kernel.shells.radii.size(), "diffusion: shell out of range");
    require(params.n_particles >= 100, "diffusion: need at least 100 particles");
    const int M = kernel.shells.nodes();
    const int d = kernel.shells.d;
    const double e2 = kernel.eps * kernel.eps;
    std::vector<double> rate(M);
    std::vector<std::discrete_distribution<int>> jump;
    for (int j = 0; j < M; ++j) {
        rate[j] = e2 * kernel.K[shell][j];
        require(rate[j] > 0, "diffusion: zero scattering rate");
        std::vector<double> row(kernel.gain[shell].row(j).data(), kernel.gain[shell].row(j).data() + M);
        jump.emplace_back(row.begin(), row.end());
    }
    double mean_rate = 0;
    for (double r : rate) mean_rate += r / M;

    DiffusionEstimate est;
    est.mean_free_time = 1.0 / mean_rate;
    est.horizon = params.horizon > 0 ? params.horizon : 200 * est.mean_free_time;
    est.horizon_too_short = est.horizon < 50 * est.mean_free_time;
    const double dts = params.sample_dt > 0 ? params.sample_dt : est.mean_free_time / 10;
    const int S = std::max(4, int(std::lround(est.horizon / dts)));
    // lag window: half the horizon; time origins every `stride` samples
    const int W = std::max(2, S / 2);
    const int stride = std::max(1, S / 200);
    const int B = 10;

    // per batch: GK integrals per axis, MSD per axis and lag
    std::vector<std::array<CompensatedSum<double>, 2>> gk(B);
    std::vector<std::array<std::vector<double>, 2>> msd(B, {std::vector<double>(W + 1, 0.0), std::vector<double>(W + 1, 0.0)});
    std::vector<long> gk_count(B, 0), msd_count(B, 0);

    std::vector<RVec> vel(S + 1), pos(S + 1);
    for (int pidx = 0; pidx < params.n_particles; ++pidx) {
        auto rng = make_rng(params.seed, hash_string("diffusion"), std::uint64_t(pidx));
        std::uniform_int_distribution<int> start(0, M - 1);
        int j = start(rng);
        RVec x{0, 0};
        double tl = 0;
        double next = std::exponential_distribution<double>(rate[j])(rng);
        for (int m = 0; m <= S; ++m) {
            double tm = m * dts;
            while (next < tm) {
                RVec v = kernel.shells.momentum(shell, j);
                x = {x[0] + v[0] * (next - tl), x[1] + v[1] * (next - tl)};
                tl = next;
                j = jump[j](rng);
                next = tl + std::exponential_distribution<double>(rate[j])(rng);
            }
            RVec v = kernel.shells.momentum(shell, j);
            pos[m] = {x[0] + v[0] * (tm - tl), x[1] + v[1] * (tm - tl)};
            vel[m] = v;
        }
        int b = pidx % B;
        // int_0^W <v(0) v(s)> ds = <v(o) (x(o + W) - x(o))>
        for (int o = 0; o + W <= S; o += stride) {
            for (int a = 0; a < d; ++a) gk[b][a].add(vel[o][a] * (pos[o + W][a] - pos[o][a]));
            ++gk_count[b];
        }
        for (int o = 0; o + W <= S; o += stride) {
            for (int l = 0; l <= W; ++l)
                for (int a = 0; a < d; ++a) {
                    double dx = pos[o + l][a] - pos[o][a];
                    msd[b][a][l] += dx * dx;
                }
            ++msd_count[b];
        }
    }

    // least-squares slope over the second half of the lag window
    auto slope = [&](const std::vector<double>& y) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (int l = W / 2; l <= W; ++l) {
            double tm = l * dts;
            sx += tm;
            sy += y[l];
            sxx += tm * tm;
            sxy += tm * y[l];
            ++cnt;
        }
        return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    };

    long gk_tot = 0, msd_tot = 0;
    for (int b = 0; b < B; ++b) {
        gk_tot += gk_count[b];
        msd_tot += msd_count[b];
    }
    std::array<std::vector<double>, 2> curve{std::vector<double>(W + 1, 0.0), std::vector<double>(W + 1, 0.0)};
    for (int a = 0; a < d; ++a) {
        double g = 0;
        for (int b = 0; b < B; ++b) {
            g += gk[b][a].value();
            for (int l = 0; l <= W; ++l) curve[a][l] += msd[b][a][l];
        }
        est.D_gk_axis[a] = g / double(gk_tot);
        std::vector<double> bm;
        for (int b = 0; b < B; ++b)
            if (gk_count[b] > 0) bm.push_back(gk[b][a].value() / double(gk_count[b]));
        double m = 0, v = 0;
        for (double x : bm) m += x / bm.size();
        for (double x : bm) v += (x - m) * (x - m) / (bm.size() - 1);
        est.D_gk_axis_stderr[a] = std::sqrt(v / bm.size());
        est.D_gk += est.D_gk_axis[a] / d;
        for (auto& v : curve[a]) v /= double(msd_tot);
        est.D_msd_axis[a] = slope(curve[a]) / 2;
        est.D_msd += est.D_msd_axis[a] / d;
    }
    for (int l = 0; l <= W; ++l) {
        est.times.push_back(l * dts);
        est.msd.push_back(curve[0][l] + curve[1][l]);
    }
    std::vector<double> bd;
    for (int b = 0; b < B; ++b) {
        if (msd_count[b] == 0) continue;
        std::vector<double> y(W + 1, 0.0);
        for (int a = 0; a < d; ++a)
            for (int l = 0; l <= W; ++l) y[l] += msd[b][a][l] / double(msd_count[b]);
        bd.push_back(slope(y) / (2 * d));
    }
    double mb = 0, vb = 0;
    for (double v : bd) mb += v / bd.size();
    for (double v : bd) vb += (v - mb) * (v - mb) / (bd.size() - 1);
    est.D_msd_stderr = std::sqrt(vb / bd.size());
    return est;
}

void export_state(const KineticState& f, const std::string& path) {
    std::ofstream bin(path + ".bin", std::ios::binary);
    require(bool(bin), "export_state: cannot open " + path + ".bin");
    for (cplx v : f.f)
        for (double c : {v.real(), v.imag()}) {
            std::uint64_t u = std::bit_cast<std::uint64_t>(c);
            if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
            bin.write(reinterpret_cast<const char*>(&u), sizeof u);
        }
    nlohmann::json j;
    j["dim"] = f.space.d;
    j["space_points"] = f.space.n;
    j["extent"] = f.space.L;
    j["shell_radii"] = f.shells.radii;
    j["nodes_per_shell"] = f.shells.nodes();
    j["layout"] = "[(shell * nodes + j) * space + x], complex interleaved";
    j["dtype"] = "float64-le";
    std::ofstream meta(path + ".json");
    meta << j.dump(2) << "\n";
}

}  // namespace kinlab::boltzmann
