#include "kinlab/wavepacket.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace kinlab::wavepacket {

namespace {

constexpr double kPi = std::numbers::pi;

double raw_bump(double u) {
    if (u >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - u * u));
}

int mod(int a, int n) { return ((a % n) + n) % n; }

// signed representative in [-n/2, n/2)
int signed_slot(int m, int n) {
    m = mod(m, n);
    return m < n / 2 ? m : m - n;
}

// half-grid cells receiving the pair (i, i + m) along one axis; the pair at
// separation n/2 is shared by two midpoints
int axis_splits(int i, int m, int n, int out_s[2], double out_w[2]) {
    int s = mod(2 * i + m, 2 * n);
    if (m == -n / 2) {
        out_s[0] = s;
        out_s[1] = mod(s + n, 2 * n);
        out_w[0] = out_w[1] = 0.5;
        return 2;
    }
    out_s[0] = s;
    out_w[0] = 1.0;
    return 1;
}

// all (s_flat, weight) for pair (i, i + m) in d dims
std::vector<std::pair<std::size_t, double>> pair_cells(const Grid& g, const int i[2], const int m[2]) {
    int sx[2], sy[2] = {0, 0};
    double wx[2], wy[2] = {1.0, 1.0};
    int cx = axis_splits(i[0], m[0], g.n, sx, wx);
    int cy = g.d == 2 ? axis_splits(i[1], m[1], g.n, sy, wy) : 1;
    std::vector<std::pair<std::size_t, double>> out;
    for (int a = 0; a < cx; ++a)
        for (int b = 0; b < cy; ++b) out.emplace_back(std::size_t(sy[b]) * 2 * g.n + sx[a], wx[a] * wy[b]);
    return out;
}

void unflatten(const Grid& g, std::size_t k, int out[2]) {
    out[0] = int(k % g.n);
    out[1] = g.d == 2 ? int(k / g.n) : 0;
}

std::size_t flatten(const Grid& g, int ix, int iy) { return g.d == 2 ? std::size_t(iy) * g.n + ix : std::size_t(ix); }

}  // namespace

Envelope Envelope::make(double r, int d) {
    require(r > 0, "envelope scale must be positive");
    require(d == 1 || d == 2, "envelope dimension must be 1 or 2");
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    auto sq = [](double u) { double b = raw_bump(u); return b * b; };
    double I = d == 1 ? 2.0 * GK::integrate(sq, 0.0, 1.0, 12, 1e-15)
                      : 2.0 * kPi * GK::integrate([&](double u) { return sq(u) * u; }, 0.0, 1.0, 12, 1e-15);
    Envelope e;
    e.r = r;
    e.d = d;
    e.norm = 1.0 / std::sqrt(I);
    return e;
}

double Envelope::operator()(double u) const { return norm * raw_bump(std::abs(u)); }

cplx inner(const Grid& g, const CVec& f, const CVec& h) {
    require(f.size() == h.size(), "inner: size mismatch");
    CompensatedSum<cplx> s;
    for (std::size_t i = 0; i < f.size(); ++i) s.add(std::conj(f[i]) * h[i]);
    return s.value() * g.cell_volume();
}

double l2norm(const Grid& g, const CVec& f) { return std::sqrt(inner(g, f, f).real()); }

CVec make_wavepacket(const PhasePoint& xi, const Envelope& env, const Grid& g) {
    validate_grid(g);
    require(env.d == g.d, "make_wavepacket: envelope dimension mismatch");
    require(env.r >= 4.0 * g.h(), "make_wavepacket: r must be at least 4 grid spacings");
    require(4.0 * env.r <= g.L, "make_wavepacket: wavepacket does not fit the torus");
    CVec phi(g.size());
    double amp = std::pow(env.r, -0.5 * g.d);
    for (std::size_t k = 0; k < g.size(); ++k) {
        RVec y = g.position(k);
        RVec w = g.wrap(RVec{y[0] - xi.x[0], y[1] - xi.x[1]});
        double c = env(g.norm(w) / env.r);
        if (c == 0.0) continue;
        double ph = (xi.x[0] + w[0]) * xi.p[0] + (g.d == 2 ? (xi.x[1] + w[1]) * xi.p[1] : 0.0);
        phi[k] = amp * c * cplx(std::cos(ph), std::sin(ph));
    }
    return phi;
}

double phase_distance(const PhasePoint& a, const PhasePoint& b, double r, double L) {
    require(r > 0, "phase_distance: r must be positive");
    auto wrap = [L](double v) {
        if (L <= 0) return v;
        v = std::fmod(v, L);
        if (v >= 0.5 * L) v -= L;
        if (v < -0.5 * L) v += L;
        return v;
    };
    double dx = std::hypot(wrap(a.x[0] - b.x[0]), wrap(a.x[1] - b.x[1]));
    double dp = std::hypot(a.p[0] - b.p[0], a.p[1] - b.p[1]);
    return dx / r + r * dp;
}

std::size_t Observable::nx() const { return grid.d == 2 ? std::size_t(4) * grid.n * grid.n : std::size_t(2) * grid.n; }

std::size_t Observable::np() const { return grid.size(); }

RVec Observable::x_at(std::size_t s) const {
    int n2 = 2 * grid.n;
    double hh = 0.5 * grid.h();
    int sx = int(s % n2), sy = int(s / n2);
    return {-0.5 * grid.L + sx * hh, grid.d == 2 ? -0.5 * grid.L + sy * hh : 0.0};
}

Observable sample_observable(const Grid& g, const SymbolFn& a, double r, double L) {
    validate_grid(g);
    Observable o;
    o.grid = g;
    o.r = r;
    o.L = L;
    o.values.resize(o.nx() * o.np());
    for (std::size_t s = 0; s < o.nx(); ++s) {
        RVec x = o.x_at(s);
        for (std::size_t k = 0; k < o.np(); ++k) o(s, k) = a(x, o.p_at(k));
    }
    return o;
}

bool has_good_support(const Observable& a, double p_min) {
    for (std::size_t k = 0; k < a.np(); ++k) {
        if (a.grid.norm(a.p_at(k)) >= p_min) continue;
        for (std::size_t s = 0; s < a.nx(); ++s)
            if (a(s, k) != cplx(0.0)) return false;
    }
    return true;
}

Observable wigner_transform(const CVec& psi, const Grid& g) {
    validate_grid(g);
    require(psi.size() == g.size(), "wigner_transform: size mismatch");
    Observable W;
    W.grid = g;
    std::size_t nx = W.nx(), np = W.np();
    W.values.assign(nx * np, 0.0);
    // c_s(m) accumulated in W.values, m in FFT slots
    for (std::size_t a = 0; a < g.size(); ++a) {
        int i[2];
        unflatten(g, a, i);
        for (std::size_t mk = 0; mk < np; ++mk) {
            int ms[2];
            unflatten(g, mk, ms);
            int m[2] = {signed_slot(ms[0], g.n), g.d == 2 ? signed_slot(ms[1], g.n) : 0};
            std::size_t b = flatten(g, mod(i[0] + m[0], g.n), mod(i[1] + m[1], g.n));
            cplx c = psi[a] * std::conj(psi[b]);
            if (c == cplx(0.0)) continue;
            for (auto [s, w] : pair_cells(g, i, m)) W.values[s * np + mk] += w * c;
        }
    }
    double scale = std::pow(2.0 * g.L, g.d);
    CVec row(np);
    for (std::size_t s = 0; s < nx; ++s) {
        std::copy(W.values.begin() + s * np, W.values.begin() + (s + 1) * np, row.begin());
        fft_inverse(g, row);
        for (std::size_t k = 0; k < np; ++k) W.values[s * np + k] = row[k] * scale;
    }
    return W;
}

cplx phase_pairing(const Observable& a, const Observable& W) {
    require(a.grid == W.grid && a.values.size() == W.values.size(), "phase_pairing: grid mismatch");
    CompensatedSum<cplx> s;
    for (std::size_t i = 0; i < a.values.size(); ++i) s.add(a.values[i] * W.values[i]);
    const Grid& g = a.grid;
    return s.value() * std::pow(0.5 * g.h() / g.L, g.d);
}

std::vector<double> wigner_position_marginal(const Observable& W) {
    const Grid& g = W.grid;
    std::vector<double> out(g.size(), 0.0);
    double scale = std::pow(0.5 / g.L, g.d);
    for (std::size_t s = 0; s < W.nx(); ++s) {
        int sx = int(s % (2 * g.n)), sy = int(s / (2 * g.n));
        std::size_t i = flatten(g, sx / 2, sy / 2);
        double acc = 0;
        for (std::size_t k = 0; k < W.np(); ++k) acc += W(s, k).real();
        out[i] += acc * scale;
    }
    return out;
}

Matrix weyl_quantize(const Observable& a) {
    const Grid& g = a.grid;
    require(g.size() <= 1024, "weyl_quantize: dense operators need n^d <= 1024");
    std::size_t nx = a.nx(), np = a.np();
    std::vector<cplx> ahat(nx * np);
    CVec row(np);
    for (std::size_t s = 0; s < nx; ++s) {
        std::copy(a.values.begin() + s * np, a.values.begin() + (s + 1) * np, row.begin());
        fft_inverse(g, row);
        std::copy(row.begin(), row.end(), ahat.begin() + s * np);
    }
    Matrix M = Matrix::Zero(g.size(), g.size());
    for (std::size_t ia = 0; ia < g.size(); ++ia) {
        int i[2];
        unflatten(g, ia, i);
        for (std::size_t mk = 0; mk < np; ++mk) {
            int ms[2];
            unflatten(g, mk, ms);
            int m[2] = {signed_slot(ms[0], g.n), g.d == 2 ? signed_slot(ms[1], g.n) : 0};
            std::size_t j = flatten(g, mod(i[0] + m[0], g.n), mod(i[1] + m[1], g.n));
            cplx v = 0;
            for (auto [s, w] : pair_cells(g, i, m)) v += w * ahat[s * np + mk];
            M(j, ia) = v;
        }
    }
    return M;
}

cplx expectation(const Grid& g, const Matrix& M, const CVec& psi) {
    Eigen::Map<const Eigen::VectorXcd> v(psi.data(), Eigen::Index(psi.size()));
    Eigen::VectorXcd Mv = M * v;
    return v.dot(Mv) * g.cell_volume();
}

WavepacketQuadrature default_quadrature(const Grid& g, const Envelope& env) {
    WavepacketQuadrature q;
    q.nx = int(std::ceil(4.0 * g.L / env.r - 1e-9));
    q.p_stride = 1;
    return q;
}

Matrix wavepacket_quantize(const SymbolFn& a, const Envelope& env, const Grid& g, const WavepacketQuadrature& quad) {
    validate_grid(g);
    require(env.d == g.d, "wavepacket_quantize: envelope dimension mismatch");
    require(g.size() <= 1024, "wavepacket_quantize: dense operators need n^d <= 1024");
    require(quad.nx > 0 && quad.p_stride > 0, "wavepacket_quantize: bad quadrature");
    require(4.0 * env.r <= g.L, "wavepacket_quantize: wavepacket does not fit the torus");
    double dx = g.L / quad.nx;
    double dpn = quad.p_stride * g.dp();
    if (quad.enforce_resolution) {
        require(dx <= env.r / 4.0 + 1e-12, "wavepacket_quantize: x quadrature coarser than r/4");
        require(dpn <= 1.0 / (4.0 * env.r) + 1e-12, "wavepacket_quantize: p quadrature coarser than 1/(4r)");
    }
    require(g.n % quad.p_stride == 0, "wavepacket_quantize: p stride must divide n");
    require(4.0 * env.r <= g.L / quad.p_stride, "wavepacket_quantize: p stride aliases the envelope");

    const std::size_t N = g.size();
    Matrix M = Matrix::Zero(N, N);
    int nodes_y = g.d == 2 ? quad.nx : 1;
    double pref = std::pow(g.h() * dx / env.r, g.d) * std::pow(double(quad.p_stride) * g.n / g.L, g.d);
    CVec ax(N);
    for (int ty = 0; ty < nodes_y; ++ty) {
        for (int tx = 0; tx < quad.nx; ++tx) {
            RVec X{-0.5 * g.L + tx * dx, g.d == 2 ? -0.5 * g.L + ty * dx : 0.0};
            for (std::size_t k = 0; k < N; ++k) {
                int kk[2];
                unflatten(g, k, kk);
                bool on = g.freq_index(kk[0]) % quad.p_stride == 0 &&
                          (g.d == 1 || g.freq_index(kk[1]) % quad.p_stride == 0);
                ax[k] = on ? a(X, g.momentum_at(k)) : cplx(0.0);
            }
            fft_inverse(g, ax);
            // grid points inside the window
            std::vector<std::pair<std::size_t, double>> pts;
            for (std::size_t y = 0; y < N; ++y) {
                RVec yp = g.position(y);
                double c = env(g.norm(g.wrap(RVec{yp[0] - X[0], yp[1] - X[1]})) / env.r);
                if (c != 0.0) pts.emplace_back(y, c);
            }
            for (auto [y, cy] : pts) {
                int iy[2];
                unflatten(g, y, iy);
                for (auto [yq, cq] : pts) {
                    int iq[2];
                    unflatten(g, yq, iq);
                    std::size_t slot = flatten(g, mod(iy[0] - iq[0], g.n), mod(iy[1] - iq[1], g.n));
                    M(y, yq) += pref * cy * cq * ax[slot];
                }
            }
        }
    }
    return M;
}

namespace {

// apply f to every 1D line of the (s, k) array along one axis
template <class F>
void along_axis(std::vector<cplx>& A, const Grid& g, bool x_axis, int axis, F f) {
    std::size_t np = g.size();
    std::size_t nxs = g.d == 2 ? std::size_t(4) * g.n * g.n : std::size_t(2) * g.n;
    int ext = x_axis ? 2 * g.n : g.n;
    std::size_t stride_in = x_axis ? (axis == 0 ? 1 : std::size_t(2) * g.n) : (axis == 0 ? 1 : std::size_t(g.n));
    std::size_t total = nxs * np;
    std::vector<cplx> line(ext);
    for (std::size_t base = 0; base < total; ++base) {
        std::size_t s = base / np, k = base % np;
        std::size_t c = x_axis ? s : k;
        std::size_t pos = (c / stride_in) % ext;
        if (pos != 0) continue;
        auto at = [&](int t) -> cplx& {
            return x_axis ? A[(s + t * stride_in) * np + k] : A[s * np + k + t * stride_in];
        };
        for (int t = 0; t < ext; ++t) line[t] = at(t);
        f(line);
        for (int t = 0; t < ext; ++t) at(t) = line[t];
    }
}

}  // namespace

CkNorm ck_norm(const Observable& a, int k, double r, double L) {
    const Grid& g = a.grid;
    require(k >= 0 && k <= 2 * g.d + 2, "ck_norm: k must be in [0, 2d+2]");
    require(r > 0 && L > 0, "ck_norm: scales must be positive");
    CkNorm out;
    out.under_resolved = r * L < 4.0 * g.h() || L / r < 8.0 * g.dp();
    const int n = g.n, n2 = 2 * n;
    const double sx = r * L, sp = L / r;
    // central sixth-order first derivative
    const double c6[3] = {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
    // natural order of p slots
    std::vector<int> nat(n);
    for (int i = 0; i < n; ++i) nat[i] = mod(i + n / 2, n);  // natural position t -> FFT slot

    std::vector<std::array<int, 4>> alphas;
    for (int a0 = 0; a0 <= k; ++a0)
        for (int a1 = 0; a1 <= (g.d == 2 ? k : 0); ++a1)
            for (int b0 = 0; b0 <= k; ++b0)
                for (int b1 = 0; b1 <= (g.d == 2 ? k : 0); ++b1)
                    if (a0 + a1 + b0 + b1 <= k) alphas.push_back({a0, a1, b0, b1});

    for (const auto& al : alphas) {
        std::vector<cplx> A = a.values;
        for (int ax = 0; ax < g.d; ++ax) {
            int j = al[ax];
            if (j == 0) continue;
            along_axis(A, g, true, ax, [&](std::vector<cplx>& line) {
                fft_1d(n2, line, -1);
                for (int t = 0; t < n2; ++t) {
                    int f = t < n ? t : t - n2;
                    if (t == n && (j % 2)) {
                        line[t] = 0;
                        continue;
                    }
                    double kap = 2.0 * kPi * f / g.L * sx;
                    line[t] *= std::pow(cplx(0.0, kap), j) / double(n2);
                }
                fft_1d(n2, line, +1);
            });
        }
        int lo[2] = {0, 0}, hi[2] = {n, g.d == 2 ? n : 1};
        for (int ax = 0; ax < g.d; ++ax) {
            int j = al[2 + ax];
            for (int rep = 0; rep < j; ++rep) {
                along_axis(A, g, false, ax, [&](std::vector<cplx>& line) {
                    std::vector<cplx> nl(n), d(n, 0.0);
                    for (int t = 0; t < n; ++t) nl[t] = line[nat[t]];
                    for (int t = 3; t < n - 3; ++t)
                        d[t] = (c6[0] * (nl[t + 1] - nl[t - 1]) + c6[1] * (nl[t + 2] - nl[t - 2]) +
                                c6[2] * (nl[t + 3] - nl[t - 3])) * (sp / g.dp());
                    for (int t = 0; t < n; ++t) line[nat[t]] = d[t];
                });
                lo[ax] += 3;
                hi[ax] -= 3;
            }
        }
        require(lo[0] < hi[0] && (g.d == 1 || lo[1] < hi[1]), "ck_norm: momentum grid too small");
        double sup = 0;
        for (std::size_t s = 0; s < a.nx(); ++s)
            for (int ty = lo[1]; ty < hi[1]; ++ty)
                for (int tx = lo[0]; tx < hi[0]; ++tx) {
                    std::size_t kk = flatten(g, nat[tx], g.d == 2 ? nat[ty] : 0);
                    sup = std::max(sup, std::abs(A[s * a.np() + kk]));
                }
        out.value += sup;
    }
    return out;
}

double opnorm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    if (M.rows() <= 1024 && M.cols() <= 1024) {
        if (M.rows() == M.cols() && (M - M.adjoint()).cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
            return es.eigenvalues().cwiseAbs().maxCoeff();
        }
        Eigen::BDCSVD<Matrix> svd(M);
        return svd.singularValues()(0);
    }
    // power iteration on M^* M
    Rng rng(derive_seed(0, hash_string("opnorm")));
    std::normal_distribution<double> nor;
    Eigen::VectorXcd v(M.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(nor(rng), nor(rng));
    v.normalize();
    double prev = 0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXcd w = M.adjoint() * (M * v);
        double lam = w.norm();
        if (lam == 0) return 0.0;
        v = w / lam;
        if (std::abs(lam - prev) <= 1e-8 * lam) return std::sqrt(lam);
        prev = lam;
    }
    return std::sqrt(prev);
}

namespace {

Matrix node_matrix(const std::vector<PhaseNode>& nodes, const Envelope& env, const Grid& g) {
    Matrix Phi(g.size(), nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        CVec phi = make_wavepacket(nodes[i].xi, env, g);
        for (std::size_t y = 0; y < g.size(); ++y) Phi(y, i) = phi[y];
    }
    return Phi;
}

}  // namespace

Matrix kernel_operator(const std::vector<PhaseNode>& nodes, const Matrix& kernel, const Envelope& env, const Grid& g) {
    require(kernel.rows() == Eigen::Index(nodes.size()) && kernel.cols() == kernel.rows(),
            "kernel_operator: kernel size mismatch");
    Matrix Phi = node_matrix(nodes, env, g);
    Eigen::VectorXd w(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) w(i) = nodes[i].w;
    Matrix K = w.asDiagonal() * kernel * w.asDiagonal();
    return Phi * K * Phi.adjoint() * g.cell_volume();
}

SchurBound schur_opnorm_bound(const std::vector<PhaseNode>& nodes, const Matrix& kernel, const Envelope& env,
                              const Grid& g) {
    require(kernel.rows() == Eigen::Index(nodes.size()) && kernel.cols() == kernel.rows(),
            "schur_opnorm_bound: kernel size mismatch");
    SchurBound b;
    std::size_t N = nodes.size();
    for (std::size_t i = 0; i < N; ++i) {
        double row = 0, col = 0;
        for (std::size_t j = 0; j < N; ++j) {
            row += nodes[j].w * std::abs(kernel(i, j));
            col += nodes[j].w * std::abs(kernel(j, i));
        }
        b.row_sup = std::max(b.row_sup, row);
        b.col_sup = std::max(b.col_sup, col);
    }
    if (b.row_sup == 0 || b.col_sup == 0) return b;
    Matrix Phi = node_matrix(nodes, env, g);
    Eigen::VectorXd w(N);
    for (std::size_t i = 0; i < N; ++i) w(i) = nodes[i].w;
    Matrix S = Phi * w.asDiagonal() * Phi.adjoint() * g.cell_volume();
    b.frame_norm = opnorm(S);
    b.bound = b.frame_norm * std::sqrt(b.row_sup * b.col_sup);
    return b;
}

void export_observable(const Observable& a, const std::string& path) {
    std::ofstream bin(path + ".bin", std::ios::binary);
    require(bool(bin), "export_observable: cannot open " + path + ".bin");
    for (cplx v : a.values) {
        for (double part : {v.real(), v.imag()}) {
            std::uint64_t u = std::bit_cast<std::uint64_t>(part);
            if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
            bin.write(reinterpret_cast<const char*>(&u), sizeof u);
        }
    }
    nlohmann::json j;
    j["dim"] = a.grid.d;
    j["n"] = a.grid.n;
    j["extent"] = a.grid.L;
    j["x_points"] = a.nx();
    j["p_points"] = a.np();
    j["x_spacing"] = 0.5 * a.grid.h();
    j["p_spacing"] = a.grid.dp();
    j["p_order"] = "fft";
    j["layout"] = "x-major, complex interleaved";
    j["dtype"] = "complex128-le";
    std::ofstream meta(path + ".json");
    meta << j.dump(2) << "\n";
}

}  // namespace kinlab::wavepacket
