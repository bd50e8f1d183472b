#include "kinlab/potential.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "json.hpp"

namespace kinlab::potential {

namespace {

constexpr double kPi = std::numbers::pi;

double wendland_shape(double u) {
    if (u >= 1.0) return 0.0;
    double t = 1.0 - u;
    return t * t * t * t * (4.0 * u + 1.0);
}

double smooth_bump(double u) {
    if (u >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - u * u));
}

// integral of f over [0, a] split into panels, Gauss-Legendre on each
template <class F>
double panel_integral(F f, double a, int panels) {
    double s = 0, w = a / panels;
    for (int i = 0; i < panels; ++i)
        s += boost::math::quadrature::gauss<double, 30>::integrate(f, i * w, (i + 1) * w);
    return s;
}

double pow_d(double x, int d) { return d == 2 ? x * x : x; }

RVec snap_to_lattice(const Grid& g, const RVec& q, bool& snapped) {
    RVec out{};
    snapped = false;
    for (int a = 0; a < g.d; ++a) {
        double m = std::round(q[a] / g.dp());
        out[a] = m * g.dp();
        if (std::abs(out[a] - q[a]) > 1e-9 * g.dp()) snapped = true;
    }
    return out;
}

double dot(const RVec& a, const RVec& b, int d) { return d == 2 ? a[0] * b[0] + a[1] * b[1] : a[0] * b[0]; }

// circulant eigenvalues of the torus covariance, clipped at zero
std::vector<double> covariance_spectrum(const CorrelationProfile& R, const Grid& g) {
    auto f = R.fourier_on_grid(g);
    double inv = 1.0 / g.cell_volume();
    for (auto& v : f) v = std::max(v, 0.0) * inv;
    return f;
}

}  // namespace

CorrelationProfile CorrelationProfile::wendland(double sigma2, double a) {
    require(a > 0, "correlation support radius must be positive");
    require(sigma2 >= 0, "correlation variance must be nonnegative");
    CorrelationProfile R;
    R.name = "wendland";
    R.sigma2 = sigma2;
    R.support_radius = a;
    R.radial = [sigma2, a](double r) { return sigma2 * wendland_shape(std::abs(r) / a); };
    return R;
}

CorrelationProfile CorrelationProfile::zero(double a) {
    CorrelationProfile R = wendland(0.0, a);
    R.name = "zero";
    return R;
}

double CorrelationProfile::fourier(double k, int d) const {
    require(d == 1 || d == 2, "fourier: dimension must be 1 or 2");
    double a = support_radius;
    int panels = 1 + int(std::abs(k) * a / 4.0);
    if (d == 1) return 2.0 * panel_integral([&](double r) { return (*this)(r) * std::cos(k * r); }, a, panels);
    return 2.0 * kPi *
           panel_integral([&](double r) { return (*this)(r) * std::cyl_bessel_j(0.0, std::abs(k) * r) * r; },
                          a, panels);
}

std::vector<double> CorrelationProfile::fourier_on_grid(const Grid& g) const {
    validate_grid(g);
    // first column of the circulant: R at the displacement from grid index 0
    CVec shifted(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        RVec x = g.position(k);
        RVec dx{x[0] - g.coord(0), g.d == 2 ? x[1] - g.coord(0) : 0.0};
        shifted[k] = at(g, dx);
    }
    fft_forward(g, shifted);
    std::vector<double> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = shifted[k].real() * g.cell_volume();
    return out;
}

double min_fourier_ratio(const CorrelationProfile& R, const Grid& g) {
    auto f = R.fourier_on_grid(g);
    double mx = *std::max_element(f.begin(), f.end());
    double mn = *std::min_element(f.begin(), f.end());
    if (mx <= 0) return mn < 0 ? -1.0 : 0.0;
    return mn / mx;
}

CutoffBump CutoffBump::make(double r, int d) {
    require(r > 0, "bump scale must be positive");
    require(d == 1 || d == 2, "bump dimension must be 1 or 2");
    CutoffBump b;
    b.r = r;
    b.d = d;
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double unit = d == 1 ? 2.0 * GK::integrate(smooth_bump, 0.0, 1.0, 12, 1e-14)
                         : 2.0 * kPi * GK::integrate([](double u) { return smooth_bump(u) * u; }, 0.0, 1.0, 12, 1e-14);
    b.norm = 1.0 / (unit * pow_d(b.radius(), d));
    b.decay_c = 1.0 / b.radius();
    return b;
}

double CutoffBump::operator()(double dist) const { return norm * smooth_bump(std::abs(dist) / radius()); }

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::Gaussian: return "gaussian";
        case Kind::Lattice: return "lattice";
        case Kind::Poisson: return "poisson";
    }
    return "?";
}

Kind kind_from_name(const std::string& s) {
    if (s == "gaussian") return Kind::Gaussian;
    if (s == "lattice") return Kind::Lattice;
    if (s == "poisson") return Kind::Poisson;
    throw Error("unknown potential kind '" + s + "'");
}

double PotentialParams::dependence_range() const {
    return kind == Kind::Gaussian ? corr.support_radius : 2.0 * bump_radius;
}

double lattice_bump(const PotentialParams& p, double r) { return p.amplitude * wendland_shape(std::abs(r) / p.bump_radius); }

double poisson_bump(const PotentialParams& p, int d, double r) {
    // the dilated copy has integral 2^{-d} of the wide one
    double u = std::abs(r) / p.bump_radius;
    return p.amplitude * (wendland_shape(u) - (d == 2 ? 4.0 : 2.0) * wendland_shape(2.0 * u));
}

namespace {

// add f(|y - c|) to every grid point within radius rho of c
template <class F>
void stamp(const Grid& g, std::vector<double>& v, const RVec& c, double rho, F f) {
    double h = g.h();
    auto range = [&](double ca) {
        int lo = int(std::floor((ca - rho - g.coord(0)) / h));
        int hi = int(std::ceil((ca + rho - g.coord(0)) / h));
        return std::make_pair(lo, hi);
    };
    auto [x0, x1] = range(c[0]);
    auto mod = [&](int i) { return ((i % g.n) + g.n) % g.n; };
    if (g.d == 1) {
        for (int i = x0; i <= x1; ++i) {
            int ix = mod(i);
            double r = std::abs(g.wrap(g.coord(ix) - c[0]));
            if (r < rho) v[ix] += f(r);
        }
        return;
    }
    auto [y0, y1] = range(c[1]);
    for (int j = y0; j <= y1; ++j) {
        int iy = mod(j);
        double dy = g.wrap(g.coord(iy) - c[1]);
        for (int i = x0; i <= x1; ++i) {
            int ix = mod(i);
            double r = std::hypot(g.wrap(g.coord(ix) - c[0]), dy);
            if (r < rho) v[std::size_t(iy) * g.n + ix] += f(r);
        }
    }
}

}  // namespace

PotentialField sample_potential(const PotentialParams& params, const Grid& g, std::uint64_t seed) {
    validate_grid(g);
    PotentialField V;
    V.grid = g;
    V.kind = params.kind;
    V.seed = seed;
    V.support_radius = params.dependence_range();
    require(g.L >= 4.0 * V.support_radius, "grid extent must be at least 4 x support radius");
    V.values.assign(g.size(), 0.0);
    Rng rng = make_rng(seed, hash_string("potential:" + kind_name(params.kind)));

    if (params.kind == Kind::Gaussian) {
        auto f = params.corr.fourier_on_grid(g);
        double mx = *std::max_element(f.begin(), f.end());
        double mn = *std::min_element(f.begin(), f.end());
        if (mx <= 0) return V;
        require(mn >= -1e-8 * mx, "correlation profile is not positive definite on this grid");
        auto lam = covariance_spectrum(params.corr, g);
        std::normal_distribution<double> nor(0.0, 1.0);
        CVec w(g.size());
        for (auto& x : w) x = nor(rng);
        fft_forward(g, w);
        for (std::size_t k = 0; k < g.size(); ++k) w[k] *= std::sqrt(lam[k]);
        fft_inverse(g, w);
        for (std::size_t k = 0; k < g.size(); ++k) V.values[k] = w[k].real();
        return V;
    }

    require(params.bump_radius > 0, "bump radius must be positive");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    if (params.kind == Kind::Lattice) {
        int sites = int(std::lround(g.L));
        require(std::abs(g.L - sites) < 1e-9, "lattice kind needs an integer grid extent");
        RVec shift{uni(rng), g.d == 2 ? uni(rng) : 0.0};
        std::bernoulli_distribution coin(0.5);
        int ny = g.d == 2 ? sites : 1;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < sites; ++i) {
                double s = coin(rng) ? 1.0 : -1.0;
                RVec c{-0.5 * g.L + i + shift[0], g.d == 2 ? -0.5 * g.L + j + shift[1] : 0.0};
                stamp(g, V.values, c, params.bump_radius,
                      [&](double r) { return s * lattice_bump(params, r); });
            }
        return V;
    }

    // poisson: unit intensity on the torus
    std::poisson_distribution<long> count(std::pow(g.L, g.d));
    long N = count(rng);
    for (long m = 0; m < N; ++m) {
        RVec c{-0.5 * g.L + g.L * uni(rng), g.d == 2 ? -0.5 * g.L + g.L * uni(rng) : 0.0};
        stamp(g, V.values, c, params.bump_radius, [&](double r) { return poisson_bump(params, g.d, r); });
    }
    return V;
}

Estimate empirical_covariance(const std::vector<PotentialField>& fields, std::size_t x, std::size_t xp) {
    require(fields.size() >= 100, "empirical_covariance needs at least 100 samples");
    const Grid& g = fields.front().grid;
    require(x < g.size() && xp < g.size(), "empirical_covariance: index out of range");
    double s = 0;
    for (const auto& f : fields) {
        require(f.grid == g, "empirical_covariance: mismatched grids");
        s += f.values[x] * f.values[xp];
    }
    double n = double(fields.size());
    Estimate e;
    e.value = s / n;
    double ss = 0;
    for (const auto& f : fields) {
        double dv = f.values[x] * f.values[xp] - e.value;
        ss += dv * dv;
    }
    e.stderr_ = std::sqrt(ss / (n - 1) / n);
    return e;
}

FourierValue localized_fourier(const PotentialField& V, const RVec& y, const RVec& q, const CutoffBump& bump) {
    const Grid& g = V.grid;
    require(bump.d == g.d, "localized_fourier: bump dimension mismatch");
    FourierValue out;
    out.q_used = snap_to_lattice(g, q, out.snapped);
    CompensatedSum<cplx> acc;
    for (std::size_t k = 0; k < g.size(); ++k) {
        RVec x = g.position(k);
        double w = bump(g.norm(g.wrap(RVec{x[0] - y[0], x[1] - y[1]})));
        if (w == 0.0 || V.values[k] == 0.0) continue;
        double ph = -dot(out.q_used, x, g.d);
        acc.add(w * V.values[k] * cplx(std::cos(ph), std::sin(ph)));
    }
    out.value = acc.value() * g.cell_volume();
    return out;
}

MomentValue pair_moment(const CorrelationProfile& R, const CutoffBump& bump, const Grid& g, const RVec& y,
                        const RVec& yp, const RVec& q, const RVec& qp) {
    validate_grid(g);
    require(bump.d == g.d, "pair_moment: bump dimension mismatch");
    MomentValue out;
    out.resolved = 2.0 * bump.radius() / g.h() >= 8.0;
    double sep = g.norm(g.wrap(RVec{y[0] - yp[0], y[1] - yp[1]}));
    if (sep > 2.0 * bump.radius() + R.support_radius) {
        out.value = 0.0;
        return out;
    }
    bool s1, s2;
    RVec q1 = snap_to_lattice(g, q, s1), q2 = snap_to_lattice(g, qp, s2);
    auto window = [&](const RVec& c, const RVec& k) {
        CVec u(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            RVec x = g.position(i);
            double w = bump(g.norm(g.wrap(RVec{x[0] - c[0], x[1] - c[1]})));
            double ph = -dot(k, x, g.d);
            u[i] = w * cplx(std::cos(ph), std::sin(ph));
        }
        return u;
    };
    CVec u = window(y, q1), up = window(yp, q2);
    auto lam = covariance_spectrum(R, g);
    fft_forward(g, u);
    for (std::size_t k = 0; k < g.size(); ++k) u[k] *= lam[k];
    fft_inverse(g, u);
    CompensatedSum<cplx> acc;
    for (std::size_t k = 0; k < g.size(); ++k) acc.add(up[k] * u[k]);
    double cv = g.cell_volume();
    out.value = acc.value() * cv * cv;
    return out;
}

cplx partition_moment(const combinat::Partition& P, const std::vector<WindowPoint>& X, const CorrelationProfile& R,
                      const CutoffBump& bump, const Grid& g) {
    std::vector<int> ground = P.ground();
    require(int(ground.size()) == int(X.size()), "partition_moment: partition does not cover the index set");
    for (std::size_t i = 0; i < ground.size(); ++i)
        require(ground[i] == int(i), "partition_moment: partition does not cover the index set");
    std::map<std::pair<int, int>, cplx> cache;
    auto pm = [&](int a, int b) {
        auto key = std::make_pair(a, b);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        cplx v = pair_moment(R, bump, g, X[a].y, X[b].y, X[a].q, X[b].q).value;
        cache[key] = v;
        return v;
    };
    std::function<cplx(std::vector<int>)> wick = [&](std::vector<int> rest) -> cplx {
        if (rest.empty()) return 1.0;
        int a = rest[0];
        cplx s = 0;
        for (std::size_t j = 1; j < rest.size(); ++j) {
            std::vector<int> sub;
            for (std::size_t t = 1; t < rest.size(); ++t)
                if (t != j) sub.push_back(rest[t]);
            s += pm(a, rest[j]) * wick(sub);
        }
        return s;
    };
    cplx total = 1.0;
    for (const auto& c : P.cells) {
        if (c.size() % 2) return 0.0;
        total *= wick(c);
    }
    return total;
}

void export_field(const PotentialField& V, const std::string& path) {
    std::ofstream bin(path + ".bin", std::ios::binary);
    require(bool(bin), "export_field: cannot open " + path + ".bin");
    for (double v : V.values) {
        std::uint64_t u = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
        bin.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
    nlohmann::json j;
    j["kind"] = kind_name(V.kind);
    j["seed"] = V.seed;
    j["dim"] = V.grid.d;
    j["shape"] = V.grid.d == 1 ? std::vector<int>{V.grid.n} : std::vector<int>{V.grid.n, V.grid.n};
    j["spacing"] = V.grid.h();
    j["extent"] = V.grid.L;
    j["support_radius"] = V.support_radius;
    j["dtype"] = "float64-le";
    std::ofstream meta(path + ".json");
    meta << j.dump(2) << "\n";
}

}  // namespace kinlab::potential
