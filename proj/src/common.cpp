#include "kinlab/common.hpp"

#include <fftw3.h>

#include <boost/math/special_functions/legendre.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace kinlab {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index);
}

std::uint64_t hash_string(const std::string& s) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double Grid::dp() const { return 2.0 * std::numbers::pi / L; }

double Grid::momentum(int i) const { return freq_index(i) * dp(); }

double Grid::max_momentum2() const {
    double pm = (n / 2) * dp();
    return d * pm * pm;
}

double Grid::wrap(double dx) const {
    dx = std::fmod(dx, L);
    if (dx >= 0.5 * L) dx -= L;
    if (dx < -0.5 * L) dx += L;
    return dx;
}

RVec Grid::position(std::size_t k) const {
    int ix = int(k % n), iy = int(k / n);
    return {coord(ix), d == 2 ? coord(iy) : 0.0};
}

RVec Grid::momentum_at(std::size_t k) const {
    int ix = int(k % n), iy = int(k / n);
    return {momentum(ix), d == 2 ? momentum(iy) : 0.0};
}

RVec Grid::wrap(const RVec& dx) const { return {wrap(dx[0]), d == 2 ? wrap(dx[1]) : 0.0}; }

double Grid::norm(const RVec& v) const {
    return d == 2 ? std::hypot(v[0], v[1]) : std::abs(v[0]);
}

void validate_grid(const Grid& g) {
    require(g.d == 1 || g.d == 2, "grid dimension must be 1 or 2");
    require(g.n >= 2 && g.n % 2 == 0, "grid size must be even and >= 2");
    require(g.L > 0 && std::isfinite(g.L), "grid extent must be positive");
}

namespace {

std::mutex plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> plan_cache;

fftw_plan get_plan(int d, int n, int sign) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_tuple(d, n, sign);
    auto it = plan_cache.find(key);
    if (it != plan_cache.end()) return it->second;
    std::size_t total = d == 1 ? std::size_t(n) : std::size_t(n) * n;
    fftw_complex* buf = fftw_alloc_complex(total);
    fftw_plan p = d == 1 ? fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED)
                         : fftw_plan_dft_2d(n, n, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plan_cache[key] = p;
    return p;
}

void run(int d, int n, CVec& data, int sign) {
    fftw_plan p = get_plan(d, n, sign);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p, ptr, ptr);
}

}  // namespace

void fft_forward(const Grid& g, CVec& data) {
    require(data.size() == g.size(), "fft: size mismatch");
    run(g.d, g.n, data, FFTW_FORWARD);
}

void fft_inverse(const Grid& g, CVec& data) {
    require(data.size() == g.size(), "fft: size mismatch");
    run(g.d, g.n, data, FFTW_BACKWARD);
    double s = 1.0 / double(data.size());
    for (auto& v : data) v *= s;
}

void fft_1d(int n, CVec& data, int sign) {
    require(int(data.size()) == n, "fft_1d: size mismatch");
    run(1, n, data, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD);
}


Quadrature gauss_legendre(int n, double a, double b, int panels) {
    require(n >= 1 && panels >= 1, "gauss_legendre: bad size");
    static std::mutex mu;
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    std::vector<double> xs, ws;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it == cache.end()) {
            // boost returns the nonnegative zeros
            auto z = boost::math::legendre_p_zeros<double>(n);
            std::vector<double> x, w;
            for (double r : z) {
                double dp = boost::math::legendre_p_prime(n, r);
                double wt = 2.0 / ((1 - r * r) * dp * dp);
                x.push_back(r);
                w.push_back(wt);
                if (r != 0.0) {
                    x.push_back(-r);
                    w.push_back(wt);
                }
            }
            it = cache.emplace(n, std::make_pair(x, w)).first;
        }
        xs = it->second.first;
        ws = it->second.second;
    }
    Quadrature q;
    double H = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
        double lo = a + k * H;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            q.x.push_back(lo + 0.5 * H * (xs[i] + 1));
            q.w.push_back(0.5 * H * ws[i]);
        }
    }
    return q;
}

}  // namespace kinlab
