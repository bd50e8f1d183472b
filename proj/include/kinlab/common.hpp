#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinlab {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
// point or momentum in d <= 2 dimensions; unused components are 0
using RVec = std::array<double, 2>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// Seed scheme: every stream is derived from (master, tag, index) by chained
// splitmix64 finalizers, so streams can be handed out in any order.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0);
std::uint64_t hash_string(const std::string& s);

using Rng = std::mt19937_64;
inline Rng make_rng(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
    return Rng(derive_seed(master, tag, index));
}

// Sum with Neumaier compensation; result does not depend on summation order
// to ~1e-15 relative for well-conditioned inputs.
template <class T>
class CompensatedSum {
public:
    void add(T v) {
        T t = sum_ + v;
        if constexpr (std::is_same_v<T, double>) {
            if (std::abs(sum_) >= std::abs(v))
                c_ += (sum_ - t) + v;
            else
                c_ += (v - t) + sum_;
        } else {
            // componentwise for complex
            double sr = sum_.real(), vr = v.real(), tr = t.real();
            double si = sum_.imag(), vi = v.imag(), ti = t.imag();
            double cr = std::abs(sr) >= std::abs(vr) ? (sr - tr) + vr : (vr - tr) + sr;
            double ci = std::abs(si) >= std::abs(vi) ? (si - ti) + vi : (vi - ti) + si;
            c_ += T(cr, ci);
        }
        sum_ = t;
    }
    T value() const { return sum_ + c_; }

private:
    T sum_{};
    T c_{};
};

// Periodic spatial grid [-L/2, L/2)^d with n points per axis.
struct Grid {
    int d = 1;
    int n = 64;
    double L = 64.0;

    double h() const { return L / n; }
    double dp() const;  // momentum lattice spacing 2*pi/L
    std::size_t size() const { return d == 1 ? std::size_t(n) : std::size_t(n) * n; }
    double cell_volume() const { return d == 1 ? h() : h() * h(); }
    double coord(int i) const { return -0.5 * L + i * h(); }
    // signed frequency index of FFT slot i
    int freq_index(int i) const { return i < n / 2 ? i : i - n; }
    double momentum(int i) const;
    double max_momentum2() const;  // max |p|^2 on the lattice
    // minimal image of a displacement on the torus
    double wrap(double dx) const;
    // flat index k = iy * n + ix (ix fastest); 1D grids use ix only
    RVec position(std::size_t k) const;
    RVec momentum_at(std::size_t k) const;
    RVec wrap(const RVec& dx) const;
    double norm(const RVec& v) const;
    bool operator==(const Grid& o) const { return d == o.d && n == o.n && L == o.L; }
};

void validate_grid(const Grid& g);

// In-place FFT on a grid; forward uses exp(-i k x). No normalization.
void fft_forward(const Grid& g, CVec& data);
void fft_inverse(const Grid& g, CVec& data);  // includes 1/N
void fft_1d(int n, CVec& data, int sign);     // raw, unnormalized

struct Quadrature {
    std::vector<double> x;
    std::vector<double> w;
};

// n-point Gauss-Legendre rule on [a, b], repeated over `panels` equal panels
Quadrature gauss_legendre(int n, double a, double b, int panels = 1);

}  // namespace kinlab
