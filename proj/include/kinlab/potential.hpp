#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kinlab/combinat.hpp"
#include "kinlab/common.hpp"

namespace kinlab::potential {

// Radial two-point correlation R(|x|), zero beyond support_radius.
struct CorrelationProfile {
    std::string name = "wendland";
    double sigma2 = 1.0;
    double support_radius = 1.0;
    std::function<double(double)> radial;

    // sigma2 (1 - r/a)_+^4 (4 r/a + 1); positive definite for d <= 3
    static CorrelationProfile wendland(double sigma2, double a);
    static CorrelationProfile zero(double a = 1.0);

    double operator()(double r) const { return r >= support_radius ? 0.0 : radial(r); }
    double at(const Grid& g, const RVec& dx) const { return (*this)(g.norm(g.wrap(dx))); }

    // continuous transform int R(x) exp(-i p x) dx for |p| = k in dimension d
    double fourier(double k, int d) const;
    // transform of the sampled profile on the grid's momentum lattice
    // (h^d sum_x R(x) e^{-ipx}); FFT layout
    std::vector<double> fourier_on_grid(const Grid& g) const;
};

// Smallest grid transform divided by the largest; below -1e-8 the profile is
// rejected for synthesis.
double min_fourier_ratio(const CorrelationProfile& R, const Grid& g);

// b_r(x) = c * exp(-1 / (1 - |x|^2 / (10 r)^2)), normalized to integrate to 1.
struct CutoffBump {
    double r = 1.0;
    int d = 1;
    double norm = 1.0;
    double decay_c = 1.0;
    double decay_exponent = 0.999;

    static CutoffBump make(double r, int d);
    double radius() const { return 10.0 * r; }
    double operator()(double dist) const;
};

enum class Kind { Gaussian, Lattice, Poisson };
std::string kind_name(Kind k);
Kind kind_from_name(const std::string& s);

struct PotentialParams {
    Kind kind = Kind::Gaussian;
    CorrelationProfile corr = CorrelationProfile::wendland(1.0, 1.0);  // gaussian kind
    double bump_radius = 0.4;  // V0 radius for lattice and poisson kinds
    double amplitude = 1.0;    // V0 height for lattice and poisson kinds

    // distance beyond which V(x), V(x') are independent
    double dependence_range() const;
};

struct PotentialField {
    Grid grid;
    Kind kind = Kind::Gaussian;
    std::uint64_t seed = 0;
    double support_radius = 0;
    std::vector<double> values;
};

PotentialField sample_potential(const PotentialParams& params, const Grid& g, std::uint64_t seed);

// Fixed V0 bumps used by the lattice and poisson kinds, sampled at distance r.
double lattice_bump(const PotentialParams& params, double r);
double poisson_bump(const PotentialParams& params, int d, double r);

struct Estimate {
    double value = 0;
    double stderr_ = 0;
};

// Sample mean of V(x) V(x') (the fields are mean zero). x, x' are flat indices.
Estimate empirical_covariance(const std::vector<PotentialField>& fields, std::size_t x,
                              std::size_t xp);

struct FourierValue {
    cplx value;
    RVec q_used{};
    bool snapped = false;  // q was moved to the nearest lattice point
};

// h^d sum_x e^{-i q.x} b_r(x - y) V(x), window displacement taken mod the torus.
FourierValue localized_fourier(const PotentialField& V, const RVec& y, const RVec& q,
                               const CutoffBump& bump);

struct MomentValue {
    cplx value;
    bool resolved = true;  // false when the window spans fewer than 8 grid points
};

// E V_y(q)^ V_y'(q')^ for the gaussian field with profile R on grid g.
MomentValue pair_moment(const CorrelationProfile& R, const CutoffBump& bump, const Grid& g,
                        const RVec& y, const RVec& yp, const RVec& q, const RVec& qp);

struct WindowPoint {
    RVec y{};
    RVec q{};
};

// prod over cells of the Wick sum over perfect matchings of the cell.
cplx partition_moment(const combinat::Partition& P, const std::vector<WindowPoint>& X,
                      const CorrelationProfile& R, const CutoffBump& bump, const Grid& g);

// little-endian float64 values at path + ".bin", metadata at path + ".json"
void export_field(const PotentialField& V, const std::string& path);

}  // namespace kinlab::potential
