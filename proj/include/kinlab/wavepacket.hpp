#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "kinlab/common.hpp"

namespace kinlab::wavepacket {

using Matrix = Eigen::MatrixXcd;

struct PhasePoint {
    RVec x{};
    RVec p{};
};

// chi(|u|) = c * exp(-1 / (1 - |u|^2)) on the unit ball, L2-normalized in d dims.
struct Envelope {
    double r = 1.0;
    int d = 1;
    double norm = 1.0;

    static Envelope make(double r, int d);
    double operator()(double u) const;
};

// h^d sum conj(f) g
cplx inner(const Grid& g, const CVec& f, const CVec& h);
double l2norm(const Grid& g, const CVec& f);

// phi_{x,p}(y) = r^{-d/2} e^{i (x + w) p} chi(|w| / r), w = y - x mod the torus.
CVec make_wavepacket(const PhasePoint& xi, const Envelope& env, const Grid& g);

// r^{-1} |x - x'| + r |p - p'|, positions compared by minimal image when L > 0.
double phase_distance(const PhasePoint& a, const PhasePoint& b, double r, double L = 0.0);

// Symbol sampled on the Weyl phase grid: positions on the half grid (2n per
// axis, spacing h/2), momenta on the lattice (n per axis, FFT order).
struct Observable {
    Grid grid;
    std::vector<cplx> values;  // [s * np + k]
    double r = 1.0;
    double L = 1.0;
    double p_min = 0.0;

    std::size_t nx() const;  // (2n)^d
    std::size_t np() const;  // n^d
    RVec x_at(std::size_t s) const;
    RVec p_at(std::size_t k) const { return grid.momentum_at(k); }
    cplx& operator()(std::size_t s, std::size_t k) { return values[s * np() + k]; }
    cplx operator()(std::size_t s, std::size_t k) const { return values[s * np() + k]; }
};

using SymbolFn = std::function<cplx(const RVec& x, const RVec& p)>;

Observable sample_observable(const Grid& g, const SymbolFn& a, double r = 1.0, double L = 1.0);

// true when the observable vanishes for |p| < p_min
bool has_good_support(const Observable& a, double p_min);

// Discrete Wigner function on the Weyl phase grid; pairs W with symbols by
// sum (h/2)^d (dp/2pi)^d a W.
Observable wigner_transform(const CVec& psi, const Grid& g);

cplx phase_pairing(const Observable& a, const Observable& W);

// p-integral of W averaged over the 2^d half-grid cells of each grid point.
std::vector<double> wigner_position_marginal(const Observable& W);

// Matrix M with (Op f)_j = sum_i M_ji f_i. Dense; n^d <= 1024.
Matrix weyl_quantize(const Observable& a);

// <psi, M psi> with the grid inner product
cplx expectation(const Grid& g, const Matrix& M, const CVec& psi);

struct WavepacketQuadrature {
    int nx = 0;        // x nodes per axis (spacing L / nx)
    int p_stride = 1;  // momentum nodes every p_stride lattice points
    bool enforce_resolution = true;
};

// Default nodes: spacing r/4 in x, the full momentum lattice.
WavepacketQuadrature default_quadrature(const Grid& g, const Envelope& env);

// sum over nodes xi of w a(xi) |phi_xi><phi_xi|, w = dx^d (dp / 2pi)^d.
Matrix wavepacket_quantize(const SymbolFn& a, const Envelope& env, const Grid& g,
                           const WavepacketQuadrature& quad);

struct CkNorm {
    double value = 0;
    bool under_resolved = false;
};

// sum over |alpha| <= k of sup |(r L d_x)^ax (L / r d_p)^ap a|. Spectral in x,
// sixth-order differences in p (sup over points where the stencil fits).
CkNorm ck_norm(const Observable& a, int k, double r, double L);

// Largest singular value: dense up to dimension 1024, power iteration above.
double opnorm(const Matrix& M);

struct PhaseNode {
    PhasePoint xi;
    double w = 1.0;
};

struct SchurBound {
    double bound = 0;
    double frame_norm = 0;  // ||sum w |phi><phi| ||
    double row_sup = 0;
    double col_sup = 0;
};

// Bound on ||sum w_i w_j k_ij |phi_i><phi_j| || via the Schur test on the
// node weights times the frame operator norm.
SchurBound schur_opnorm_bound(const std::vector<PhaseNode>& nodes, const Matrix& kernel,
                              const Envelope& env, const Grid& g);

// dense assembly of the same operator
Matrix kernel_operator(const std::vector<PhaseNode>& nodes, const Matrix& kernel,
                       const Envelope& env, const Grid& g);

// interleaved little-endian float64 (re, im) at path + ".bin", metadata in ".json"
void export_observable(const Observable& a, const std::string& path);

}  // namespace kinlab::wavepacket
