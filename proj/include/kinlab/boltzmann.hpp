#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kinlab/common.hpp"
#include "kinlab/potential.hpp"

namespace kinlab::boltzmann {

// Momentum discretization: energy shells |p| = radii[s], each with
// uniformly spaced directions (d = 2) or the two signs (d = 1).
struct ShellGrid {
    int d = 2;
    std::vector<double> radii;
    int n_angles = 32;

    int nodes() const { return d == 1 ? 2 : n_angles; }  // per shell
    std::size_t total_nodes() const { return radii.size() * std::size_t(nodes()); }
    RVec momentum(std::size_t shell, int j) const;
    double angle_weight() const;  // 2 pi / M in 2D, 1 in 1D
    // delta(|p|^2 - |q|^2) dq restricted to the shell: |p|^{d-2} / 2 per unit angle
    double jacobian(std::size_t shell) const;
    double node_weight(std::size_t shell) const { return angle_weight() * jacobian(shell); }
    void validate() const;
};

// f(x, p) on space grid x shell nodes. Complex storage so spectral shifts
// compose exactly; physical states are real.
struct KineticState {
    Grid space;
    ShellGrid shells;
    std::vector<cplx> f;  // [(shell * M + j) * Nx + x]

    static KineticState zeros(const Grid& space, const ShellGrid& shells);
    std::size_t nx() const { return space.size(); }
    cplx& at(std::size_t shell, int j, std::size_t x) { return f[(shell * shells.nodes() + j) * nx() + x]; }
    cplx at(std::size_t shell, int j, std::size_t x) const { return f[(shell * shells.nodes() + j) * nx() + x]; }
    // h^d sum_x angle_weight sum_j f on one shell
    double shell_mass(std::size_t shell) const;
    double mass() const;
    // h^d sum_x |x|^2 angle_weight sum_j f (minimal-image positions)
    double second_moment(std::size_t shell) const;
    double sup_norm() const;
};

using RadialTransform = std::function<double(double)>;

// Golden-rule normalization for H = -Laplacian / 2 + eps V with
// R^(k) = int R(x) e^{-ikx} dx: 4 pi / (2 pi)^d.
double golden_rule_prefactor(int d);

// Lf = eps^2 sum_q G(p, q) w_q [f(q) - f(p)]; G and K exclude eps^2.
struct CollisionKernel {
    double eps = 0.0;
    double prefactor = 1.0;
    ShellGrid shells;
    std::vector<Eigen::MatrixXd> gain;  // per shell, gain(j, k) = prefactor R^(p_j - p_k) w
    std::vector<std::vector<double>> K;  // per shell, row sums of gain

    static CollisionKernel build(const RadialTransform& Rhat, double eps, const ShellGrid& shells,
                                 double prefactor);
    static CollisionKernel build(const potential::CorrelationProfile& R, double eps, const ShellGrid& shells);
    double max_K() const;
    // eps^2 (gain - diag K), symmetric with zero row sums
    Eigen::MatrixXd generator(std::size_t shell) const;
};

KineticState collision_operator(const KineticState& f, const CollisionKernel& kernel);

// f(x - s p, p) by spectral shift, per node
KineticState transport(const KineticState& f, double s);

enum class Direction { Forward, Dual };

// Forward: d_t f + p.grad f = L f. Dual: d_t a - p.grad a = L a.
struct ClassicalTerms {
    KineticState T0, T1, T2;
};

// Dual-direction Duhamel terms: T0 a = a(x + tp, p); T1 the gain integral over
// s in [0, t] (done exactly per spatial Fourier mode); T2 = -eps^2 t K(p) a(x + tp, p).
ClassicalTerms duhamel_terms_classical(const KineticState& a0, double t, const CollisionKernel& kernel);

struct SeriesResult {
    KineticState sum;
    std::vector<double> term_norms;  // sup |g_j|
};

// f_t = sum_j g_j with g_{j+1}(t) = int_0^t T_s L g_j(t - s) ds. The terms are the
// Taylor coefficients in the collision strength of the exact per-mode
// propagator, extracted by a Cauchy integral.
SeriesResult boltzmann_series(const KineticState& f0, double t, int j_max, const CollisionKernel& kernel,
                              Direction dir = Direction::Forward);

// Strang splitting: half collision (exact exponential per shell, or implicit
// Euler above 128 nodes), transport, half collision. dt eps^2 max K <= 0.1.
KineticState solve_boltzmann(const KineticState& f0, double t, double dt, const CollisionKernel& kernel,
                             Direction dir = Direction::Forward);

// exp(tau * generator) for one shell (or the implicit Euler substitute)
Eigen::MatrixXd collision_propagator(const CollisionKernel& kernel, std::size_t shell, double tau);

struct DiffusionParams {
    int n_particles = 2000;
    double horizon = 0;      // 0: 200 mean free times
    double sample_dt = 0;    // 0: mean free time / 10
    std::uint64_t seed = 1;
};

struct DiffusionEstimate {
    double D_gk = 0;                 // Green-Kubo, averaged over axes
    double D_msd = 0;                // mean squared displacement slope / 2d
    std::array<double, 2> D_gk_axis{};
    std::array<double, 2> D_msd_axis{};
    std::array<double, 2> D_gk_axis_stderr{};  // across particle batches
    double D_msd_stderr = 0;         // across particle batches
    double mean_free_time = 0;
    double horizon = 0;
    bool horizon_too_short = false;  // horizon < 50 mean free times
    std::vector<double> times;       // MSD curve over lags, summed over axes
    std::vector<double> msd;
};

// Jump process on one shell: velocity p_j, jumps to k at rate eps^2 gain(j, k).
DiffusionEstimate diffusion_diagnostics(const CollisionKernel& kernel, std::size_t shell,
                                        const DiffusionParams& params);

// binary (re, im float64 LE) + JSON sidecar
void export_state(const KineticState& f, const std::string& path);

}  // namespace kinlab::boltzmann
