#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "kinlab/common.hpp"
#include "kinlab/potential.hpp"

namespace kinlab::schrodinger {

using Matrix = Eigen::MatrixXcd;

// H = -Laplacian / 2 + eps V on a periodic grid
struct EvolutionParams {
    double eps = 0.0;
    double dt = 0.01;
    double t = 1.0;
    std::string scheme = "strang";

    int steps() const;  // round(t / dt); dt is adjusted to t / steps
    // dt > 0, eps >= 0, dt max|p|^2 / 2 < pi
    void validate(const Grid& g) const;
};

// exp(is Laplacian / 2): multiplies the Fourier coefficient at p by exp(-is|p|^2/2)
CVec free_evolve(const CVec& psi, const Grid& g, double s);

// Precomputed Strang stepper: half potential, kinetic, half potential.
class SplitStepper {
public:
    SplitStepper(const Grid& g, const std::vector<double>& V, double eps, double dt);
    void step(CVec& psi) const;
    void evolve(CVec& psi, int nsteps) const;

private:
    Grid g_;
    CVec half_pot_;
    CVec kin_;
};

CVec split_step_evolve(const CVec& psi, const potential::PotentialField& V, const EvolutionParams& p);

struct BornQuadrature {
    int nodes = 16;  // Gauss-Legendre nodes per panel (>= 16)
    int panels = 1;  // per time dimension
};

// k-th Duhamel term of exp(-itH) psi: nested time integrals of free evolutions
// interleaved with -i eps V. Homogeneous of degree k in eps V.
CVec born_term(int k, const std::vector<double>& V, double eps, const CVec& psi, const Grid& g, double t,
               const BornQuadrature& quad = {});

struct ChannelParams {
    EvolutionParams evo;
    potential::PotentialParams potential;
    int n_samples = 10;
    // times at which the potential is replaced by an independent sample
    std::vector<double> refresh_times;
    std::uint64_t seed = 1;
    double target_stderr = 0.0;  // 0 disables the flag
};

struct ChannelEstimate {
    Matrix mean;
    int n_samples = 0;
    double max_stderr = 0;
    double mean_stderr = 0;
    bool flagged = false;  // target_stderr not reached
};

// exp(-itH) as a dense matrix (columns are evolved basis vectors); n^d <= 1024.
Matrix propagator(const Grid& g, const std::vector<double>& V, double eps, double t, double dt);

// Propagator for one sample, including refreshes; sample index selects the
// potential seeds.
Matrix sample_propagator(const Grid& g, const ChannelParams& p, int sample);

// MC average of U* A U over potential samples.
ChannelEstimate evolution_channel_mc(const Matrix& A, const Grid& g, const ChannelParams& p);

// Several observables through the same propagators.
std::vector<ChannelEstimate> evolution_channel_mc(const std::vector<Matrix>& As, const Grid& g,
                                                  const ChannelParams& p);

// <psi, e^{i kappa x / 2} m(D) e^{i kappa x / 2} psi>: exact Weyl pairing of the
// symbol e^{i kappa x} m(p) when kappa / 2 lies on the momentum lattice.
// mult is indexed like the grid's FFT layout and evaluated at momenta p.
cplx plane_wave_pairing(const Grid& g, const CVec& psi, const RVec& kappa, const std::vector<cplx>& mult);

}  // namespace kinlab::schrodinger
