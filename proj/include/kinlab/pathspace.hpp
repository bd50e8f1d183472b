#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kinlab/boltzmann.hpp"
#include "kinlab/combinat.hpp"
#include "kinlab/common.hpp"
#include "kinlab/potential.hpp"
#include "kinlab/wavepacket.hpp"

namespace kinlab::pathspace {

using wavepacket::PhasePoint;

// k collisions: s and p have k + 1 entries, y has k. Free flight j lasts s[j]
// with momentum p[j]; collision j (1-based) happens at y[j - 1].
struct Path {
    int d = 2;
    std::vector<double> s;
    std::vector<RVec> p;
    std::vector<RVec> y;
    double t_total = 0;

    int k() const { return int(y.size()); }
    // checks lengths, s >= 0 and sum s = t_total to 1e-12 (relative to t_total)
    void validate() const;
    // collision time of collision j (1-based)
    double time_of(int j) const;
};

// N segments of duration tau; xi holds 2N checkpoints, segment l runs from
// xi[2l] to xi[2l + 1].
struct ExtendedPath {
    std::vector<PhasePoint> xi;
    std::vector<Path> segments;
    double tau = 0;

    static ExtendedPath single(const Path& w, const PhasePoint& start, const PhasePoint& end);
    int n_segments() const { return int(segments.size()); }
    int collisions() const;
    void validate() const;
};

struct DoubledPath {
    ExtendedPath plus, minus;
    combinat::CollisionSet index_set() const;
};

enum class TubeMode {
    Segment,    // a, b not immediate; y_b near the line y_a + s p_{a-1}
    Incidence,  // some immediate index between a and b; y_b near y_a + s p_a
};

struct PathParams {
    double alpha = 0.5;           // constraint tolerance
    double r = 1.0;
    double sigma = 1.0;           // minimal boundary free-flight time
    double rec_radius = 2.0;      // recollision / dependency radius
    double cross_radius = 2.0;    // signed policy, opposite signs
    double same_radius = 4.0;     // signed policy, any signs
    double tube_radius = 2.0;
    TubeMode tube_mode = TubeMode::Segment;
    double cone_energy_window = 0.1;  // | |v|^2/2 - E0 | bounds
    double cone_radius = 2.0;         // | y_a + t v - y_b | bound
    double cone_exclusion = 0.5;      // | v - p_a | lower bound
    int cone_angles = 1024;
    double cone_radial_step = 0.01;   // radial grid spacing relative to |p_0|
    int cone_radial_max = 50;         // radial grid half-width in steps
    double beta = 1.0;                // completeness constant
    double start_distance = 1.0;      // d_r bound between the two start points
    double time_tol = 1e-9;

    // every threshold derived from r and alpha
    static PathParams defaults(double r, double alpha);
    void validate() const;
};

// ---- membership ----

struct Violation {
    std::string clause;  // transport, kinetic, endpoint, boundary, shape
    int index = 0;
    double excess = 0;   // amount by which the bound is exceeded
};

struct Membership {
    bool member = true;
    std::vector<Violation> violations;
};

// Clauses of the tolerance-alpha path set; endpoint clauses only when xi and eta
// are given.
Membership check_path_constraints(const Path& w, const PathParams& params, const PhasePoint* xi = nullptr,
                                  const PhasePoint* eta = nullptr);

// sum s_j |p_j|^2 / 2 + sum y_j . (p_j - p_{j-1})
double path_phase(const Path& w);

// ---- partitions ----

struct RadiusPolicy {
    enum Kind { Uniform, Signed } kind = Uniform;
    double rho = 1.0;        // uniform
    double rho_cross = 1.0;  // signed: opposite signs within rho_cross
    double rho_same = 2.0;   // signed: any pair within rho_same

    static RadiusPolicy uniform(double rho) { return {Uniform, rho, 0, 0}; }
    static RadiusPolicy signed_radii(double cross, double same) { return {Signed, 0, cross, same}; }
};

// Connected components of the proximity graph on ids 0..n-1. signs may be empty
// for the uniform policy.
combinat::Partition collision_partition(const std::vector<RVec>& y, const RadiusPolicy& policy,
                                        const std::vector<int>& signs = {});

struct CellSlack {
    combinat::Cell cell;
    double sum_norm = 0;  // |sum q|
    double bound = 0;     // beta |S| / r
};

struct CompletenessReport {
    bool complete = true;
    std::vector<CellSlack> cells;
};

struct CollisionPoint {
    RVec y{};
    RVec q{};
};

CompletenessReport beta_complete(const std::vector<CollisionPoint>& X, const combinat::Partition& P, double beta,
                                 double r);

// ---- concatenation ----

struct ConcatenatedPath {
    std::vector<double> S;  // K + 1 flight durations
    std::vector<RVec> P;    // K + 1 momenta
    std::vector<RVec> Y;    // K positions
    std::vector<double> T;  // K collision times
    std::vector<int> seg;   // segment of each collision
    std::vector<double> residual;  // |Y_{a+1} - (Y_a + S_a P_a)|, a = 1..K-1
    std::vector<double> bound;     // C alpha (r + S^2 / (tau r) + S r / tau)
    bool within = true;

    int k() const { return int(Y.size()); }
    // concatenated data as one path of duration N tau
    Path as_path(int d) const;
};

ConcatenatedPath concatenate(const ExtendedPath& G, double alpha, double r, double C = 10.0);

// |Y_b - (Y_a + (T_b - T_a) P_a)| between two collisions (1-based)
double straightness_residual(const ConcatenatedPath& c, int a, int b);

// ---- events ----

// Index pairs use collision-set ids; kStart stands for the start of the side
// of the other member.
constexpr int kStart = -1;
using IdPair = std::pair<int, int>;

struct EventReport {
    combinat::CollisionSet K;
    combinat::Partition P;              // dependency components at rec_radius
    std::vector<IdPair> immediate;
    std::vector<IdPair> recollisions;
    std::vector<IdPair> tubes;          // selected tube mode
    std::vector<IdPair> cones;
    std::vector<IdPair> ladder_breaking;
    std::vector<IdPair> cluster_edges;
    std::vector<int> atypical;
    std::vector<int> typical;
    bool time_consistent = true;

    std::vector<int> immediate_ids() const;
    bool incidence_free() const { return recollisions.empty() && tubes.empty(); }
};

struct DetectOptions {
    bool cones = true;
    bool ladder_breaking = true;
};

EventReport detect_events(const DoubledPath& G, const PathParams& params, const DetectOptions& opt = {});
// single path as the + side of a doubled path with an empty - side
EventReport detect_events(const Path& w, const PathParams& params, const DetectOptions& opt = {});

// Cone feasibility for one side: exists v on the radial x angular grid and real
// t meeting the three energy windows, the position bound and |v - p_a| >= exclusion.
// P and Y are the side's concatenated momenta and positions; a < b are 1-based.
bool cone_feasible(const std::vector<RVec>& P, const std::vector<RVec>& Y, int a, int b, int d,
                   const PathParams& params, double exclusion);

struct Skeleton {
    std::vector<combinat::Edge> rec, tube, cone, cluster, atypical;
    int complexity() const;
    std::vector<int> support() const;
    combinat::SkeletonSpec spec() const;
};

// minimal spanning forests of each event graph over the doubled index set
Skeleton build_skeleton(const EventReport& report);

std::vector<combinat::AbstractInterval> maximal_typical_intervals(const EventReport& report);

// ---- ladder structure ----

struct LadderCheck {
    bool hypotheses_hold = false;
    std::string failed;  // beta_complete, start_distance, endpoint, incidence, matching
    bool is_ladder = false;
    combinat::Partition P;
};

LadderCheck verify_generalized_ladder(const DoubledPath& G, const PathParams& params);

// collision data of both sides: + uses q = P_a - P_{a-1}, - uses P_{a-1} - P_a
std::vector<CollisionPoint> collision_points(const DoubledPath& G);

struct CampaignResult {
    std::vector<DoubledPath> accepted;
    std::vector<LadderCheck> checks;
    long attempts = 0;
    double acceptance_rate = 0;
    int ladder_verdicts = 0;
    std::vector<int> proposals_by_kind;  // attempts per proposal kind
    std::vector<int> accepted_by_kind;
    std::vector<DoubledPath> counterexamples;
};

// Rejection sampling of beta-complete, incidence-free doubled paths whose
// partition is a matching (d = 2, 1..k_max collisions per side).
CampaignResult ladder_campaign(const PathParams& params, int n_target, int k_max, std::uint64_t seed,
                               long max_attempts = 100000);

// Path in the tolerance-alpha set: on-shell momenta, transport offsets below
// alpha r, occasional immediate recollisions (short hop and restored momentum).
Path sample_constrained_path(const PathParams& params, int k, const PhasePoint& start, double t_total, Rng& rng,
                             int d = 2);

// ---- expectations ----

// <p | phi_xi> with the continuum normalization (2 pi)^{-d/2} int e^{-ipy} phi(y) dy
cplx packet_momentum_amplitude(const PhasePoint& xi, const wavepacket::Envelope& env, const RVec& p);

// Single-segment doubled path. Overlaps x phase x eps^{k+ + k-} x a_value x
// product over cells of the Wick moments of the localized potential.
cplx p_expectation(const DoubledPath& G, const combinat::Partition& P, const potential::CorrelationProfile& R,
                   const potential::CutoffBump& bump, const Grid& g, const wavepacket::Envelope& env, double eps,
                   cplx a_value = 1.0);

// ---- Monte Carlo path statistics ----

struct PathStats {
    double eps = 0;
    double t = 0;
    int n_paths = 0;
    double mean_collisions = 0;
    double mean_collisions_stderr = 0;
    double expected_collisions = 0;  // eps^2 K t
    double rate_recollision = 0;     // fraction of paths with at least one event
    double rate_tube = 0;
    double rate_cone = 0;
    std::uint64_t ensemble_hash = 0;
    std::vector<Path> paths;

    double rate_stderr(double rate) const;
};

struct PathMcOptions {
    bool keep_paths = false;
    bool cones = true;
};

// Shell jump process from the first node of `shell`, started at the origin.
PathStats sample_paths_mc(double t, const boltzmann::CollisionKernel& kernel, std::size_t shell, int n,
                          std::uint64_t seed, const PathParams& params, const PathMcOptions& opt = {});

std::string path_to_json(const Path& w);
Path path_from_json(const std::string& s);

}  // namespace kinlab::pathspace
