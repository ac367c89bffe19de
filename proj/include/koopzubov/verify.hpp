#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "koopzubov/certificates.hpp"
#include "koopzubov/dynamics.hpp"
#include "koopzubov/interval.hpp"
#include "koopzubov/koopman.hpp"

namespace kz {

struct VerifierConfig {
  // Boxes narrower than this are not split further (-> unknown).
  double eps_box = 1e-6;
  std::size_t max_boxes = 20'000'000;
  // Linearization-ball radius for the quadratic check; 0 selects the largest
  // radius for which the dominance test passes.
  double rho = 0.0;
  double bisect_tol = 1e-3;
  // Relative gap at which sup-bounding (K_f, K_fhat, nu) stops refining.
  double sup_rel_tol = 0.01;
  std::size_t sup_max_boxes = 200'000;
  int threads = 1;
  // Keep the box cover of certified checks for audit replay.
  bool record_cover = true;
};

enum class VerdictStatus { Certified, Counterexample, Unknown };

const char* to_string(VerdictStatus s);

struct VerifierStats {
  std::size_t boxes = 0;
  int max_depth = 0;
  double seconds = 0.0;
};

// Result of one box test.
struct BoxDecision {
  enum Kind { Discard, Prove, Refute, Split };
  Kind kind = Split;
  double bound = 0.0;  // certified upper bound of the checked quantity on Prove
  State witness;       // Refute: point that violates the condition
  double witness_value = 0.0;
};

using BoxTest = std::function<BoxDecision(const Box&)>;

struct CoverEntry {
  Box box;
  bool proved = false;  // false: excluded from the region of interest
  double bound = 0.0;
};

struct Verdict {
  std::string check;
  VerdictStatus status = VerdictStatus::Unknown;
  std::optional<State> witness;
  double witness_value = 0.0;
  std::optional<Box> unresolved;  // box that hit eps_box, for unknown verdicts
  std::string detail;
  VerifierStats stats;
  std::vector<CoverEntry> cover;

  bool certified() const { return status == VerdictStatus::Certified; }
};

// Depth-first interval branch and bound. A counterexample from any box ends
// the search; a box that cannot be split or an exhausted budget yields
// unknown. Never upgrades unknown to certified.
Verdict branch_and_bound(const std::string& name, const std::vector<Box>& roots, const BoxTest& test,
                         const VerifierConfig& cfg);

// Re-runs `test` on every stored cover box; true iff each is still discarded
// or proved. Fails on verdicts that are not certified or have no cover.
bool replay_cover(const Verdict& v, const BoxTest& test);

// --- box tests ------------------------------------------------------------
// The returned closures hold references to their arguments.

// A certified quadratic basin {V_P <= c}. When passed to the band check,
// points inside it are exempt: a trajectory that enters the basin converges
// regardless of V, so decrease is only needed on the band minus the basin.
struct BasinExclusion {
  const QuadraticLyapunov* q = nullptr;
  double c = 0.0;

  explicit operator bool() const { return q != nullptr; }
};

// grad V . f + beta <= 0 on {c1 <= V <= c2} (minus the excluded basin).
BoxTest band_condition_test(const LevelFunction& V, const VectorFieldModel& f, double c1, double c2, double beta,
                            BasinExclusion basin = {});
// V <= c1 implies q <= c_quad.
BoxTest sublevel_inclusion_test(const LevelFunction& V, double c1, const LevelFunction& q, double c_quad);
// V > c2 (applied to the faces of the domain).
BoxTest level_exceeds_test(const LevelFunction& V, double c2);

// Pointwise violation predicates, used to validate counterexamples.
bool band_condition_violated(const LevelFunction& V, const VectorFieldModel& f, double c1, double c2, double beta,
                             const State& x, BasinExclusion basin = {});
bool sublevel_inclusion_violated(const LevelFunction& V, double c1, const LevelFunction& q, double c_quad,
                                 const State& x);
bool level_exceeds_violated(const LevelFunction& V, double c2, const State& x);

// The 2n faces of a box as thin boxes.
std::vector<Box> box_faces(const Box& b);

// --- checks ---------------------------------------------------------------

Verdict check_band_condition(const LevelFunction& V, const VectorFieldModel& f, double c1, double c2, double beta,
                             const Box& domain, const VerifierConfig& cfg, BasinExclusion basin = {});
Verdict check_sublevel_inclusion(const LevelFunction& V, double c1, const QuadraticLyapunov& q, double c_quad,
                                 const Box& domain, const VerifierConfig& cfg);
Verdict check_domain_containment(const LevelFunction& V, double c2, const Box& domain, const VerifierConfig& cfg);

// --- constants --------------------------------------------------------------

struct SupBound {
  double upper = 0.0;  // rigorous (up to the interval library's inflation)
  double lower = 0.0;  // attained at a sampled point
  std::size_t boxes = 0;
};

// Maximizes F over the domain by best-first refinement until
// upper <= lower * (1 + rel_tol) or the budget runs out.
SupBound sup_bound(const Box& domain, const std::function<Interval(const Box&)>& F,
                   const std::function<double(const State&)>& f_point, double rel_tol, std::size_t max_boxes);

// Upper bounds of sup ||Df||_F over the domain.
SupBound bound_lipschitz_detail(const OdeSystem& f, const Box& domain, const VerifierConfig& cfg = {});
SupBound bound_lipschitz_detail(const VectorFieldModel& f, const Box& domain, const VerifierConfig& cfg = {});
double bound_lipschitz(const OdeSystem& f, const Box& domain, const VerifierConfig& cfg = {});
double bound_lipschitz(const VectorFieldModel& f, const Box& domain, const VerifierConfig& cfg = {});

// Upper bound of sup ||grad V|| over the domain (nu).
double bound_gradient_norm(const LevelFunction& V, const Box& domain, const VerifierConfig& cfg = {});

// max_y ||f(y) - f_hat(y)||_2 over the samples.
double compute_alpha(const VectorFieldModel& f_hat, std::span<const State> samples, const OdeSystem& oracle);

// ((K_f + K_fhat) delta + alpha) nu.
double required_beta(double K_f, double K_fhat, double delta, double alpha, double nu);

// Smallest 3-significant-digit value >= 1.01 * required (strictly above it).
double select_beta(double required);

// Largest distance from a point of a grid over the domain to its nearest sample.
double covering_radius(std::span<const State> samples, const Box& domain, std::size_t grid_side = 200);

// --- quadratic basin --------------------------------------------------------

struct BoundsReport {
  double K_f = 0.0;
  double K_fhat = 0.0;
  double nu = 0.0;
  double alpha = 0.0;
  double delta = 0.0;
  double delta_estimate = 0.0;  // covering radius of the samples (diagnostic)
  double beta_required = 0.0;
  double beta_used = 0.0;
};

struct QuadraticBasin {
  double c = 0.0;
  double rho = 0.0;
  double q0 = 0.0;          // -lambda_max(P A + A^T P)
  double remainder = 0.0;   // sup ||Df - A||_F over the rho-box
  double nu_P = 0.0;
  double beta_P_required = 0.0;
  double beta_P = 0.0;
  Verdict decrease;  // derivative check at the returned c
};

// Largest level c (by bisection) whose ellipsoid lies inside the domain and on
// which grad V_P . f <= -beta_P outside the rho-ball, with linearization
// dominance certified inside it. Throws CertificationImpossible if no c > 0
// certifies.
QuadraticBasin certify_quadratic_roa(const QuadraticLyapunov& q, const VectorFieldModel& f, const Box& domain,
                                     const BoundsReport& bounds, const VerifierConfig& cfg);

// Largest rho whose rho-box passes the dominance test (0 if none).
double dominance_radius(const QuadraticLyapunov& q, const VectorFieldModel& f, const Eigen::MatrixXd& A,
                        const Box& domain, double* q0_out = nullptr, double* remainder_out = nullptr);

// Largest c2 in (c1, c2_hi] certifying the band and containment checks.
// Returns nullopt when none does.
std::optional<double> maximize_c2(const LevelFunction& V, const VectorFieldModel& f, double c1, double beta,
                                  const Box& domain, const VerifierConfig& cfg, double c2_hi,
                                  BasinExclusion basin = {});

// Largest c1 in (0, c1_hi] with certified inclusion into {V_P <= c_quad}.
std::optional<double> maximize_c1(const LevelFunction& V, const QuadraticLyapunov& q, double c_quad,
                                  const Box& domain, const VerifierConfig& cfg, double c1_hi);

struct CertificationReport {
  bool certified = false;
  std::string outcome;  // "certified", "counterexample", "unknown", "not_certified"
  std::string message;
  Eigen::MatrixXd A_hat;
  Eigen::MatrixXd P;
  QuadraticBasin quadratic;
  double c = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  BoundsReport bounds;
  std::vector<Verdict> verdicts;
  double seconds = 0.0;
  bool audit_passed = false;
  bool band_outside_basin = false;
};

struct CertifyOptions {
  Eigen::MatrixXd Q;      // empty -> identity
  double delta = 3e-4;    // covering radius used in beta
  // Exempt the certified quadratic basin from the band condition (off:
  // the band condition is checked on all of {c1 <= V <= c2}).
  bool band_outside_basin = false;
  VerifierConfig verifier;
};

// End-to-end certificate: quadratic basin, constants, beta,
// c1, c2, final checks and audit replay.
CertificationReport certify_roa(const LyapunovCandidate& V, const VectorFieldModel& f, const OdeSystem& oracle,
                                std::span<const State> samples, const Box& domain, const CertifyOptions& opt);

}  // namespace kz
