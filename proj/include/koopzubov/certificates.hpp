#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "koopzubov/dictionary.hpp"
#include "koopzubov/interval.hpp"
#include "koopzubov/koopman.hpp"

namespace kz {

// Scalar function whose sublevel sets the verifier reasons about. Interval
// overloads must enclose the true range over the box.
class LevelFunction {
 public:
  virtual ~LevelFunction() = default;

  virtual int dim() const = 0;
  virtual double value(const State& x) const = 0;
  virtual State gradient(const State& x) const = 0;

  virtual Interval value(const Box& b) const = 0;
  virtual std::vector<Interval> gradient(const Box& b) const = 0;
  // n x n enclosure of the Hessian over b.
  virtual IntervalMatrix hessian(const Box& b) const = 0;
};

// V_P(x) = x^T P x with P A + A^T P = -Q.
class QuadraticLyapunov final : public LevelFunction {
 public:
  QuadraticLyapunov(Eigen::MatrixXd P, Eigen::MatrixXd Q);

  const Eigen::MatrixXd& P() const { return P_; }
  const Eigen::MatrixXd& Q() const { return Q_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }

  int dim() const override { return static_cast<int>(P_.rows()); }
  double value(const State& x) const override;
  State gradient(const State& x) const override;
  Interval value(const Box& b) const override;
  std::vector<Interval> gradient(const Box& b) const override;
  IntervalMatrix hessian(const Box& b) const override;

  // Relative residual ||P A + A^T P + Q||_F / ||Q||_F.
  double residual(const Eigen::MatrixXd& A) const;

 private:
  Eigen::MatrixXd P_;
  Eigen::MatrixXd Q_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

enum class CertificateForm { Lyapunov, Zubov };

const char* to_string(CertificateForm f);
CertificateForm certificate_form_from_string(std::string_view s);

struct FitStats {
  double interior_rms = 0.0;
  double boundary_rms = 0.0;
  int rank = 0;
  double sigma_max = 0.0;
};

// V(x) = Z_N(x) theta.
class LyapunovCandidate final : public LevelFunction {
 public:
  LyapunovCandidate(Eigen::VectorXd theta, Dictionary dictionary, CertificateForm form, double r = 0.1,
                    double lambda_b = 0.0, FitStats fit = {});

  const Eigen::VectorXd& theta() const { return theta_; }
  const Dictionary& dictionary() const { return dictionary_; }
  CertificateForm form() const { return form_; }
  double r() const { return r_; }
  double lambda_b() const { return lambda_b_; }
  const FitStats& fit_stats() const { return fit_; }

  int dim() const override { return dictionary_.dim(); }
  double value(const State& x) const override;
  State gradient(const State& x) const override;
  Interval value(const Box& b) const override;
  std::vector<Interval> gradient(const Box& b) const override;
  IntervalMatrix hessian(const Box& b) const override;

  // Same quantities from an enclosure computed once for several consumers.
  Interval value(const DictionaryEnclosure& e) const;
  std::vector<Interval> gradient(const DictionaryEnclosure& e) const;
  IntervalMatrix hessian(const DictionaryEnclosure& e) const;

  LyapunovCandidate negated() const;

 private:
  Eigen::VectorXd theta_;
  Dictionary dictionary_;
  CertificateForm form_;
  double r_;
  double lambda_b_;
  FitStats fit_;
};

// Free-function spellings.
inline double eval_candidate(const LyapunovCandidate& c, const State& x) { return c.value(x); }
inline State grad_candidate(const LyapunovCandidate& c, const State& x) { return c.gradient(x); }
inline Interval eval_candidate(const LyapunovCandidate& c, const Box& b) { return c.value(b); }
inline std::vector<Interval> grad_candidate(const LyapunovCandidate& c, const Box& b) { return c.gradient(b); }

// Solves P A + A^T P = -Q through the Kronecker-vectorized system. Throws
// CertificationImpossible if A is not Hurwitz.
QuadraticLyapunov solve_matrix_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

bool is_hurwitz(const Eigen::MatrixXd& A);

inline double eta(const State& x, double r) { return r * x.squaredNorm(); }

struct BoundaryPoint {
  State x;
  double value = 1.0;
};

struct PdeOptions {
  double r = 0.1;
  double lambda_b = 100.0;
  // Tikhonov weight relative to the largest squared singular value of the
  // column-equilibrated system.
  double ridge = 1e-10;
  int threads = 1;
};

// min (1/M) sum_i |[Z(x_i) L - eta(x_i) Z(x_i)] theta + eta(x_i)|^2
//     + lambda_b (1/P) sum_j |Z(y_j) theta - b(y_j)|^2
// The boundary set must contain the origin with value 0.
LyapunovCandidate zubov_lsq(const GeneratorModel& g, std::span<const State> interior,
                            std::span<const BoundaryPoint> boundary, const PdeOptions& opt = {});

// Z(x_i) L theta = -eta(x_i), with the single boundary row V(0) = 0.
LyapunovCandidate lyapunov_lsq(const GeneratorModel& g, std::span<const State> interior,
                               const PdeOptions& opt = {});

// Same objectives with the generator rows replaced by grad Z(x_i) . f(x_i).
LyapunovCandidate zubov_lsq_direct(const VectorFieldModel& v, std::span<const State> interior,
                                   std::span<const BoundaryPoint> boundary, const PdeOptions& opt = {});
LyapunovCandidate lyapunov_lsq_direct(const VectorFieldModel& v, std::span<const State> interior,
                                      const PdeOptions& opt = {});

// Origin with value 0 plus `count` points spread uniformly along the box
// perimeter (n = 2) or drawn uniformly on its faces (other n), value 1.
std::vector<BoundaryPoint> perimeter_boundary(const Box& box, std::size_t count, std::uint64_t seed);

struct ResidualStats {
  double rms = 0.0;
  double max = 0.0;
  // Fraction of points with V outside [-0.05, 1.05] (Zubov range diagnostic).
  double range_violation = 0.0;
  double value_min = 0.0;
  double value_max = 0.0;
};

// PDE residual Z(x) L theta + eta(x) (1 - V(x)) for Zubov candidates, or
// Z(x) L theta + eta(x) for Lyapunov candidates.
ResidualStats residual_stats(const LyapunovCandidate& c, const GeneratorModel& g, std::span<const State> points);

// Value of the stacked objective (used by optimality checks).
double pde_objective(const LyapunovCandidate& c, const GeneratorModel& g, std::span<const State> interior,
                     std::span<const BoundaryPoint> boundary);

}  // namespace kz
