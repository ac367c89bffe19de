#pragma once

#include <Eigen/Core>

#include "koopzubov/dictionary.hpp"
#include "koopzubov/dynamics.hpp"

namespace kz {

struct QuadratureSpec {
  int panels_per_interval = 1;
  int nodes_per_panel = 5;
};

// Truncated resolvent of the sampled trajectories: row m approximates
//   int_0^tau_s exp(-mu s) Z_N(phi(s, x_m)) ds.
struct ResolventMatrix {
  Eigen::MatrixXd values;  // M x N
  double mu = 0.0;
  double tau_s = 0.0;
  QuadratureSpec quadrature;
};

// Finite-section generator: L(Z_N zeta) ~= Z_N (L zeta).
struct GeneratorModel {
  Eigen::MatrixXd L;  // N x N
  double lambda = 0.0;
  double mu = 0.0;
  double tau_s = 0.0;
  Dictionary dictionary;
  double svd_tol = 0.0;
  // Solve diagnostics.
  int rank = 0;
  int truncated = 0;
  double sigma_max = 0.0;
  double sigma_min_kept = 0.0;
  double relative_residual = 0.0;
};

// f_hat(x) = coeffs * Z_N(x)^T - bias.
class VectorFieldModel {
 public:
  VectorFieldModel(Eigen::MatrixXd coeffs, Dictionary dictionary);

  int dim() const { return static_cast<int>(coeffs_.rows()); }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  const Eigen::VectorXd& bias() const { return bias_; }
  const Dictionary& dictionary() const { return dictionary_; }
  // f_hat(0) of the uncorrected model; zero until correction is applied.
  const Eigen::VectorXd& offset() const { return offset_; }
  bool corrected() const { return corrected_; }

  State eval(const State& x) const;
  Eigen::MatrixXd jacobian(const State& x) const;
  std::vector<Interval> eval_interval(const Box& b) const;
  IntervalMatrix jacobian_interval(const Box& b) const;

  // Same quantities from a precomputed dictionary enclosure (order >= 1).
  std::vector<Interval> eval_interval(const DictionaryEnclosure& e) const;
  IntervalMatrix jacobian_interval(const DictionaryEnclosure& e) const;

  friend VectorFieldModel correct_equilibrium(VectorFieldModel v);
  friend VectorFieldModel restore_vector_field(Eigen::MatrixXd, Eigen::VectorXd, Eigen::VectorXd, bool, Dictionary);

 private:
  Eigen::MatrixXd coeffs_;  // n x N
  Eigen::VectorXd bias_;
  Eigen::VectorXd offset_;
  Dictionary dictionary_;
  bool corrected_ = false;
};

// Rebuilds a serialized model without re-running the correction.
VectorFieldModel restore_vector_field(Eigen::MatrixXd coeffs, Eigen::VectorXd bias, Eigen::VectorXd offset,
                                      bool corrected, Dictionary dictionary);

// Row m = Z_N(x_m) at each initial condition.
Eigen::MatrixXd assemble_observables(const TrajectoryDataset& ds, const Dictionary& d);

// Linear functional w such that w . y approximates int_0^T exp(-mu t) y(t) dt
// for samples y on the uniform grid `times`, via a not-a-knot cubic spline and
// composite Gauss-Legendre quadrature on every inter-sample panel.
Eigen::VectorXd spline_resolvent_weights(std::span<const double> times, double mu, const QuadratureSpec& q);

ResolventMatrix resolvent_quadrature(const TrajectoryDataset& ds, const Dictionary& d, double mu,
                                     const QuadratureSpec& q = {}, int threads = 1);

// L = X^+ Y with X = (lambda - mu) R + B and Y = lambda mu R - lambda B, both
// divided by lambda before an SVD pseudoinverse that drops singular values
// below svd_tol * sigma_max.
GeneratorModel learn_generator(const Eigen::MatrixXd& B, const ResolventMatrix& R, const Dictionary& d,
                               double lambda, double svd_tol = 1e-12);

// Z_N(x) (L zeta): the generator applied to h = Z_N zeta, evaluated at x.
double apply_generator(const GeneratorModel& g, const Eigen::VectorXd& zeta, const State& x);

// f_hat_j(x) = Z_N(x) L[:, idx(x_j)].
VectorFieldModel extract_vector_field(const GeneratorModel& g);

// f_tilde = f_hat - f_hat(0), folded into the constant coefficient when the
// dictionary has one.
VectorFieldModel correct_equilibrium(VectorFieldModel v);

// A_hat = coeffs * grad Z_N(0).
Eigen::MatrixXd linearize_at_origin(const VectorFieldModel& v);

// max_m |Z_N(y_m) L[:, i] - grad z_i(y_m) . f(y_m)| over entries and samples.
double generator_identity_error(const GeneratorModel& g, const OdeSystem& oracle, std::span<const State> samples);

}  // namespace kz
