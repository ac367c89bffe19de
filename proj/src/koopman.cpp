#include "koopzubov/koopman.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SVD>
#include <Eigen/LU>

#include "koopzubov/parallel.hpp"
#include "koopzubov/quadrature.hpp"

namespace kz {

VectorFieldModel::VectorFieldModel(Eigen::MatrixXd coeffs, Dictionary dictionary)
    : coeffs_(std::move(coeffs)), dictionary_(std::move(dictionary)) {
  if (coeffs_.cols() != dictionary_.size()) throw ConfigError("vector-field coefficients do not match dictionary size");
  if (coeffs_.rows() != dictionary_.dim()) throw ConfigError("vector-field rows do not match state dimension");
  bias_ = Eigen::VectorXd::Zero(coeffs_.rows());
  offset_ = eval(State::Zero(coeffs_.rows()));
}

VectorFieldModel restore_vector_field(Eigen::MatrixXd coeffs, Eigen::VectorXd bias, Eigen::VectorXd offset,
                                      bool corrected, Dictionary dictionary) {
  VectorFieldModel v(std::move(coeffs), std::move(dictionary));
  if (bias.size() != v.coeffs_.rows() || offset.size() != v.coeffs_.rows())
    throw ConfigError("vector-field bias/offset length mismatch");
  v.bias_ = std::move(bias);
  v.offset_ = std::move(offset);
  v.corrected_ = corrected;
  return v;
}

State VectorFieldModel::eval(const State& x) const {
  return coeffs_ * dictionary_.eval(x).transpose() - bias_;
}

Eigen::MatrixXd VectorFieldModel::jacobian(const State& x) const { return coeffs_ * dictionary_.grad(x); }

std::vector<Interval> VectorFieldModel::eval_interval(const DictionaryEnclosure& e) const {
  const Eigen::Index n = coeffs_.rows();
  std::vector<Interval> out(static_cast<std::size_t>(n), Interval(0.0));
  for (Eigen::Index j = 0; j < n; ++j) {
    Interval acc(-bias_[j]);
    for (Eigen::Index k = 0; k < coeffs_.cols(); ++k) {
      const double c = coeffs_(j, k);
      if (c != 0.0) acc += c * e.value[static_cast<std::size_t>(k)];
    }
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

IntervalMatrix VectorFieldModel::jacobian_interval(const DictionaryEnclosure& e) const {
  const std::size_t n = static_cast<std::size_t>(coeffs_.rows());
  IntervalMatrix J(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      Interval acc(0.0);
      for (Eigen::Index k = 0; k < coeffs_.cols(); ++k) {
        const double c = coeffs_(static_cast<Eigen::Index>(j), k);
        if (c != 0.0) acc += c * e.grad(static_cast<std::size_t>(k), i);
      }
      J(j, i) = acc;
    }
  }
  return J;
}

std::vector<Interval> VectorFieldModel::eval_interval(const Box& b) const {
  return eval_interval(dictionary_.enclose(b, 0));
}

IntervalMatrix VectorFieldModel::jacobian_interval(const Box& b) const {
  return jacobian_interval(dictionary_.enclose(b, 1));
}

Eigen::MatrixXd assemble_observables(const TrajectoryDataset& ds, const Dictionary& d) {
  Eigen::MatrixXd B(static_cast<Eigen::Index>(ds.size()), d.size());
  for (std::size_t m = 0; m < ds.size(); ++m) {
    const State& x0 = ds.trajectories[m].x0;
    if (x0.size() != d.dim()) throw DomainError("initial condition dimension differs from dictionary");
    B.row(static_cast<Eigen::Index>(m)) = d.eval(x0);
  }
  return B;
}

Eigen::VectorXd spline_resolvent_weights(std::span<const double> times, double mu, const QuadratureSpec& q) {
  const std::size_t K = times.size();
  if (K < 4) throw ConfigError("resolvent quadrature needs at least 4 snapshots per trajectory");
  if (q.panels_per_interval < 1 || q.nodes_per_panel < 1) throw ConfigError("invalid quadrature specification");
  const double h = times[1] - times[0];
  for (std::size_t i = 1; i < K; ++i) {
    if (std::fabs((times[i] - times[i - 1]) - h) > 1e-9 * std::max(1.0, h))
      throw ConfigError("snapshot times must be uniformly spaced");
  }

  const GaussLegendreRule rule = gauss_legendre(q.nodes_per_panel);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  // Coefficients of the second-derivative unknowns M_i.
  Eigen::VectorXd cM = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  const double sub = h / q.panels_per_interval;

  for (std::size_t i = 0; i + 1 < K; ++i) {
    double alpha = 0, beta = 0, gamma = 0, delta = 0;
    for (int p = 0; p < q.panels_per_interval; ++p) {
      const double a = times[i] + p * sub;
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double s = a + 0.5 * sub * (rule.nodes[k] + 1.0);
        const double wk = 0.5 * sub * rule.weights[k] * std::exp(-mu * s);
        const double A = (times[i + 1] - s) / h;
        const double Bc = 1.0 - A;
        alpha += wk * A;
        beta += wk * Bc;
        gamma += wk * (A * A * A - A) * h * h / 6.0;
        delta += wk * (Bc * Bc * Bc - Bc) * h * h / 6.0;
      }
    }
    w[static_cast<Eigen::Index>(i)] += alpha;
    w[static_cast<Eigen::Index>(i + 1)] += beta;
    cM[static_cast<Eigen::Index>(i)] += gamma;
    cM[static_cast<Eigen::Index>(i + 1)] += delta;
  }

  // Not-a-knot end conditions (third derivative continuous at t_1 and
  // t_{K-2}): M_0 = 2 M_1 - M_2, M_{K-1} = 2 M_{K-2} - M_{K-3}. With natural
  // ends the spline is only O(h^2) near t = 0, where exp(-mu t) weighs most.
  // Interior rows M_{i-1} + 4 M_i + M_{i+1} = 6/h^2 (y_{i+1} - 2 y_i + y_{i-1})
  // then read 6 M_1 = ... and 6 M_{K-2} = ... at the ends; the adjoint solve
  // folds c . M back onto the samples.
  const Eigen::Index m = static_cast<Eigen::Index>(K - 2);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    T(i, i) = 4.0;
    if (i > 0) T(i, i - 1) = 1.0;
    if (i + 1 < m) T(i, i + 1) = 1.0;
  }
  T(0, 0) = 6.0;
  T(0, 1) = 0.0;
  T(m - 1, m - 1) = 6.0;
  T(m - 1, m - 2) = 0.0;
  Eigen::VectorXd c = cM.segment(1, m);
  c[0] += 2.0 * cM[0];
  c[1] -= cM[0];
  c[m - 1] += 2.0 * cM[static_cast<Eigen::Index>(K - 1)];
  c[m - 2] -= cM[static_cast<Eigen::Index>(K - 1)];
  const Eigen::VectorXd z = T.transpose().partialPivLu().solve(c);

  const double s6 = 6.0 / (h * h);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index r = i + 1;
    w[r - 1] += s6 * z[i];
    w[r] -= 2.0 * s6 * z[i];
    w[r + 1] += s6 * z[i];
  }
  return w;
}

ResolventMatrix resolvent_quadrature(const TrajectoryDataset& ds, const Dictionary& d, double mu,
                                     const QuadratureSpec& q, int threads) {
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  ResolventMatrix R;
  R.mu = mu;
  R.tau_s = ds.tau_s;
  R.quadrature = q;
  R.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.size()), d.size());
  if (ds.size() == 0 || ds.tau_s == 0.0) return R;

  const auto& times = ds.trajectories.front().times;
  const Eigen::VectorXd w = spline_resolvent_weights(times, mu, q);
  parallel_for(ds.size(), threads, [&](std::size_t m) {
    const Trajectory& tr = ds.trajectories[m];
    if (tr.times.size() != times.size()) throw ConfigError("trajectories have differing snapshot counts");
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d.size());
    for (std::size_t k = 0; k < tr.states.size(); ++k) acc += w[static_cast<Eigen::Index>(k)] * d.eval(tr.states[k]);
    R.values.row(static_cast<Eigen::Index>(m)) = acc;
  });
  return R;
}

GeneratorModel learn_generator(const Eigen::MatrixXd& B, const ResolventMatrix& R, const Dictionary& d, double lambda,
                               double svd_tol) {
  const double mu = R.mu;
  if (!(mu > 0.0) || !(lambda > mu)) throw ConfigError("learn_generator requires lambda > mu > 0");
  if (B.rows() != R.values.rows() || B.cols() != R.values.cols() || B.cols() != d.size())
    throw ConfigError("observable and resolvent matrices disagree in shape");
  if (B.rows() == 0) throw ConfigError("no samples to learn from");

  const Eigen::MatrixXd X = ((lambda - mu) / lambda) * R.values + B / lambda;
  const Eigen::MatrixXd Y = mu * R.values - B;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  if (!(smax > 0.0)) throw NumericalError("data matrix is identically zero");
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  int rank = 0;
  double smin_kept = smax;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > svd_tol * smax) {
      inv[i] = 1.0 / s[i];
      ++rank;
      smin_kept = s[i];
    }
  }

  GeneratorModel g{
      .L = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * Y),
      .lambda = lambda,
      .mu = mu,
      .tau_s = R.tau_s,
      .dictionary = d,
      .svd_tol = svd_tol,
      .rank = rank,
      .truncated = static_cast<int>(std::min(X.rows(), X.cols())) - rank,
      .sigma_max = smax,
      .sigma_min_kept = smin_kept,
  };
  const double ny = Y.norm();
  g.relative_residual = ny > 0.0 ? (X * g.L - Y).norm() / ny : (X * g.L - Y).norm();
  return g;
}

double apply_generator(const GeneratorModel& g, const Eigen::VectorXd& zeta, const State& x) {
  if (zeta.size() != g.L.cols()) throw DomainError("coefficient vector length differs from dictionary size");
  return g.dictionary.eval(x).dot(g.L * zeta);
}

VectorFieldModel extract_vector_field(const GeneratorModel& g) {
  const int n = g.dictionary.dim();
  Eigen::MatrixXd C(n, g.dictionary.size());
  for (int j = 0; j < n; ++j) {
    const auto idx = g.dictionary.coordinate_index(j);
    if (!idx) throw ConfigError("dictionary lacks coordinate function x" + std::to_string(j + 1));
    C.row(j) = g.L.col(*idx).transpose();
  }
  return VectorFieldModel(std::move(C), g.dictionary);
}

VectorFieldModel correct_equilibrium(VectorFieldModel v) {
  if (v.corrected_) return v;
  const State f0 = v.eval(State::Zero(v.dim()));
  if (const auto c = v.dictionary_.constant_index(); c && v.dictionary_.kind() == DictionaryKind::Monomial) {
    // Every non-constant monomial vanishes at the origin, so adjusting the
    // constant coefficient removes f_hat(0) exactly.
    v.coeffs_.col(*c) -= f0;
  } else {
    v.bias_ += f0;
  }
  v.offset_ = f0;
  v.corrected_ = true;
  return v;
}

Eigen::MatrixXd linearize_at_origin(const VectorFieldModel& v) { return v.jacobian(State::Zero(v.dim())); }

double generator_identity_error(const GeneratorModel& g, const OdeSystem& oracle, std::span<const State> samples) {
  double worst = 0.0;
  for (const auto& y : samples) {
    const Eigen::RowVectorXd lhs = g.dictionary.eval(y) * g.L;
    const Eigen::VectorXd rhs = g.dictionary.grad(y) * oracle(y);
    worst = std::max(worst, (lhs.transpose() - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace kz
