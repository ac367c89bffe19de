#include "koopzubov/certificates.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "koopzubov/errors.hpp"
#include "koopzubov/parallel.hpp"

namespace kz {

// ---------------------------------------------------------------------------
// Quadratic Lyapunov function

QuadraticLyapunov::QuadraticLyapunov(Eigen::MatrixXd P, Eigen::MatrixXd Q) : P_(std::move(P)), Q_(std::move(Q)) {
  if (P_.rows() != P_.cols() || Q_.rows() != Q_.cols() || P_.rows() != Q_.rows())
    throw DomainError("P and Q must be square and of equal size");
  P_ = 0.5 * (P_ + P_.transpose()).eval();
  if (Eigen::LLT<Eigen::MatrixXd>(P_).info() != Eigen::Success)
    throw NumericalError("P is not positive definite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P_, Eigen::EigenvaluesOnly);
  lambda_min_ = es.eigenvalues().minCoeff();
  lambda_max_ = es.eigenvalues().maxCoeff();
}

double QuadraticLyapunov::value(const State& x) const { return x.dot(P_ * x); }

State QuadraticLyapunov::gradient(const State& x) const { return 2.0 * P_ * x; }

Interval QuadraticLyapunov::value(const Box& b) const {
  const auto n = static_cast<std::size_t>(dim());
  if (b.size() != n) throw DomainError("box dimension mismatch");
  Interval v(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    v += P_(i, i) * sqr(b[i]);
    for (std::size_t j = i + 1; j < n; ++j) v += (2.0 * P_(i, j)) * (b[i] * b[j]);
  }
  // x^T P x >= 0 always.
  return Interval(std::max(v.lo(), 0.0), std::max(v.hi(), 0.0));
}

std::vector<Interval> QuadraticLyapunov::gradient(const Box& b) const {
  const auto n = static_cast<std::size_t>(dim());
  if (b.size() != n) throw DomainError("box dimension mismatch");
  std::vector<Interval> g(n, Interval(0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i] += (2.0 * P_(i, j)) * b[j];
  return g;
}

IntervalMatrix QuadraticLyapunov::hessian(const Box& b) const {
  const auto n = static_cast<std::size_t>(dim());
  if (b.size() != n) throw DomainError("box dimension mismatch");
  IntervalMatrix h(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h(i, j) = 2.0 * P_(i, j);
  return h;
}

double QuadraticLyapunov::residual(const Eigen::MatrixXd& A) const {
  return (P_ * A + A.transpose() * P_ + Q_).norm() / Q_.norm();
}

bool is_hurwitz(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw DomainError("matrix must be square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  return (es.eigenvalues().real().array() < 0.0).all();
}

QuadraticLyapunov solve_matrix_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) throw DomainError("A and Q must be n x n");
  if (!is_hurwitz(A)) throw CertificationImpossible("linearization is not Hurwitz");

  // vec(P A + A^T P) = (A^T (x) I + I (x) A^T) vec(P), column-major vec.
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd At = A.transpose();
  Eigen::MatrixXd K(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      K.block(i * n, j * n, n, n) = At(i, j) * I + I(i, j) * At;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) throw NumericalError("singular Lyapunov system");
  const Eigen::VectorXd vecQ = Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);
  Eigen::VectorXd vecP = lu.solve(-vecQ);
  // One step of iterative refinement; cheap at n <= 4.
  vecP += lu.solve(-vecQ - K * vecP);
  Eigen::MatrixXd P = Eigen::Map<Eigen::MatrixXd>(vecP.data(), n, n);
  return QuadraticLyapunov(std::move(P), Q);
}

// ---------------------------------------------------------------------------
// Dictionary-based candidate

const char* to_string(CertificateForm f) { return f == CertificateForm::Zubov ? "zubov" : "lyapunov"; }

CertificateForm certificate_form_from_string(std::string_view s) {
  if (s == "zubov") return CertificateForm::Zubov;
  if (s == "lyapunov") return CertificateForm::Lyapunov;
  throw ConfigError("unknown certificate form '" + std::string(s) + "'");
}

LyapunovCandidate::LyapunovCandidate(Eigen::VectorXd theta, Dictionary dictionary, CertificateForm form, double r,
                                     double lambda_b, FitStats fit)
    : theta_(std::move(theta)),
      dictionary_(std::move(dictionary)),
      form_(form),
      r_(r),
      lambda_b_(lambda_b),
      fit_(fit) {
  if (theta_.size() != dictionary_.size()) throw DomainError("theta length does not match dictionary size");
  if (!(r_ > 0.0)) throw ConfigError("r must be positive");
}

double LyapunovCandidate::value(const State& x) const { return dictionary_.eval(x).dot(theta_); }

State LyapunovCandidate::gradient(const State& x) const { return dictionary_.grad(x).transpose() * theta_; }

Interval LyapunovCandidate::value(const DictionaryEnclosure& e) const {
  Interval v(0.0);
  for (Eigen::Index k = 0; k < theta_.size(); ++k) v += theta_[k] * e.value[static_cast<std::size_t>(k)];
  return v;
}

std::vector<Interval> LyapunovCandidate::gradient(const DictionaryEnclosure& e) const {
  std::vector<Interval> g(e.n, Interval(0.0));
  for (Eigen::Index k = 0; k < theta_.size(); ++k) {
    if (theta_[k] == 0.0) continue;
    for (std::size_t i = 0; i < e.n; ++i) g[i] += theta_[k] * e.grad(static_cast<std::size_t>(k), i);
  }
  return g;
}

IntervalMatrix LyapunovCandidate::hessian(const DictionaryEnclosure& e) const {
  if (e.hess.empty()) throw DomainError("enclosure lacks second derivatives");
  IntervalMatrix h(e.n, e.n);
  for (Eigen::Index k = 0; k < theta_.size(); ++k) {
    if (theta_[k] == 0.0) continue;
    const auto kk = static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < e.n; ++i)
      for (std::size_t j = 0; j < e.n; ++j) h(i, j) += theta_[k] * e.hessian(kk, i, j);
  }
  return h;
}

Interval LyapunovCandidate::value(const Box& b) const { return value(dictionary_.enclose(b, 0)); }

std::vector<Interval> LyapunovCandidate::gradient(const Box& b) const { return gradient(dictionary_.enclose(b, 1)); }

IntervalMatrix LyapunovCandidate::hessian(const Box& b) const { return hessian(dictionary_.enclose(b, 2)); }

LyapunovCandidate LyapunovCandidate::negated() const {
  return LyapunovCandidate(-theta_, dictionary_, form_, r_, lambda_b_, fit_);
}

// ---------------------------------------------------------------------------
// Least-squares PDE solves

namespace {

struct StackedSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::Index interior_rows = 0;
};

// Interior rows come from row_fn(x) -> (generator row a, rhs); the PDE row is
// a - eta Z for Zubov (rhs -eta) or a alone for Lyapunov (rhs -eta).
template <class RowFn>
StackedSystem assemble(const Dictionary& d, std::span<const State> interior, std::span<const BoundaryPoint> boundary,
                       CertificateForm form, const PdeOptions& opt, RowFn&& generator_row) {
  if (interior.empty()) throw ConfigError("interior collocation set is empty");
  if (!(opt.r > 0.0)) throw ConfigError("r must be positive");
  if (!(opt.lambda_b > 0.0)) throw ConfigError("lambda_b must be positive");
  if (!(opt.ridge >= 0.0)) throw ConfigError("ridge must be non-negative");
  const Eigen::Index N = d.size();
  const auto M = static_cast<Eigen::Index>(interior.size());
  const auto P = static_cast<Eigen::Index>(boundary.size());
  StackedSystem s;
  s.A.resize(M + P, N);
  s.b.resize(M + P);
  s.interior_rows = M;
  const double wi = std::sqrt(1.0 / static_cast<double>(M));
  const double wb = P > 0 ? std::sqrt(opt.lambda_b / static_cast<double>(P)) : 0.0;
  parallel_for(interior.size(), opt.threads, [&](std::size_t i) {
    const State& x = interior[i];
    const double e = eta(x, opt.r);
    Eigen::RowVectorXd row = generator_row(x);
    if (form == CertificateForm::Zubov) row -= e * d.eval(x);
    const auto r = static_cast<Eigen::Index>(i);
    s.A.row(r) = wi * row;
    s.b[r] = -wi * e;
  });
  for (Eigen::Index j = 0; j < P; ++j) {
    const auto& bp = boundary[static_cast<std::size_t>(j)];
    s.A.row(M + j) = wb * d.eval(bp.x);
    s.b[M + j] = wb * bp.value;
  }
  return s;
}

void check_boundary(std::span<const BoundaryPoint> boundary, int n) {
  if (boundary.empty()) throw ConfigError("Zubov solve needs boundary rows (W = 1 is otherwise a trivial solution)");
  bool origin = false;
  for (const auto& bp : boundary) {
    if (bp.x.size() != n) throw DomainError("boundary point dimension mismatch");
    if (bp.x.isZero(0.0) && bp.value == 0.0) origin = true;
  }
  if (!origin) throw ConfigError("boundary set must contain the origin with value 0");
}

LyapunovCandidate solve_stacked(const StackedSystem& s, const Dictionary& d, CertificateForm form,
                                const PdeOptions& opt) {
  // Monomial columns span many orders of magnitude on wide domains; equilibrate
  // to unit column norm so the relative ridge does not silence low orders.
  Eigen::VectorXd scale = s.A.colwise().norm().transpose();
  for (Eigen::Index k = 0; k < scale.size(); ++k) scale[k] = scale[k] > 0.0 ? 1.0 / scale[k] : 1.0;
  const Eigen::MatrixXd As = s.A * scale.asDiagonal();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(As, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  if (!(smax > 0.0)) throw NumericalError("least-squares system is identically zero");
  const double kappa = opt.ridge * smax * smax;
  const Eigen::VectorXd Utb = svd.matrixU().transpose() * s.b;
  Eigen::VectorXd coef(sv.size());
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double si = sv[i];
    coef[i] = si > 0.0 ? si / (si * si + kappa) * Utb[i] : 0.0;
    if (si > 1e-12 * smax) ++rank;
  }
  Eigen::VectorXd theta = scale.asDiagonal() * (svd.matrixV() * coef);

  const Eigen::VectorXd res = s.A * theta - s.b;
  const Eigen::Index M = s.interior_rows;
  const Eigen::Index P = s.A.rows() - M;
  FitStats fit;
  // Rows carry weight sqrt(1/M) and sqrt(lambda_b/P): undo it to get RMS.
  fit.interior_rms = res.head(M).norm();
  fit.boundary_rms = P > 0 ? res.tail(P).norm() / std::sqrt(opt.lambda_b) : 0.0;
  fit.rank = rank;
  fit.sigma_max = smax;
  return LyapunovCandidate(std::move(theta), d, form, opt.r, opt.lambda_b, fit);
}

std::vector<BoundaryPoint> origin_only(int n) { return {BoundaryPoint{State::Zero(n), 0.0}}; }

}  // namespace

LyapunovCandidate zubov_lsq(const GeneratorModel& g, std::span<const State> interior,
                            std::span<const BoundaryPoint> boundary, const PdeOptions& opt) {
  const Dictionary& d = g.dictionary;
  check_boundary(boundary, d.dim());
  auto s = assemble(d, interior, boundary, CertificateForm::Zubov, opt,
                    [&](const State& x) -> Eigen::RowVectorXd { return d.eval(x) * g.L; });
  return solve_stacked(s, d, CertificateForm::Zubov, opt);
}

LyapunovCandidate lyapunov_lsq(const GeneratorModel& g, std::span<const State> interior, const PdeOptions& opt) {
  const Dictionary& d = g.dictionary;
  const auto boundary = origin_only(d.dim());
  auto s = assemble(d, interior, boundary, CertificateForm::Lyapunov, opt,
                    [&](const State& x) -> Eigen::RowVectorXd { return d.eval(x) * g.L; });
  return solve_stacked(s, d, CertificateForm::Lyapunov, opt);
}

namespace {
Eigen::RowVectorXd direct_row(const VectorFieldModel& v, const State& x) {
  // Row k is grad z_k(x) . f(x).
  return (v.dictionary().grad(x) * v.eval(x)).transpose();
}
}  // namespace

LyapunovCandidate zubov_lsq_direct(const VectorFieldModel& v, std::span<const State> interior,
                                   std::span<const BoundaryPoint> boundary, const PdeOptions& opt) {
  const Dictionary& d = v.dictionary();
  check_boundary(boundary, d.dim());
  auto s = assemble(d, interior, boundary, CertificateForm::Zubov, opt,
                    [&](const State& x) { return direct_row(v, x); });
  return solve_stacked(s, d, CertificateForm::Zubov, opt);
}

LyapunovCandidate lyapunov_lsq_direct(const VectorFieldModel& v, std::span<const State> interior,
                                      const PdeOptions& opt) {
  const Dictionary& d = v.dictionary();
  const auto boundary = origin_only(d.dim());
  auto s = assemble(d, interior, boundary, CertificateForm::Lyapunov, opt,
                    [&](const State& x) { return direct_row(v, x); });
  return solve_stacked(s, d, CertificateForm::Lyapunov, opt);
}

std::vector<BoundaryPoint> perimeter_boundary(const Box& box, std::size_t count, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(box.size());
  std::vector<BoundaryPoint> out;
  out.reserve(count + 1);
  out.push_back({State::Zero(n), 0.0});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (n == 2) {
    const double w = box[0].width(), h = box[1].width();
    const double perim = 2.0 * (w + h);
    for (std::size_t k = 0; k < count; ++k) {
      double s = u(rng) * perim;
      State x(2);
      if (s < w) {
        x << box[0].lo() + s, box[1].lo();
      } else if ((s -= w) < h) {
        x << box[0].hi(), box[1].lo() + s;
      } else if ((s -= h) < w) {
        x << box[0].hi() - s, box[1].hi();
      } else {
        s -= w;
        x << box[0].lo(), box[1].hi() - s;
      }
      out.push_back({std::move(x), 1.0});
    }
    return out;
  }
  std::uniform_int_distribution<Eigen::Index> face(0, 2 * n - 1);
  for (std::size_t k = 0; k < count; ++k) {
    State x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& d = box[static_cast<std::size_t>(i)];
      x[i] = d.lo() + u(rng) * d.width();
    }
    const Eigen::Index f = face(rng);
    const auto& d = box[static_cast<std::size_t>(f / 2)];
    x[f / 2] = (f % 2) ? d.hi() : d.lo();
    out.push_back({std::move(x), 1.0});
  }
  return out;
}

ResidualStats residual_stats(const LyapunovCandidate& c, const GeneratorModel& g, std::span<const State> points) {
  ResidualStats st;
  if (points.empty()) return st;
  const Eigen::VectorXd Ltheta = g.L * c.theta();
  double sum = 0.0;
  std::size_t outside = 0;
  st.value_min = std::numeric_limits<double>::infinity();
  st.value_max = -std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    const Eigen::RowVectorXd z = c.dictionary().eval(x);
    const double V = z.dot(c.theta());
    const double e = eta(x, c.r());
    const double res = z.dot(Ltheta) + (c.form() == CertificateForm::Zubov ? e * (1.0 - V) : e);
    sum += res * res;
    st.max = std::max(st.max, std::fabs(res));
    if (V < -0.05 || V > 1.05) ++outside;
    st.value_min = std::min(st.value_min, V);
    st.value_max = std::max(st.value_max, V);
  }
  st.rms = std::sqrt(sum / static_cast<double>(points.size()));
  st.range_violation = static_cast<double>(outside) / static_cast<double>(points.size());
  return st;
}

double pde_objective(const LyapunovCandidate& c, const GeneratorModel& g, std::span<const State> interior,
                     std::span<const BoundaryPoint> boundary) {
  const Eigen::VectorXd Ltheta = g.L * c.theta();
  double fi = 0.0;
  for (const auto& x : interior) {
    const Eigen::RowVectorXd z = c.dictionary().eval(x);
    const double e = eta(x, c.r());
    double res = z.dot(Ltheta) + e;
    if (c.form() == CertificateForm::Zubov) res -= e * z.dot(c.theta());
    fi += res * res;
  }
  double fb = 0.0;
  for (const auto& bp : boundary) {
    const double res = c.value(bp.x) - bp.value;
    fb += res * res;
  }
  const double obj = interior.empty() ? 0.0 : fi / static_cast<double>(interior.size());
  return obj + (boundary.empty() ? 0.0 : c.lambda_b() * fb / static_cast<double>(boundary.size()));
}

}  // namespace kz
