#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "koopzubov/certificates.hpp"

using namespace kz;

namespace {

State s1(double x) {
  State v(1);
  v << x;
  return v;
}

State s2(double a, double b) {
  State v(2);
  v << a, b;
  return v;
}

// x' = -x on each coordinate: every monomial is an eigenfunction with
// eigenvalue -(total degree), so the exact generator is diagonal.
GeneratorModel exact_contraction_generator(const Dictionary& d) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d.size(), d.size());
  for (int k = 0; k < d.size(); ++k) {
    const auto& e = d.exponents()[static_cast<std::size_t>(k)];
    L(k, k) = -static_cast<double>(std::accumulate(e.begin(), e.end(), 0));
  }
  return GeneratorModel{.L = L, .lambda = 1e8, .mu = 2.5, .tau_s = 5, .dictionary = d};
}

VectorFieldModel exact_contraction_field(const Dictionary& d) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d.dim(), d.size());
  for (int j = 0; j < d.dim(); ++j) C(j, *d.coordinate_index(j)) = -1.0;
  return VectorFieldModel(C, d);
}

std::vector<State> grid1(double lo, double hi, int n) {
  std::vector<State> out;
  for (int i = 0; i < n; ++i) out.push_back(s1(lo + (hi - lo) * i / (n - 1)));
  return out;
}

std::vector<State> uniform2(const Box& b, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u0(b[0].lo(), b[0].hi()), u1(b[1].lo(), b[1].hi());
  std::vector<State> out;
  for (int i = 0; i < n; ++i) out.push_back(s2(u0(rng), u1(rng)));
  return out;
}

// Even powers 0..10 of a scalar state.
Dictionary even_monomials() { return Dictionary::from_exponents(1, {{0}, {2}, {4}, {6}, {8}, {10}}); }

}  // namespace

TEST(MatrixLyapunov, KnownSolutions) {
  const auto q = solve_matrix_lyapunov(-Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_TRUE(q.P().isApprox(0.5 * Eigen::MatrixXd::Identity(2, 2), 1e-14));

  Eigen::MatrixXd A(2, 2);
  A << 0, 1, -0.5, -0.5;
  const auto p = solve_matrix_lyapunov(A, Eigen::MatrixXd::Identity(2, 2));
  EXPECT_LE(p.residual(A), 1e-12);
  EXPECT_EQ(p.P(), p.P().transpose());
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(p.P()).info(), Eigen::Success);
  EXPECT_GT(p.lambda_min(), 0.0);

  Eigen::MatrixXd U(2, 2);
  U << 1, 0, 0, -1;
  EXPECT_THROW(solve_matrix_lyapunov(U, Eigen::MatrixXd::Identity(2, 2)), CertificationImpossible);
  EXPECT_FALSE(is_hurwitz(U));
  EXPECT_TRUE(is_hurwitz(A));
}

TEST(MatrixLyapunov, RandomHurwitzResiduals) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd A(3, 3);
    for (int i = 0; i < 9; ++i) A(i) = n01(rng);
    // Shift into the open left half plane.
    const double shift = A.eigenvalues().real().maxCoeff() + 0.1;
    A -= shift * Eigen::MatrixXd::Identity(3, 3);
    const auto q = solve_matrix_lyapunov(A, Eigen::MatrixXd::Identity(3, 3));
    EXPECT_LE(q.residual(A), 1e-10);
    EXPECT_GT(q.lambda_min(), 0.0);
  }
}

TEST(Eta, Values) {
  EXPECT_EQ(eta(s2(0, 0), 0.1), 0.0);
  EXPECT_NEAR(eta(s2(1, 1), 0.1), 0.2, 1e-15);
  EXPECT_NEAR(eta(s2(3, 4), 0.1), 2.5, 1e-15);
}

TEST(Candidate, BasisSelectionAndGradients) {
  const auto d = Dictionary::monomial(2, 4, 4);
  const State x = s2(0.7, -1.3);
  for (int k = 0; k < d.size(); ++k) {
    Eigen::VectorXd th = Eigen::VectorXd::Zero(d.size());
    th(k) = 1;
    const LyapunovCandidate c(th, d, CertificateForm::Zubov);
    EXPECT_EQ(c.value(x), d.eval(x)(k));
  }
  Eigen::VectorXd th = Eigen::VectorXd::LinSpaced(d.size(), -1, 1);
  const LyapunovCandidate c(th, d, CertificateForm::Lyapunov);
  const double h = 1e-6;
  const State g = c.gradient(x);
  for (int j = 0; j < 2; ++j) {
    State p = x, m = x;
    p(j) += h;
    m(j) -= h;
    const double fd = (c.value(p) - c.value(m)) / (2 * h);
    EXPECT_NEAR(g(j), fd, 1e-6 * std::max(1.0, std::fabs(fd)));
  }
  const Interval v = c.value(Box::point(x));
  EXPECT_TRUE(v.contains(c.value(x)));
  EXPECT_LE(v.width(), 1e-10);
  EXPECT_EQ(c.negated().value(x), -c.value(x));
}

TEST(ZubovLsq, ScalarClosedFormSolution) {
  const auto d = even_monomials();
  const auto g = exact_contraction_generator(d);
  const auto pts = grid1(-2, 2, 401);
  const std::vector<BoundaryPoint> boundary{{s1(0), 0.0}};
  const auto W = zubov_lsq(g, pts, boundary);
  double err = 0;
  for (const auto& x : pts) err = std::max(err, std::fabs(W.value(x) - (1 - std::exp(-0.05 * x(0) * x(0)))));
  EXPECT_LE(err, 5e-3);
  EXPECT_LE(residual_stats(W, g, pts).rms, 5e-3);
  EXPECT_EQ(residual_stats(W, g, pts).range_violation, 0.0);
}

TEST(LyapunovLsq, ScalarQuadraticSolution) {
  const auto d = Dictionary::monomial(1, 5, 1);
  const auto g = exact_contraction_generator(d);
  const auto pts = grid1(-2, 2, 201);
  const auto V = lyapunov_lsq(g, pts);
  for (const auto& x : pts) EXPECT_NEAR(V.value(x), 0.05 * x(0) * x(0), 1e-6);
  EXPECT_NEAR(V.value(s1(0)), 0.0, std::max(1e-12, V.fit_stats().boundary_rms));
}

TEST(ZubovLsq, ZeroCandidateDiagnostics) {
  const auto d = Dictionary::monomial(2, 3, 3);
  const auto g = exact_contraction_generator(d);
  const Box box{Interval(-1, 1), Interval(-1, 1)};
  const auto pts = uniform2(box, 200, 1);
  const auto bnd = perimeter_boundary(box, 20, 2);
  const LyapunovCandidate zero(Eigen::VectorXd::Zero(d.size()), d, CertificateForm::Zubov, 0.1);

  double sq = 0, sq_obj = 0;
  for (const auto& x : pts) {
    sq += eta(x, 0.1) * eta(x, 0.1);
    sq_obj += eta(x, 0.1) * eta(x, 0.1) / pts.size();
  }
  EXPECT_NEAR(residual_stats(zero, g, pts).rms, std::sqrt(sq / pts.size()), 1e-14);
  // Boundary term: lambda_b (1/P) sum b^2 with b = 0 at the origin and 1 elsewhere.
  const double bterm = 100.0 * 20.0 / 21.0;
  const LyapunovCandidate zero_b(Eigen::VectorXd::Zero(d.size()), d, CertificateForm::Zubov, 0.1, 100.0);
  EXPECT_NEAR(pde_objective(zero_b, g, pts, bnd), sq_obj + bterm, 1e-10);
}

TEST(ZubovLsq, RouteEquivalenceOnExactModels) {
  {
    const auto d = even_monomials();
    const auto pts = grid1(-2, 2, 101);
    const std::vector<BoundaryPoint> boundary{{s1(0), 0.0}, {s1(2.0), 1.0}, {s1(-2.0), 1.0}};
    const auto a = zubov_lsq(exact_contraction_generator(d), pts, boundary);
    const auto b = zubov_lsq_direct(exact_contraction_field(Dictionary::monomial(1, 11, 1)), pts, boundary);
    // Different dictionaries: compare values instead of coefficients here.
    for (const auto& x : pts) EXPECT_NEAR(a.value(x), b.value(x), 1e-4);
  }
  const auto d = Dictionary::monomial(2, 4, 4);
  const Box box{Interval(-1, 1), Interval(-1, 1)};
  const auto pts = uniform2(box, 300, 3);
  const auto bnd = perimeter_boundary(box, 40, 4);
  const auto g = exact_contraction_generator(d);
  const auto f = exact_contraction_field(d);
  const auto a = zubov_lsq(g, pts, bnd);
  const auto b = zubov_lsq_direct(f, pts, bnd);
  EXPECT_LE((a.theta() - b.theta()).norm() / a.theta().norm(), 1e-6);
  const auto la = lyapunov_lsq(g, pts), lb = lyapunov_lsq_direct(f, pts);
  EXPECT_LE((la.theta() - lb.theta()).norm() / la.theta().norm(), 1e-6);
}

TEST(ZubovLsq, PerturbationsNeverImproveObjective) {
  const auto d = Dictionary::monomial(2, 4, 4);
  const Box box{Interval(-1.5, 1.5), Interval(-1.5, 1.5)};
  const auto pts = uniform2(box, 500, 5);
  const auto bnd = perimeter_boundary(box, 50, 6);
  // A non-normal generator so the fit is not exact.
  auto g = exact_contraction_generator(d);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  for (int i = 0; i < g.L.size(); ++i) g.L(i) += 0.05 * n01(rng);

  PdeOptions opt;
  opt.ridge = 0.0;
  const auto W = zubov_lsq(g, pts, bnd, opt);
  const double base = pde_objective(W, g, pts, bnd);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd th = W.theta();
    for (int k = 0; k < th.size(); ++k) th(k) += 1e-4 * n01(rng);
    const LyapunovCandidate p(th, d, CertificateForm::Zubov, W.r(), W.lambda_b());
    EXPECT_GE(pde_objective(p, g, pts, bnd), base * (1 - 1e-12));
  }
}

TEST(ZubovLsq, BoundaryWeightMonotone) {
  const auto d = Dictionary::monomial(2, 5, 5);
  const Box box{Interval(-2, 2), Interval(-2, 2)};
  const auto pts = uniform2(box, 600, 9);
  const auto bnd = perimeter_boundary(box, 60, 10);
  auto g = exact_contraction_generator(d);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  for (int i = 0; i < g.L.size(); ++i) g.L(i) += 0.02 * n01(rng);

  double prev = INFINITY;
  for (double lb : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    PdeOptions opt;
    opt.lambda_b = lb;
    opt.ridge = 0.0;
    const auto W = zubov_lsq(g, pts, bnd, opt);
    EXPECT_LE(W.fit_stats().boundary_rms, prev * (1 + 1e-9)) << lb;
    prev = W.fit_stats().boundary_rms;
    // A single boundary residual is bounded by sqrt(rows) times the RMS.
    EXPECT_LE(std::fabs(W.value(State::Zero(2))), std::sqrt(61.0) * W.fit_stats().boundary_rms + 1e-12);
  }
}

TEST(ZubovLsq, InputValidation) {
  const auto d = Dictionary::monomial(2, 3, 3);
  const auto g = exact_contraction_generator(d);
  const std::vector<State> pts{s2(0.5, 0.5)};
  EXPECT_THROW(zubov_lsq(g, pts, {}), ConfigError);
  const std::vector<BoundaryPoint> no_origin{{s2(1, 1), 1.0}};
  EXPECT_THROW(zubov_lsq(g, pts, no_origin), ConfigError);
  const std::vector<BoundaryPoint> ok{{s2(0, 0), 0.0}};
  EXPECT_THROW(zubov_lsq(g, std::vector<State>{}, ok), ConfigError);
  PdeOptions bad;
  bad.r = 0;
  EXPECT_THROW(zubov_lsq(g, pts, ok, bad), ConfigError);
}

TEST(PerimeterBoundary, LiesOnTheBox) {
  const Box box{Interval(-2.5, 2.5), Interval(-3.5, 3.5)};
  const auto b = perimeter_boundary(box, 100, 1);
  ASSERT_EQ(b.size(), 101u);
  EXPECT_TRUE(b[0].x.isZero());
  EXPECT_EQ(b[0].value, 0.0);
  for (std::size_t k = 1; k < b.size(); ++k) {
    const auto& x = b[k].x;
    EXPECT_EQ(b[k].value, 1.0);
    EXPECT_TRUE(box.contains(x));
    const bool on_edge = x(0) == -2.5 || x(0) == 2.5 || x(1) == -3.5 || x(1) == 3.5 ||
                         std::fabs(std::fabs(x(0)) - 2.5) < 1e-12 || std::fabs(std::fabs(x(1)) - 3.5) < 1e-12;
    EXPECT_TRUE(on_edge);
  }
  const auto again = perimeter_boundary(box, 100, 1);
  EXPECT_EQ(again[57].x, b[57].x);
}
