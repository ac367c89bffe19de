#include "koopzubov/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include "koopzubov/parallel.hpp"

namespace kz {

int default_threads() {
  if (const char* env = std::getenv("KOOPZUBOV_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 1;
}

OdeSystem::OdeSystem(std::string name, int dim, Field f, JacobianEnclosure jacobian)
    : name_(std::move(name)), dim_(dim), f_(std::move(f)), jacobian_(std::move(jacobian)) {
  if (dim_ <= 0) throw ConfigError("state dimension must be positive");
}

State OdeSystem::operator()(const State& x) const {
  if (x.size() != dim_) throw DomainError("state dimension mismatch for system " + name_);
  return f_(x);
}

IntervalMatrix OdeSystem::jacobian_interval(const Box& b) const {
  if (!jacobian_) throw ConfigError("system " + name_ + " has no interval Jacobian");
  if (static_cast<int>(b.size()) != dim_) throw DomainError("box dimension mismatch for system " + name_);
  return jacobian_(b);
}

OdeSystem vdp_reversed() {
  return OdeSystem(
      "vdp_reversed", 2,
      [](const State& x) {
        State dx(2);
        dx[0] = -x[1];
        dx[1] = x[0] - (1.0 - x[0] * x[0]) * x[1];
        return dx;
      },
      [](const Box& b) {
        IntervalMatrix J(2, 2);
        J(0, 0) = 0.0;
        J(0, 1) = -1.0;
        J(1, 0) = 1.0 + 2.0 * b[0] * b[1];
        J(1, 1) = sqr(b[0]) - 1.0;
        return J;
      });
}

OdeSystem two_machine() {
  constexpr double a = std::numbers::pi / 3.0;
  return OdeSystem(
      "two_machine", 2,
      [](const State& x) {
        State dx(2);
        dx[0] = x[1];
        dx[1] = -0.5 * x[1] - (std::sin(x[0] + a) - std::sin(a));
        return dx;
      },
      [](const Box& b) {
        IntervalMatrix J(2, 2);
        J(0, 0) = 0.0;
        J(0, 1) = 1.0;
        J(1, 0) = -cos(b[0] + Interval(a));
        J(1, 1) = -0.5;
        return J;
      });
}

OdeSystem linear_system(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw ConfigError("linear system needs a square matrix");
  const int n = static_cast<int>(A.rows());
  return OdeSystem(
      "linear", n, [A](const State& x) -> State { return A * x; },
      [A](const Box&) {
        IntervalMatrix J(static_cast<std::size_t>(A.rows()), static_cast<std::size_t>(A.cols()));
        for (Eigen::Index i = 0; i < A.rows(); ++i)
          for (Eigen::Index j = 0; j < A.cols(); ++j)
            J(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = A(i, j);
        return J;
      });
}

OdeSystem scalar_linear(double a) {
  return OdeSystem(
      "scalar_linear", 1, [a](const State& x) -> State { return a * x; },
      [a](const Box&) {
        IntervalMatrix J(1, 1);
        J(0, 0) = a;
        return J;
      });
}

OdeSystem builtin(std::string_view name) {
  if (name == "vdp_reversed") return vdp_reversed();
  if (name == "two_machine") return two_machine();
  throw ConfigError("unknown built-in system '" + std::string(name) + "'");
}

State DenseSolution::at(double t) const {
  if (t_.empty()) throw ConfigError("empty solution");
  if (t < t_.front() || t > t_.back()) throw ConfigError("query time outside the integrated range");
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  if (it == t_.begin()) return x_.front();
  const std::size_t i = static_cast<std::size_t>(std::distance(t_.begin(), it)) - 1;
  if (t == t_[i] || i + 1 == t_.size()) return x_[i];
  const double h = t_[i + 1] - t_[i];
  const double s = (t - t_[i]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * x_[i] + h10 * h * dx_[i] + h01 * x_[i + 1] + h11 * h * dx_[i + 1];
}

namespace {

// Dormand-Prince tableau (autonomous form, so the nodes c_i are not needed).
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

DenseSolution integrate(const OdeSystem& sys, const State& x0, double t_end, const IntegratorOptions& opts,
                        std::span<const double> hit_times) {
  if (!(t_end > 0.0)) throw ConfigError("integration horizon must be positive");
  if (!(opts.tol > 0.0)) throw ConfigError("integration tolerance must be positive");
  if (x0.size() != sys.dim()) throw DomainError("initial state dimension mismatch");

  std::vector<double> stops;
  for (double t : hit_times)
    if (t > 0.0 && t < t_end) stops.push_back(t);
  std::sort(stops.begin(), stops.end());
  stops.push_back(t_end);

  std::vector<double> ts{0.0};
  std::vector<State> xs{x0};
  State k1 = sys(x0);
  std::vector<State> dxs{k1};

  double t = 0.0;
  State x = x0;
  double h = std::min(1e-2, t_end);
  std::size_t next_stop = 0;
  std::size_t steps = 0;
  const double atol = opts.tol;
  const double rtol = opts.tol;

  while (next_stop < stops.size()) {
    if (++steps > opts.max_steps) throw IntegrationError("step budget exhausted", t);
    const double target = stops[next_stop];
    bool lands = false;
    double step = h;
    if (t + step >= target - 1e-13 * std::max(1.0, std::fabs(target))) {
      step = target - t;
      lands = true;
    }
    if (step < opts.min_step && !lands) throw IntegrationError("step size underflow", t);

    const State k2 = sys(x + step * (a21 * k1));
    const State k3 = sys(x + step * (a31 * k1 + a32 * k2));
    const State k4 = sys(x + step * (a41 * k1 + a42 * k2 + a43 * k3));
    const State k5 = sys(x + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const State k6 = sys(x + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const State xn = x + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const State k7 = sys(xn);
    const State err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double sc = atol + rtol * std::max(std::fabs(x[i]), std::fabs(xn[i]));
      norm += (err[i] / sc) * (err[i] / sc);
    }
    norm = std::sqrt(norm / static_cast<double>(x.size()));
    if (!std::isfinite(norm)) {
      h = 0.25 * step;
      if (h < opts.min_step) throw IntegrationError("non-finite state encountered", t);
      continue;
    }

    const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
    if (norm <= 1.0) {
      t = lands ? target : t + step;
      x = xn;
      k1 = k7;
      ts.push_back(t);
      xs.push_back(x);
      dxs.push_back(k1);
      if (lands) ++next_stop;
      // A step truncated to land on a stop does not limit the next proposal.
      if (!lands || factor < 1.0) h = step * factor;
      else h = std::max(h, step * factor);
    } else {
      h = step * std::max(factor, 0.1);
      if (h < opts.min_step) throw IntegrationError("step size underflow", t);
    }
  }
  return DenseSolution(std::move(ts), std::move(xs), std::move(dxs));
}

State flow(const OdeSystem& sys, const State& x0, double t, double tol) {
  if (t == 0.0) return x0;
  IntegratorOptions opts;
  opts.tol = tol;
  return integrate(sys, x0, t, opts).final_state();
}

int TrajectoryDataset::dim() const {
  if (!trajectories.empty()) return static_cast<int>(trajectories.front().x0.size());
  return static_cast<int>(domain.size());
}

std::vector<State> TrajectoryDataset::initial_conditions() const {
  std::vector<State> out;
  out.reserve(trajectories.size());
  for (const auto& tr : trajectories) out.push_back(tr.x0);
  return out;
}

std::size_t snapshot_count(double gamma, double tau_s) {
  if (!(gamma > 0.0)) throw ConfigError("sampling rate must be positive");
  if (!(tau_s >= 0.0)) throw ConfigError("horizon must be non-negative");
  return static_cast<std::size_t>(std::floor(gamma * tau_s + 1e-9)) + 1;
}

TrajectoryDataset sample_trajectories(const OdeSystem& sys, const std::vector<State>& inits, double gamma,
                                      double tau_s, const Box& domain, const IntegratorOptions& opts,
                                      int threads) {
  const std::size_t count = snapshot_count(gamma, tau_s);
  std::vector<double> times(count);
  for (std::size_t k = 0; k < count; ++k) times[k] = static_cast<double>(k) / gamma;

  for (const auto& x0 : inits) {
    if (x0.size() != sys.dim()) throw DomainError("initial condition dimension mismatch");
    if (!domain.contains(x0)) throw ConfigError("initial condition outside the sampling domain");
  }

  TrajectoryDataset ds;
  ds.gamma = gamma;
  ds.tau_s = tau_s;
  ds.domain = domain;
  ds.system = sys.name();
  ds.trajectories.resize(inits.size());

  parallel_for(inits.size(), threads, [&](std::size_t m) {
    Trajectory& tr = ds.trajectories[m];
    tr.x0 = inits[m];
    tr.times = times;
    tr.states.reserve(count);
    if (count == 1) {
      tr.states.push_back(inits[m]);
      return;
    }
    const DenseSolution sol = integrate(sys, inits[m], times.back(), opts, times);
    for (double t : times) tr.states.push_back(sol.at(t));
    tr.states.front() = inits[m];
  });
  return ds;
}

std::vector<State> sample_uniform(const Box& domain, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> dists;
  for (const auto& d : domain) dists.emplace_back(d.lo(), d.hi());
  std::vector<State> out;
  out.reserve(count);
  for (std::size_t m = 0; m < count; ++m) {
    State x(static_cast<Eigen::Index>(domain.size()));
    for (std::size_t i = 0; i < domain.size(); ++i) x[static_cast<Eigen::Index>(i)] = dists[i](rng);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<State> sample_ball(const Box& domain, std::size_t count, std::uint64_t seed) {
  // Rejection from the box; acceptance is pi/4 in 2-D, fine for small n.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto n = static_cast<Eigen::Index>(domain.size());
  std::vector<State> out;
  out.reserve(count);
  while (out.size() < count) {
    State z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = u(rng);
    if (z.squaredNorm() > 1.0) continue;
    State x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& d = domain[static_cast<std::size_t>(i)];
      x[i] = d.mid() + 0.5 * d.width() * z[i];
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<State> sample_grid(const Box& domain, std::size_t side) {
  if (side < 2) throw ConfigError("grid sampling needs at least 2 points per axis");
  const std::size_t n = domain.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= side;
  std::vector<State> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    State x(static_cast<Eigen::Index>(n));
    std::size_t rem = idx;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = rem % side;
      rem /= side;
      const double s = static_cast<double>(k) / static_cast<double>(side - 1);
      x[static_cast<Eigen::Index>(i)] = std::min(domain[i].lo() + s * domain[i].width(), domain[i].hi());
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace kz
