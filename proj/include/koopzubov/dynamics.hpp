#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "koopzubov/interval.hpp"

namespace kz {

// Autonomous vector field x' = f(x), optionally with an interval Jacobian
// used for rigorous Lipschitz bounds.
class OdeSystem {
 public:
  using Field = std::function<State(const State&)>;
  using JacobianEnclosure = std::function<IntervalMatrix(const Box&)>;

  OdeSystem(std::string name, int dim, Field f, JacobianEnclosure jacobian = {});

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }

  State operator()(const State& x) const;
  bool has_interval_jacobian() const { return static_cast<bool>(jacobian_); }
  IntervalMatrix jacobian_interval(const Box& b) const;

 private:
  std::string name_;
  int dim_;
  Field f_;
  JacobianEnclosure jacobian_;
};

// Reversed Van der Pol oscillator: x1' = -x2, x2' = x1 - (1 - x1^2) x2.
OdeSystem vdp_reversed();
// Two-machine power system: x1' = x2, x2' = -0.5 x2 - (sin(x1 + a) - sin(a)), a = pi/3.
OdeSystem two_machine();
OdeSystem linear_system(const Eigen::MatrixXd& A);
OdeSystem scalar_linear(double a);

// Looks up "vdp_reversed" or "two_machine".
OdeSystem builtin(std::string_view name);

// Solution of an initial value problem. Steps are stored so the state can be
// queried anywhere in [0, t_end] by cubic Hermite interpolation.
class DenseSolution {
 public:
  DenseSolution() = default;
  DenseSolution(std::vector<double> t, std::vector<State> x, std::vector<State> dx)
      : t_(std::move(t)), x_(std::move(x)), dx_(std::move(dx)) {}

  double t_end() const { return t_.empty() ? 0.0 : t_.back(); }
  const State& final_state() const { return x_.back(); }
  const std::vector<double>& step_times() const { return t_; }
  const std::vector<State>& step_states() const { return x_; }

  State at(double t) const;

 private:
  std::vector<double> t_;
  std::vector<State> x_;
  std::vector<State> dx_;
};

struct IntegratorOptions {
  double tol = 1e-10;
  double min_step = 1e-14;
  std::size_t max_steps = 10'000'000;
};

// Dormand-Prince 5(4) with a mixed absolute/relative error controller. Every
// entry of `hit_times` inside (0, t_end) becomes a step boundary, so the
// state there is an integrator node rather than an interpolant.
DenseSolution integrate(const OdeSystem& sys, const State& x0, double t_end,
                        const IntegratorOptions& opts = {},
                        std::span<const double> hit_times = {});

// Flow map phi(t, x0).
State flow(const OdeSystem& sys, const State& x0, double t, double tol = 1e-10);

struct Trajectory {
  State x0;
  std::vector<double> times;
  std::vector<State> states;
};

struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  double gamma = 0.0;
  double tau_s = 0.0;
  Box domain;
  std::string system;
  std::uint64_t seed = 0;

  std::size_t size() const { return trajectories.size(); }
  int dim() const;
  std::vector<State> initial_conditions() const;
};

// Number of retained snapshots for a (gamma, tau_s) pair: floor(gamma*tau_s) + 1.
std::size_t snapshot_count(double gamma, double tau_s);

// Integrates every initial condition and keeps only the k/gamma snapshots.
TrajectoryDataset sample_trajectories(const OdeSystem& sys, const std::vector<State>& inits,
                                      double gamma, double tau_s, const Box& domain,
                                      const IntegratorOptions& opts = {}, int threads = 1);

std::vector<State> sample_uniform(const Box& domain, std::size_t count, std::uint64_t seed);
// Uniform in the ellipsoid inscribed in the box.
std::vector<State> sample_ball(const Box& domain, std::size_t count, std::uint64_t seed);
// side^n points on a uniform tensor grid including the box corners.
std::vector<State> sample_grid(const Box& domain, std::size_t side);

}  // namespace kz
