#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "koopzubov/interval.hpp"

namespace kz {

enum class DictionaryKind { Monomial, Tanh };

// Interval enclosures of every dictionary entry and its derivatives over one
// box. Hessians are filled only when requested (order 2).
struct DictionaryEnclosure {
  std::size_t n = 0;
  std::vector<Interval> value;  // N
  IntervalMatrix grad;          // N x n
  std::vector<Interval> hess;   // N x n x n, row-major per entry

  const Interval& hessian(std::size_t k, std::size_t i, std::size_t j) const { return hess[(k * n + i) * n + j]; }
};

// Observable test functions Z_N(x) = [z_1(x), ..., z_N(x)] shared by
// generator learning and the PDE solves.
//
// Monomial family (n = 2): entry i is x1^p x2^q with p = i mod J and
// q = floor(i / J), for i in [0, J*K). For n = 1 the entries are x^0..x^(J-1);
// for n > 2 all multi-indices of total degree below J are used (experimental).
//
// Tanh family: entries tanh(W_j . x + b_j) for each feature row j, followed
// by the coordinate functions x_1..x_n when append_state is set.
//
// Copies share the underlying immutable data.
class Dictionary {
 public:
  static Dictionary monomial(int n, int J, int K);
  static Dictionary from_exponents(int n, std::vector<std::vector<int>> exponents);
  static Dictionary tanh_features(Eigen::MatrixXd W, Eigen::VectorXd b, bool append_state = true,
                                  std::uint64_t seed = 0, double weight_scale = 0.0);
  // Weights i.i.d. uniform on [-weight_scale, weight_scale], biases i.i.d.
  // uniform on [-1, 1], drawn from a 64-bit Mersenne twister seeded with `seed`.
  static Dictionary make_tanh(int n, int n_features, std::uint64_t seed, double weight_scale = 1.0);

  DictionaryKind kind() const;
  int dim() const;
  int size() const;

  Eigen::RowVectorXd eval(const State& x) const;
  // N x n matrix; row i is grad z_i(x).
  Eigen::MatrixXd grad(const State& x) const;
  // Hessian of entry k at x.
  Eigen::MatrixXd hessian(const State& x, int k) const;

  std::vector<Interval> eval_interval(const Box& b) const;
  IntervalMatrix grad_interval(const Box& b) const;
  DictionaryEnclosure enclose(const Box& b, int order) const;

  // Index of the coordinate function x_j, if present.
  std::optional<int> coordinate_index(int j) const;
  // Index of the constant function, if present.
  std::optional<int> constant_index() const;

  // Monomial data.
  const std::vector<std::vector<int>>& exponents() const;
  int max_degree_j() const;
  int max_degree_k() const;

  // Tanh data.
  const Eigen::MatrixXd& weights() const;
  const Eigen::VectorXd& biases() const;
  bool append_state() const;
  std::uint64_t seed() const;
  double weight_scale() const;

  // Identity of the shared data (cheap); structural equality is operator==.
  bool shares_data_with(const Dictionary& other) const { return impl_ == other.impl_; }
  friend bool operator==(const Dictionary& a, const Dictionary& b);

 private:
  struct Impl;
  explicit Dictionary(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  void check_dim(Eigen::Index size) const;

  std::shared_ptr<const Impl> impl_;
};

}  // namespace kz
