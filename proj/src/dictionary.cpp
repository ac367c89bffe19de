#include "koopzubov/dictionary.hpp"

#include <random>

namespace kz {

struct Dictionary::Impl {
  DictionaryKind kind = DictionaryKind::Monomial;
  int n = 0;
  int N = 0;
  // Monomial family.
  std::vector<std::vector<int>> exponents;
  int J = 0;
  int K = 0;
  int max_power = 0;
  // Tanh family.
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  bool append_state = false;
  std::uint64_t seed = 0;
  double weight_scale = 0.0;
};

namespace {

void total_degree_indices(int n, int max_total, std::vector<int>& cur, int pos, int budget,
                          std::vector<std::vector<int>>& out) {
  if (pos == n) {
    out.push_back(cur);
    return;
  }
  for (int p = 0; p <= budget; ++p) {
    cur[static_cast<std::size_t>(pos)] = p;
    total_degree_indices(n, max_total, cur, pos + 1, budget - p, out);
  }
}

}  // namespace

Dictionary Dictionary::monomial(int n, int J, int K) {
  if (n < 1 || J < 1 || K < 1) throw ConfigError("monomial dictionary needs n, J, K >= 1");
  std::vector<std::vector<int>> exps;
  if (n == 1) {
    for (int i = 0; i < J; ++i) exps.push_back({i});
  } else if (n == 2) {
    for (int i = 0; i < J * K; ++i) exps.push_back({i % J, i / J});
  } else {
    std::vector<int> cur(static_cast<std::size_t>(n), 0);
    total_degree_indices(n, J - 1, cur, 0, J - 1, exps);
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = DictionaryKind::Monomial;
  impl->n = n;
  impl->N = static_cast<int>(exps.size());
  impl->J = J;
  impl->K = n == 2 ? K : 1;
  for (const auto& e : exps)
    for (int p : e) impl->max_power = std::max(impl->max_power, p);
  impl->exponents = std::move(exps);
  return Dictionary(std::move(impl));
}

Dictionary Dictionary::from_exponents(int n, std::vector<std::vector<int>> exponents) {
  if (n < 1 || exponents.empty()) throw ConfigError("explicit monomial dictionary needs n >= 1 and entries");
  auto impl = std::make_shared<Impl>();
  impl->kind = DictionaryKind::Monomial;
  impl->n = n;
  for (const auto& e : exponents) {
    if (static_cast<int>(e.size()) != n) throw ConfigError("exponent vector length differs from n");
    for (int p : e) {
      if (p < 0) throw ConfigError("negative monomial exponent");
      impl->max_power = std::max(impl->max_power, p);
    }
  }
  impl->N = static_cast<int>(exponents.size());
  impl->exponents = std::move(exponents);
  return Dictionary(std::move(impl));
}

Dictionary Dictionary::tanh_features(Eigen::MatrixXd W, Eigen::VectorXd b, bool append_state, std::uint64_t seed,
                                     double weight_scale) {
  if (W.rows() < 1 || W.cols() < 1) throw ConfigError("tanh dictionary needs at least one feature");
  if (b.size() != W.rows()) throw ConfigError("tanh bias length differs from feature count");
  auto impl = std::make_shared<Impl>();
  impl->kind = DictionaryKind::Tanh;
  impl->n = static_cast<int>(W.cols());
  impl->N = static_cast<int>(W.rows()) + (append_state ? impl->n : 0);
  impl->W = std::move(W);
  impl->b = std::move(b);
  impl->append_state = append_state;
  impl->seed = seed;
  impl->weight_scale = weight_scale;
  return Dictionary(std::move(impl));
}

Dictionary Dictionary::make_tanh(int n, int n_features, std::uint64_t seed, double weight_scale) {
  if (n < 1 || n_features < 1) throw ConfigError("tanh dictionary needs n, n_features >= 1");
  if (!(weight_scale > 0.0)) throw ConfigError("weight_scale must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w_dist(-weight_scale, weight_scale);
  std::uniform_real_distribution<double> b_dist(-1.0, 1.0);
  Eigen::MatrixXd W(n_features, n);
  for (int j = 0; j < n_features; ++j)
    for (int i = 0; i < n; ++i) W(j, i) = w_dist(rng);
  Eigen::VectorXd b(n_features);
  for (int j = 0; j < n_features; ++j) b[j] = b_dist(rng);
  return tanh_features(std::move(W), std::move(b), true, seed, weight_scale);
}

DictionaryKind Dictionary::kind() const { return impl_->kind; }
int Dictionary::dim() const { return impl_->n; }
int Dictionary::size() const { return impl_->N; }

void Dictionary::check_dim(Eigen::Index size) const {
  if (size != impl_->n) throw DomainError("dictionary input dimension mismatch");
}

Eigen::RowVectorXd Dictionary::eval(const State& x) const {
  check_dim(x.size());
  const Impl& d = *impl_;
  Eigen::RowVectorXd z(d.N);
  if (d.kind == DictionaryKind::Monomial) {
    Eigen::MatrixXd pw(d.n, d.max_power + 1);
    for (int i = 0; i < d.n; ++i) {
      pw(i, 0) = 1.0;
      for (int p = 1; p <= d.max_power; ++p) pw(i, p) = pw(i, p - 1) * x[i];
    }
    for (int k = 0; k < d.N; ++k) {
      double v = 1.0;
      for (int i = 0; i < d.n; ++i) v *= pw(i, d.exponents[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]);
      z[k] = v;
    }
    return z;
  }
  const Eigen::Index F = d.W.rows();
  const Eigen::VectorXd u = d.W * x + d.b;
  for (Eigen::Index j = 0; j < F; ++j) z[j] = std::tanh(u[j]);
  if (d.append_state)
    for (int i = 0; i < d.n; ++i) z[F + i] = x[i];
  return z;
}

Eigen::MatrixXd Dictionary::grad(const State& x) const {
  check_dim(x.size());
  const Impl& d = *impl_;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d.N, d.n);
  if (d.kind == DictionaryKind::Monomial) {
    Eigen::MatrixXd pw(d.n, d.max_power + 1);
    for (int i = 0; i < d.n; ++i) {
      pw(i, 0) = 1.0;
      for (int p = 1; p <= d.max_power; ++p) pw(i, p) = pw(i, p - 1) * x[i];
    }
    for (int k = 0; k < d.N; ++k) {
      const auto& e = d.exponents[static_cast<std::size_t>(k)];
      for (int i = 0; i < d.n; ++i) {
        const int ei = e[static_cast<std::size_t>(i)];
        if (ei == 0) continue;
        double v = ei * pw(i, ei - 1);
        for (int j = 0; j < d.n; ++j)
          if (j != i) v *= pw(j, e[static_cast<std::size_t>(j)]);
        G(k, i) = v;
      }
    }
    return G;
  }
  const Eigen::Index F = d.W.rows();
  const Eigen::VectorXd u = d.W * x + d.b;
  for (Eigen::Index j = 0; j < F; ++j) {
    const double t = std::tanh(u[j]);
    G.row(j) = (1.0 - t * t) * d.W.row(j);
  }
  if (d.append_state)
    for (int i = 0; i < d.n; ++i) G(F + i, i) = 1.0;
  return G;
}

Eigen::MatrixXd Dictionary::hessian(const State& x, int k) const {
  check_dim(x.size());
  const Impl& d = *impl_;
  if (k < 0 || k >= d.N) throw DomainError("dictionary index out of range");
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d.n, d.n);
  if (d.kind == DictionaryKind::Monomial) {
    const auto& e = d.exponents[static_cast<std::size_t>(k)];
    auto term = [&](int i, int j) {
      // d^2/dx_i dx_j of prod_l x_l^e_l
      std::vector<int> f(e.begin(), e.end());
      double c = 1.0;
      for (int idx : {i, j}) {
        auto& fe = f[static_cast<std::size_t>(idx)];
        if (fe == 0) return 0.0;
        c *= fe;
        --fe;
      }
      for (int l = 0; l < d.n; ++l) c *= std::pow(x[l], f[static_cast<std::size_t>(l)]);
      return c;
    };
    for (int i = 0; i < d.n; ++i)
      for (int j = 0; j < d.n; ++j) H(i, j) = term(i, j);
    return H;
  }
  const Eigen::Index F = d.W.rows();
  if (k >= F) return H;
  const double t = std::tanh(d.W.row(k).dot(x) + d.b[k]);
  const double q = -2.0 * t * (1.0 - t * t);
  return q * d.W.row(k).transpose() * d.W.row(k);
}

DictionaryEnclosure Dictionary::enclose(const Box& box, int order) const {
  check_dim(static_cast<Eigen::Index>(box.size()));
  const Impl& d = *impl_;
  const std::size_t n = static_cast<std::size_t>(d.n);
  const std::size_t N = static_cast<std::size_t>(d.N);
  DictionaryEnclosure out;
  out.n = n;
  out.value.assign(N, Interval(0.0));
  if (order >= 1) out.grad = IntervalMatrix(N, n);
  if (order >= 2) out.hess.assign(N * n * n, Interval(0.0));

  if (d.kind == DictionaryKind::Monomial) {
    const std::size_t P = static_cast<std::size_t>(d.max_power) + 1;
    std::vector<Interval> pw(n * P);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < P; ++p) pw[i * P + p] = pow_int(box[i], static_cast<int>(p));
    auto pow_at = [&](std::size_t i, int p) -> const Interval& { return pw[i * P + static_cast<std::size_t>(p)]; };

    for (std::size_t k = 0; k < N; ++k) {
      const auto& e = d.exponents[k];
      Interval v(1.0);
      for (std::size_t i = 0; i < n; ++i) v = v * pow_at(i, e[i]);
      out.value[k] = v;
      if (order < 1) continue;
      for (std::size_t i = 0; i < n; ++i) {
        if (e[i] == 0) continue;
        Interval g = static_cast<double>(e[i]) * pow_at(i, e[i] - 1);
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) g = g * pow_at(j, e[j]);
        out.grad(k, i) = g;
      }
      if (order < 2) continue;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          Interval h(0.0);
          if (i == j) {
            if (e[i] >= 2) {
              h = static_cast<double>(e[i] * (e[i] - 1)) * pow_at(i, e[i] - 2);
              for (std::size_t l = 0; l < n; ++l)
                if (l != i) h = h * pow_at(l, e[l]);
            }
          } else if (e[i] >= 1 && e[j] >= 1) {
            h = static_cast<double>(e[i] * e[j]) * pow_at(i, e[i] - 1) * pow_at(j, e[j] - 1);
            for (std::size_t l = 0; l < n; ++l)
              if (l != i && l != j) h = h * pow_at(l, e[l]);
          }
          out.hess[(k * n + i) * n + j] = h;
          out.hess[(k * n + j) * n + i] = h;
        }
      }
    }
    return out;
  }

  const std::size_t F = static_cast<std::size_t>(d.W.rows());
  for (std::size_t j = 0; j < F; ++j) {
    Interval u(d.b[static_cast<Eigen::Index>(j)]);
    for (std::size_t i = 0; i < n; ++i) u += d.W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * box[i];
    const Interval t = tanh(u);
    out.value[j] = t;
    if (order < 1) continue;
    const Interval s = Interval(1.0) - sqr(t);
    for (std::size_t i = 0; i < n; ++i) out.grad(j, i) = d.W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * s;
    if (order < 2) continue;
    const Interval q = -2.0 * (t * s);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l)
        out.hess[(j * n + i) * n + l] =
            (d.W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) *
             d.W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l))) * q;
  }
  if (d.append_state) {
    for (std::size_t i = 0; i < n; ++i) {
      out.value[F + i] = box[i];
      if (order >= 1) out.grad(F + i, i) = 1.0;
    }
  }
  return out;
}

std::vector<Interval> Dictionary::eval_interval(const Box& b) const { return enclose(b, 0).value; }

IntervalMatrix Dictionary::grad_interval(const Box& b) const { return enclose(b, 1).grad; }

std::optional<int> Dictionary::coordinate_index(int j) const {
  const Impl& d = *impl_;
  if (j < 0 || j >= d.n) return std::nullopt;
  if (d.kind == DictionaryKind::Tanh) {
    if (!d.append_state) return std::nullopt;
    return static_cast<int>(d.W.rows()) + j;
  }
  for (int k = 0; k < d.N; ++k) {
    const auto& e = d.exponents[static_cast<std::size_t>(k)];
    bool match = true;
    for (int i = 0; i < d.n && match; ++i) match = e[static_cast<std::size_t>(i)] == (i == j ? 1 : 0);
    if (match) return k;
  }
  return std::nullopt;
}

std::optional<int> Dictionary::constant_index() const {
  const Impl& d = *impl_;
  if (d.kind == DictionaryKind::Tanh) return std::nullopt;
  for (int k = 0; k < d.N; ++k) {
    const auto& e = d.exponents[static_cast<std::size_t>(k)];
    if (std::all_of(e.begin(), e.end(), [](int p) { return p == 0; })) return k;
  }
  return std::nullopt;
}

const std::vector<std::vector<int>>& Dictionary::exponents() const { return impl_->exponents; }
int Dictionary::max_degree_j() const { return impl_->J; }
int Dictionary::max_degree_k() const { return impl_->K; }
const Eigen::MatrixXd& Dictionary::weights() const { return impl_->W; }
const Eigen::VectorXd& Dictionary::biases() const { return impl_->b; }
bool Dictionary::append_state() const { return impl_->append_state; }
std::uint64_t Dictionary::seed() const { return impl_->seed; }
double Dictionary::weight_scale() const { return impl_->weight_scale; }

bool operator==(const Dictionary& a, const Dictionary& b) {
  if (a.impl_ == b.impl_) return true;
  const auto& x = *a.impl_;
  const auto& y = *b.impl_;
  if (x.kind != y.kind || x.n != y.n || x.N != y.N) return false;
  if (x.kind == DictionaryKind::Monomial) return x.exponents == y.exponents;
  return x.append_state == y.append_state && x.W == y.W && x.b == y.b;
}

}  // namespace kz
