#include "koopzubov/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <queue>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "koopzubov/errors.hpp"

namespace kz {

const char* to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Certified:
      return "certified";
    case VerdictStatus::Counterexample:
      return "counterexample";
    case VerdictStatus::Unknown:
      break;
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Branch and bound

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool box_less(const Box& a, const Box& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].lo() != b[i].lo()) return a[i].lo() < b[i].lo();
    if (a[i].hi() != b[i].hi()) return a[i].hi() < b[i].hi();
  }
  return false;
}

struct SearchState {
  Verdict verdict;
  bool stop = false;

  void refute(const Box& b, const BoxDecision& d) {
    if (stop && verdict.status == VerdictStatus::Counterexample) return;
    verdict.status = VerdictStatus::Counterexample;
    verdict.witness = d.witness;
    verdict.witness_value = d.witness_value;
    verdict.unresolved.reset();
    verdict.detail = "violation inside " + to_string(b);
    stop = true;
  }
  void give_up(const Box& b, const std::string& why) {
    if (stop) return;  // a counterexample or earlier unknown already decided
    verdict.status = VerdictStatus::Unknown;
    verdict.unresolved = b;
    verdict.detail = why;
    stop = true;
  }
};

// Handles one box; returns children to push (possibly none).
std::vector<std::pair<Box, int>> process(const Box& b, int depth, const BoxTest& test, const VerifierConfig& cfg,
                                         SearchState& st, std::mutex* m) {
  const BoxDecision d = test(b);
  std::unique_lock<std::mutex> lock;
  if (m) lock = std::unique_lock<std::mutex>(*m);
  ++st.verdict.stats.boxes;
  st.verdict.stats.max_depth = std::max(st.verdict.stats.max_depth, depth);
  switch (d.kind) {
    case BoxDecision::Discard:
    case BoxDecision::Prove:
      if (cfg.record_cover) st.verdict.cover.push_back({b, d.kind == BoxDecision::Prove, d.bound});
      return {};
    case BoxDecision::Refute:
      st.refute(b, d);
      return {};
    case BoxDecision::Split:
      break;
  }
  if (st.verdict.stats.boxes >= cfg.max_boxes) {
    st.give_up(b, "box budget exhausted");
    return {};
  }
  if (b.max_width() < cfg.eps_box) {
    st.give_up(b, "undecided at minimum box width " + to_string(b));
    return {};
  }
  auto [l, r] = b.split();
  // Right child first so the left one is processed next (stack order).
  return {{std::move(r), depth + 1}, {std::move(l), depth + 1}};
}

}  // namespace

Verdict branch_and_bound(const std::string& name, const std::vector<Box>& roots, const BoxTest& test,
                         const VerifierConfig& cfg) {
  const auto t0 = Clock::now();
  SearchState st;
  st.verdict.check = name;
  st.verdict.status = VerdictStatus::Certified;
  for (const auto& r : roots)
    if (!r.is_finite()) throw DomainError("verifier domains must be bounded");

  std::vector<std::pair<Box, int>> stack;
  for (auto it = roots.rbegin(); it != roots.rend(); ++it) stack.emplace_back(*it, 0);

  const int threads = std::max(cfg.threads, 1);
  if (threads == 1) {
    while (!stack.empty() && !st.stop) {
      auto [b, depth] = std::move(stack.back());
      stack.pop_back();
      for (auto& child : process(b, depth, test, cfg, st, nullptr)) stack.push_back(std::move(child));
    }
  } else {
    std::mutex m;
    std::condition_variable cv;
    int active = 0;
    auto worker = [&] {
      for (;;) {
        std::pair<Box, int> item;
        {
          std::unique_lock lock(m);
          cv.wait(lock, [&] { return st.stop || !stack.empty() || active == 0; });
          if (st.stop || (stack.empty() && active == 0)) {
            cv.notify_all();
            return;
          }
          item = std::move(stack.back());
          stack.pop_back();
          ++active;
        }
        auto children = process(item.first, item.second, test, cfg, st, &m);
        {
          std::lock_guard lock(m);
          for (auto& child : children) stack.push_back(std::move(child));
          --active;
        }
        cv.notify_all();
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  Verdict v = std::move(st.verdict);
  if (v.status != VerdictStatus::Certified) {
    v.cover.clear();
  } else {
    // Worker interleaving changes discovery order, not the set of boxes.
    std::sort(v.cover.begin(), v.cover.end(), [](const CoverEntry& a, const CoverEntry& b) {
      return box_less(a.box, b.box);
    });
  }
  v.stats.seconds = seconds_since(t0);
  return v;
}

bool replay_cover(const Verdict& v, const BoxTest& test) {
  if (!v.certified() || v.cover.empty()) return false;
  for (const auto& e : v.cover) {
    const auto d = test(e.box);
    if (d.kind != BoxDecision::Discard && d.kind != BoxDecision::Prove) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Enclosures

namespace {

struct LevelEnclosure {
  Interval value{0.0};
  std::vector<Interval> grad;
  IntervalMatrix hess;
};

// Evaluates V over b; uses the precomputed dictionary enclosure when V is a
// dictionary candidate sharing it.
LevelEnclosure enclose_level(const LevelFunction& V, const LyapunovCandidate* cand, const Box& b, int order,
                             const DictionaryEnclosure* shared) {
  LevelEnclosure out;
  if (cand) {
    DictionaryEnclosure own;
    if (!shared) {
      own = cand->dictionary().enclose(b, order);
      shared = &own;
    }
    out.value = cand->value(*shared);
    if (order >= 1) out.grad = cand->gradient(*shared);
    if (order >= 2) out.hess = cand->hessian(*shared);
    return out;
  }
  out.value = V.value(b);
  if (order >= 1) out.grad = V.gradient(b);
  if (order >= 2) out.hess = V.hessian(b);
  return out;
}

// V(m) + grad V(B) . (B - m), intersected with the natural extension.
Interval mean_value_level(const LevelFunction& V, const LyapunovCandidate* cand, const Box& b,
                          const LevelEnclosure& e) {
  const State m = b.midpoint();
  Interval mv = enclose_level(V, cand, Box::point(m), 0, nullptr).value;
  for (std::size_t i = 0; i < b.size(); ++i) mv += e.grad[i] * (b[i] - m[static_cast<Eigen::Index>(i)]);
  return intersect(e.value, mv);
}

Interval dot(std::span<const Interval> a, std::span<const Interval> b) {
  Interval s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Enclosure of V over b (natural form intersected with the mean-value form).
Interval level_range(const LevelFunction& V, const LyapunovCandidate* cand, const Box& b) {
  const auto e = enclose_level(V, cand, b, 1, nullptr);
  return mean_value_level(V, cand, b, e);
}

// grad V . f + beta over a box, with optional reuse of the dictionary
// enclosure between V and f.
class LieDerivative {
 public:
  LieDerivative(const LevelFunction& V, const VectorFieldModel& f, double beta)
      : V_(V), f_(f), beta_(beta), cand_(dynamic_cast<const LyapunovCandidate*>(&V)) {
    shared_ = cand_ && (cand_->dictionary().shares_data_with(f.dictionary()) || cand_->dictionary() == f.dictionary());
  }

  const LyapunovCandidate* candidate() const { return cand_; }

  struct Result {
    Interval V{0.0};
    Interval g{0.0};
  };

  // Both enclosures over b; g is computed only if `need_g` returns true for
  // the V range.
  template <class Pred>
  Result operator()(const Box& b, Pred&& need_g) const {
    const std::size_t n = b.size();
    Result r;
    DictionaryEnclosure ef = f_.dictionary().enclose(b, 1 + (shared_ ? 1 : 0));
    const DictionaryEnclosure* shared = shared_ ? &ef : nullptr;
    // Hessian of V is only needed once the V test passes; take order 2 now
    // when shared (already paid for), else defer.
    LevelEnclosure ev = enclose_level(V_, cand_, b, shared_ ? 2 : 1, shared);
    r.V = mean_value_level(V_, cand_, b, ev);
    if (!need_g(r.V)) return r;
    if (!shared_) ev.hess = cand_ ? cand_->hessian(b) : V_.hessian(b);

    const auto F = f_.eval_interval(ef);
    const auto J = f_.jacobian_interval(ef);
    const Interval natural = dot(ev.grad, F) + beta_;

    // Mean-value form around the midpoint.
    const State m = b.midpoint();
    const Box pm = Box::point(m);
    const auto evm = enclose_level(V_, cand_, pm, 1, nullptr);
    const auto Fm = f_.eval_interval(pm);
    Interval mv = dot(evm.grad, Fm) + beta_;
    for (std::size_t j = 0; j < n; ++j) {
      Interval dg(0.0);
      for (std::size_t i = 0; i < n; ++i) dg += ev.hess(i, j) * F[i] + ev.grad[i] * J(i, j);
      mv += dg * (b[j] - m[static_cast<Eigen::Index>(j)]);
    }
    r.g = intersect(natural, mv);
    return r;
  }

  double point(const State& x, double* V_out) const {
    if (V_out) *V_out = V_.value(x);
    return V_.gradient(x).dot(f_.eval(x)) + beta_;
  }

 private:
  const LevelFunction& V_;
  const VectorFieldModel& f_;
  double beta_;
  const LyapunovCandidate* cand_;
  bool shared_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------
// Box tests

BoxTest band_condition_test(const LevelFunction& V, const VectorFieldModel& f, double c1, double c2, double beta,
                            BasinExclusion basin) {
  auto lie = std::make_shared<LieDerivative>(V, f, beta);
  return [lie, &V, &f, c1, c2, beta, basin](const Box& b) {
    BoxDecision d;
    if (basin && basin.q->value(b).hi() <= basin.c) {
      d.kind = BoxDecision::Discard;
      return d;
    }
    const auto r = (*lie)(b, [&](const Interval& v) { return !(v.hi() < c1 || v.lo() > c2); });
    if (r.V.hi() < c1 || r.V.lo() > c2) {
      d.kind = BoxDecision::Discard;
      return d;
    }
    if (r.g.hi() <= 0.0) {
      d.kind = BoxDecision::Prove;
      d.bound = r.g.hi();
      return d;
    }
    const State m = b.midpoint();
    if (band_condition_violated(V, f, c1, c2, beta, m, basin)) {
      d.kind = BoxDecision::Refute;
      d.witness = m;
      d.witness_value = lie->point(m, nullptr);
      return d;
    }
    d.kind = BoxDecision::Split;
    return d;
  };
}

bool band_condition_violated(const LevelFunction& V, const VectorFieldModel& f, double c1, double c2, double beta,
                             const State& x, BasinExclusion basin) {
  const double v = V.value(x);
  if (v < c1 || v > c2) return false;
  if (basin && basin.q->value(x) <= basin.c) return false;
  return V.gradient(x).dot(f.eval(x)) + beta > 0.0;
}

BoxTest sublevel_inclusion_test(const LevelFunction& V, double c1, const LevelFunction& q, double c_quad) {
  const auto* cand = dynamic_cast<const LyapunovCandidate*>(&V);
  const auto* qcand = dynamic_cast<const LyapunovCandidate*>(&q);
  return [&V, cand, &q, qcand, c1, c_quad](const Box& b) {
    BoxDecision d;
    if (level_range(V, cand, b).lo() > c1) {
      d.kind = BoxDecision::Discard;
      return d;
    }
    const Interval qr = level_range(q, qcand, b);
    if (qr.hi() <= c_quad) {
      d.kind = BoxDecision::Prove;
      d.bound = qr.hi();
      return d;
    }
    const State m = b.midpoint();
    if (sublevel_inclusion_violated(V, c1, q, c_quad, m)) {
      d.kind = BoxDecision::Refute;
      d.witness = m;
      d.witness_value = q.value(m);
      return d;
    }
    d.kind = BoxDecision::Split;
    return d;
  };
}

bool sublevel_inclusion_violated(const LevelFunction& V, double c1, const LevelFunction& q, double c_quad,
                                 const State& x) {
  return V.value(x) <= c1 && q.value(x) > c_quad;
}

BoxTest level_exceeds_test(const LevelFunction& V, double c2) {
  const auto* cand = dynamic_cast<const LyapunovCandidate*>(&V);
  return [&V, cand, c2](const Box& b) {
    BoxDecision d;
    const Interval r = level_range(V, cand, b);
    if (r.lo() > c2) {
      d.kind = BoxDecision::Prove;
      d.bound = r.lo();
      return d;
    }
    const State m = b.midpoint();
    if (level_exceeds_violated(V, c2, m)) {
      d.kind = BoxDecision::Refute;
      d.witness = m;
      d.witness_value = V.value(m);
      return d;
    }
    d.kind = BoxDecision::Split;
    return d;
  };
}

bool level_exceeds_violated(const LevelFunction& V, double c2, const State& x) { return V.value(x) <= c2; }

std::vector<Box> box_faces(const Box& b) {
  std::vector<Box> faces;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (const double side : {b[i].lo(), b[i].hi()}) {
      Box f = b;
      f[i] = Interval(side);
      faces.push_back(std::move(f));
    }
  }
  return faces;
}

// ---------------------------------------------------------------------------
// Checks

namespace {
void require_finite(const Box& domain) {
  if (!domain.is_finite() || domain.size() == 0) throw DomainError("verifier domain must be a bounded box");
}
}  // namespace

Verdict check_band_condition(const LevelFunction& V, const VectorFieldModel& f, double c1, double c2, double beta,
                             const Box& domain, const VerifierConfig& cfg, BasinExclusion basin) {
  require_finite(domain);
  if (!(c1 < c2)) throw ConfigError("band check needs c1 < c2");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  return branch_and_bound("band_condition", {domain}, band_condition_test(V, f, c1, c2, beta, basin), cfg);
}

Verdict check_sublevel_inclusion(const LevelFunction& V, double c1, const QuadraticLyapunov& q, double c_quad,
                                 const Box& domain, const VerifierConfig& cfg) {
  require_finite(domain);
  if (!(c_quad > 0.0)) throw ConfigError("quadratic level must be positive");
  return branch_and_bound("sublevel_inclusion", {domain}, sublevel_inclusion_test(V, c1, q, c_quad), cfg);
}

Verdict check_domain_containment(const LevelFunction& V, double c2, const Box& domain, const VerifierConfig& cfg) {
  require_finite(domain);
  return branch_and_bound("domain_containment", box_faces(domain), level_exceeds_test(V, c2), cfg);
}

// ---------------------------------------------------------------------------
// Constants

SupBound sup_bound(const Box& domain, const std::function<Interval(const Box&)>& F,
                   const std::function<double(const State&)>& f_point, double rel_tol, std::size_t max_boxes) {
  require_finite(domain);
  using Item = std::pair<double, Box>;
  auto cmp = [](const Item& a, const Item& b) { return a.first < b.first; };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> pq(cmp);
  SupBound out;
  out.lower = f_point(domain.midpoint());
  pq.emplace(F(domain).hi(), domain);
  out.boxes = 1;
  double leaf_max = -std::numeric_limits<double>::infinity();
  while (!pq.empty()) {
    const double ub = pq.top().first;
    if (ub <= leaf_max) break;
    if (ub <= out.lower * (1.0 + rel_tol) || ub - out.lower <= 1e-14 || out.boxes >= max_boxes) break;
    Box b = pq.top().second;
    pq.pop();
    if (b.max_width() <= 1e-12 * (1.0 + domain.max_width())) {
      leaf_max = std::max(leaf_max, ub);
      continue;
    }
    auto [l, r] = b.split();
    for (Box* c : {&l, &r}) {
      out.lower = std::max(out.lower, f_point(c->midpoint()));
      pq.emplace(F(*c).hi(), std::move(*c));
      ++out.boxes;
    }
  }
  out.upper = std::max(leaf_max, pq.empty() ? out.lower : pq.top().first);
  out.upper = std::max(out.upper, out.lower);
  return out;
}

SupBound bound_lipschitz_detail(const OdeSystem& f, const Box& domain, const VerifierConfig& cfg) {
  if (!f.has_interval_jacobian()) throw ConfigError("system '" + f.name() + "' has no interval Jacobian");
  return sup_bound(
      domain, [&](const Box& b) { return Interval(0.0, frobenius_upper(f.jacobian_interval(b))); },
      [&](const State& x) {
        const auto J = f.jacobian_interval(Box::point(x));
        double s = 0.0;
        for (const auto& e : J.data()) s += e.mid() * e.mid();
        return std::sqrt(s);
      },
      cfg.sup_rel_tol, cfg.sup_max_boxes);
}

SupBound bound_lipschitz_detail(const VectorFieldModel& f, const Box& domain, const VerifierConfig& cfg) {
  return sup_bound(
      domain, [&](const Box& b) { return Interval(0.0, frobenius_upper(f.jacobian_interval(b))); },
      [&](const State& x) { return f.jacobian(x).norm(); }, cfg.sup_rel_tol, cfg.sup_max_boxes);
}

double bound_lipschitz(const OdeSystem& f, const Box& domain, const VerifierConfig& cfg) {
  return bound_lipschitz_detail(f, domain, cfg).upper;
}

double bound_lipschitz(const VectorFieldModel& f, const Box& domain, const VerifierConfig& cfg) {
  return bound_lipschitz_detail(f, domain, cfg).upper;
}

double bound_gradient_norm(const LevelFunction& V, const Box& domain, const VerifierConfig& cfg) {
  const auto* cand = dynamic_cast<const LyapunovCandidate*>(&V);
  return sup_bound(
             domain,
             [&](const Box& b) {
               const auto g = enclose_level(V, cand, b, 1, nullptr).grad;
               return Interval(0.0, std::sqrt(norm_sq_bound(g).hi()));
             },
             [&](const State& x) { return V.gradient(x).norm(); }, cfg.sup_rel_tol, cfg.sup_max_boxes)
      .upper;
}

double compute_alpha(const VectorFieldModel& f_hat, std::span<const State> samples, const OdeSystem& oracle) {
  if (samples.empty()) throw ConfigError("alpha needs at least one sample");
  double a = 0.0;
  for (const auto& y : samples) a = std::max(a, (oracle(y) - f_hat.eval(y)).norm());
  return a;
}

double required_beta(double K_f, double K_fhat, double delta, double alpha, double nu) {
  if (K_f < 0 || K_fhat < 0 || delta < 0 || alpha < 0 || nu < 0)
    throw ConfigError("beta inputs must be non-negative");
  return ((K_f + K_fhat) * delta + alpha) * nu;
}

double select_beta(double required) {
  if (!(required > 0.0)) return 1e-12;
  const double target = 1.01 * required;
  const double unit = std::pow(10.0, std::floor(std::log10(target)) - 2.0);
  double beta = std::ceil(target / unit) * unit;
  while (!(beta > required * 1.01)) beta += unit;
  return beta;
}

double covering_radius(std::span<const State> samples, const Box& domain, std::size_t grid_side) {
  if (samples.empty()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (const auto& x : sample_grid(domain, grid_side)) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : samples) best = std::min(best, (x - y).squaredNorm());
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

// ---------------------------------------------------------------------------
// Quadratic basin

double dominance_radius(const QuadraticLyapunov& q, const VectorFieldModel& f, const Eigen::MatrixXd& A,
                        const Box& domain, double* q0_out, double* remainder_out) {
  const Eigen::MatrixXd S = q.P() * A + A.transpose() * q.P();
  const double q0 = -Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (q0_out) *q0_out = q0;
  if (remainder_out) *remainder_out = 0.0;
  if (!(q0 > 0.0)) return 0.0;
  double r_max = std::numeric_limits<double>::infinity();
  for (const auto& d : domain) r_max = std::min({r_max, -d.lo(), d.hi()});
  if (!(r_max > 0.0)) return 0.0;

  // sup over the rho-box of ||Df(x) - A||_F bounds the remainder
  // f(x) - A x = int_0^1 (Df(sx) - A) x ds.
  auto remainder = [&](double rho) {
    Box b(std::vector<Interval>(domain.size(), Interval(-rho, rho)));
    return sup_bound(
               b,
               [&](const Box& bb) {
                 IntervalMatrix J = f.jacobian_interval(bb);
                 for (std::size_t i = 0; i < J.rows(); ++i)
                   for (std::size_t j = 0; j < J.cols(); ++j) J(i, j) = J(i, j) - A(i, j);
                 return Interval(0.0, frobenius_upper(J));
               },
               [&](const State& x) { return (f.jacobian(x) - A).norm(); }, 0.05, 4000)
        .upper;
  };
  // 2 ||P||_2 R(rho) < q0, with a small safety factor.
  const double limit = 0.99 * q0 / (2.0 * q.lambda_max());
  auto ok = [&](double rho) { return remainder(rho) < limit; };
  double lo = 0.0, hi = 0.999 * r_max;
  if (ok(hi)) {
    lo = hi;
  } else {
    for (int it = 0; it < 40 && hi - lo > 1e-4 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
  }
  if (remainder_out && lo > 0.0) *remainder_out = remainder(lo);
  return lo;
}

namespace {

// Largest c with the ellipsoid {x^T P x <= c} strictly inside the box.
double inscribed_level(const QuadraticLyapunov& q, const Box& domain) {
  const Eigen::MatrixXd Pinv = q.P().inverse();
  double c = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const double dist = std::min(-domain[i].lo(), domain[i].hi());
    if (!(dist > 0.0)) return 0.0;
    c = std::min(c, dist * dist / Pinv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
  }
  return c;
}

bool inside_box(const Box& b, double rho) {
  for (const auto& d : b)
    if (d.lo() < -rho || d.hi() > rho) return false;
  return true;
}

BoxTest quadratic_decrease_test(const QuadraticLyapunov& q, const VectorFieldModel& f, double c, double beta,
                                double rho) {
  auto lie = std::make_shared<LieDerivative>(q, f, beta);
  return [lie, &q, &f, c, beta, rho](const Box& b) {
    BoxDecision d;
    if (inside_box(b, rho)) {
      d.kind = BoxDecision::Discard;  // covered by linearization dominance
      return d;
    }
    const auto r = (*lie)(b, [&](const Interval& v) { return v.lo() <= c; });
    if (r.V.lo() > c) {
      d.kind = BoxDecision::Discard;
      return d;
    }
    if (r.g.hi() <= 0.0) {
      d.kind = BoxDecision::Prove;
      d.bound = r.g.hi();
      return d;
    }
    const State m = b.midpoint();
    if (m.lpNorm<Eigen::Infinity>() > rho && q.value(m) <= c && q.gradient(m).dot(f.eval(m)) + beta > 0.0) {
      d.kind = BoxDecision::Refute;
      d.witness = m;
      d.witness_value = q.gradient(m).dot(f.eval(m)) + beta;
      return d;
    }
    d.kind = BoxDecision::Split;
    return d;
  };
}

}  // namespace

QuadraticBasin certify_quadratic_roa(const QuadraticLyapunov& q, const VectorFieldModel& f, const Box& domain,
                                     const BoundsReport& bounds, const VerifierConfig& cfg) {
  require_finite(domain);
  QuadraticBasin out;
  const Eigen::MatrixXd A = linearize_at_origin(f);
  double rho_auto = dominance_radius(q, f, A, domain, &out.q0, &out.remainder);
  out.rho = cfg.rho > 0.0 ? std::min(cfg.rho, rho_auto) : rho_auto;
  if (!(out.rho > 0.0))
    throw CertificationImpossible("linearization dominance fails on every ball around the origin");

  const double c_in = inscribed_level(q, domain) * (1.0 - 1e-9);
  // Ellipsoids inside the rho-box need no branch and bound.
  const double c_trivial = std::min(c_in, out.rho * out.rho * q.lambda_min());

  auto beta_for = [&](double c, double& nu, double& req) {
    nu = 2.0 * std::sqrt(c * q.lambda_max());
    req = required_beta(bounds.K_f, bounds.K_fhat, bounds.delta, bounds.alpha, nu);
    return select_beta(req);
  };
  auto attempt = [&](double c) {
    double nu = 0, req = 0;
    const double beta = beta_for(c, nu, req);
    VerifierConfig local = cfg;
    Verdict v = branch_and_bound("quadratic_decrease", {domain}, quadratic_decrease_test(q, f, c, beta, out.rho), local);
    return std::make_tuple(v, nu, req, beta);
  };

  double lo = c_trivial, hi = c_in;
  std::tuple<Verdict, double, double, double> best;
  {
    auto first = attempt(c_in);
    if (std::get<0>(first).certified()) {
      lo = c_in;
      best = std::move(first);
    } else {
      best = attempt(c_trivial);
      while (hi - lo > cfg.bisect_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        auto t = attempt(mid);
        if (std::get<0>(t).certified()) {
          lo = mid;
          best = std::move(t);
        } else {
          hi = mid;
        }
      }
    }
  }
  if (!std::get<0>(best).certified() || !(lo > 0.0))
    throw CertificationImpossible("no quadratic level certifies the decrease condition");
  out.c = lo;
  out.decrease = std::move(std::get<0>(best));
  out.nu_P = std::get<1>(best);
  out.beta_P_required = std::get<2>(best);
  out.beta_P = std::get<3>(best);
  return out;
}

std::optional<double> maximize_c2(const LevelFunction& V, const VectorFieldModel& f, double c1, double beta,
                                  const Box& domain, const VerifierConfig& cfg, double c2_hi,
                                  BasinExclusion basin) {
  if (!(c2_hi > c1)) return std::nullopt;
  VerifierConfig quiet = cfg;
  quiet.record_cover = false;
  auto ok = [&](double c2) {
    return check_domain_containment(V, c2, domain, quiet).certified() &&
           check_band_condition(V, f, c1, c2, beta, domain, quiet, basin).certified();
  };
  if (ok(c2_hi)) return c2_hi;
  double lo = c1, hi = c2_hi;
  while (hi - lo > cfg.bisect_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  if (!(lo > c1)) return std::nullopt;
  return lo;
}

std::optional<double> maximize_c1(const LevelFunction& V, const QuadraticLyapunov& q, double c_quad,
                                  const Box& domain, const VerifierConfig& cfg, double c1_hi) {
  if (!(c1_hi > 0.0)) return std::nullopt;
  VerifierConfig quiet = cfg;
  quiet.record_cover = false;
  auto ok = [&](double c1) { return check_sublevel_inclusion(V, c1, q, c_quad, domain, quiet).certified(); };
  if (ok(c1_hi)) return c1_hi;
  double lo = 0.0, hi = c1_hi;
  while (hi - lo > cfg.bisect_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  if (!(lo > 0.0)) return std::nullopt;
  return lo;
}

// ---------------------------------------------------------------------------
// Orchestration

CertificationReport certify_roa(const LyapunovCandidate& V, const VectorFieldModel& f, const OdeSystem& oracle,
                                std::span<const State> samples, const Box& domain, const CertifyOptions& opt) {
  const auto t0 = Clock::now();
  require_finite(domain);
  const VerifierConfig& cfg = opt.verifier;
  CertificationReport rep;
  auto finish = [&](std::string outcome, std::string msg) {
    rep.outcome = std::move(outcome);
    rep.message = std::move(msg);
    rep.certified = rep.outcome == "certified";
    rep.seconds = seconds_since(t0);
    return rep;
  };

  const int n = f.dim();
  const Eigen::MatrixXd Q = opt.Q.size() ? opt.Q : Eigen::MatrixXd::Identity(n, n);
  rep.A_hat = linearize_at_origin(f);
  rep.band_outside_basin = opt.band_outside_basin;

  // Constants.
  BoundsReport& bd = rep.bounds;
  bd.K_f = bound_lipschitz(oracle, domain, cfg);
  bd.K_fhat = bound_lipschitz(f, domain, cfg);
  bd.alpha = compute_alpha(f, samples, oracle);
  bd.delta = opt.delta;
  bd.delta_estimate = covering_radius(samples, domain);
  bd.nu = bound_gradient_norm(V, domain, cfg);
  bd.beta_required = required_beta(bd.K_f, bd.K_fhat, bd.delta, bd.alpha, bd.nu);
  bd.beta_used = select_beta(bd.beta_required);

  std::optional<QuadraticLyapunov> q;
  try {
    q.emplace(solve_matrix_lyapunov(rep.A_hat, Q));
    rep.P = q->P();
    rep.quadratic = certify_quadratic_roa(*q, f, domain, bd, cfg);
  } catch (const CertificationImpossible& e) {
    return finish("not_certified", std::string("quadratic basin: ") + e.what());
  }
  rep.c = rep.quadratic.c;

  // Grid pre-scan for falsified upper limits; bisection then certifies below.
  const auto grid = sample_grid(domain, 401);
  std::vector<double> Vg(grid.size()), Vq(grid.size());
  double v_max = -std::numeric_limits<double>::infinity();
  double c1_hi = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Vg[k] = V.value(grid[k]);
    Vq[k] = q->value(grid[k]);
    v_max = std::max(v_max, Vg[k]);
    if (Vq[k] > rep.c) c1_hi = std::min(c1_hi, Vg[k]);
  }
  if (!std::isfinite(c1_hi)) c1_hi = v_max;
  c1_hi = std::nextafter(c1_hi, -std::numeric_limits<double>::infinity());

  const auto c1 = maximize_c1(V, *q, rep.c, domain, cfg, c1_hi);
  if (!c1) {
    const double probe = c1_hi > 0.0 ? c1_hi : 1e-6;
    rep.c1 = probe;
    rep.verdicts.push_back(check_sublevel_inclusion(V, probe, *q, rep.c, domain, cfg));
    return finish(rep.verdicts.back().status == VerdictStatus::Counterexample ? "counterexample" : "not_certified",
                  "no positive c1 has a certified inclusion into the quadratic basin");
  }
  rep.c1 = *c1;

  double c2_hi = v_max;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    bool on_face = false;
    for (std::size_t i = 0; i < domain.size(); ++i) {
      const double xi = grid[k][static_cast<Eigen::Index>(i)];
      on_face = on_face || xi == domain[i].lo() || xi == domain[i].hi();
    }
    if (on_face) c2_hi = std::min(c2_hi, Vg[k]);
  }
  const BasinExclusion basin = opt.band_outside_basin ? BasinExclusion{&*q, rep.c} : BasinExclusion{};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (basin && Vq[k] <= rep.c) continue;
    if (Vg[k] >= rep.c1 && Vg[k] < c2_hi && V.gradient(grid[k]).dot(f.eval(grid[k])) + bd.beta_used > 0.0)
      c2_hi = Vg[k];
  }
  c2_hi = std::nextafter(c2_hi, -std::numeric_limits<double>::infinity());

  const auto c2 = maximize_c2(V, f, rep.c1, bd.beta_used, domain, cfg, c2_hi, basin);
  if (!c2) {
    const double probe = std::max(c2_hi, rep.c1 * (1.0 + 1e-6));
    rep.c2 = probe;
    rep.verdicts.push_back(check_band_condition(V, f, rep.c1, probe, bd.beta_used, domain, cfg, basin));
    return finish(rep.verdicts.back().status == VerdictStatus::Counterexample ? "counterexample" : "not_certified",
                  "no level above c1 passes the band and containment checks");
  }
  rep.c2 = *c2;

  // Final checks with covers, then audit replay.
  rep.verdicts.push_back(std::move(rep.quadratic.decrease));
  rep.quadratic.decrease = Verdict{};
  rep.verdicts.push_back(check_sublevel_inclusion(V, rep.c1, *q, rep.c, domain, cfg));
  rep.verdicts.push_back(check_band_condition(V, f, rep.c1, rep.c2, bd.beta_used, domain, cfg, basin));
  rep.verdicts.push_back(check_domain_containment(V, rep.c2, domain, cfg));

  bool all = true;
  bool any_cex = false;
  for (const auto& v : rep.verdicts) {
    all = all && v.certified();
    any_cex = any_cex || v.status == VerdictStatus::Counterexample;
  }
  if (all) {
    rep.audit_passed = replay_cover(rep.verdicts[0], quadratic_decrease_test(*q, f, rep.c, rep.quadratic.beta_P,
                                                                             rep.quadratic.rho)) &&
                       replay_cover(rep.verdicts[1], sublevel_inclusion_test(V, rep.c1, *q, rep.c)) &&
                       replay_cover(rep.verdicts[2], band_condition_test(V, f, rep.c1, rep.c2, bd.beta_used, basin)) &&
                       replay_cover(rep.verdicts[3], level_exceeds_test(V, rep.c2));
  }
  if (all && rep.audit_passed) return finish("certified", "");
  if (all) return finish("not_certified", "audit replay failed");
  return finish(any_cex ? "counterexample" : "unknown", "final verification did not certify every check");
}

}  // namespace kz
