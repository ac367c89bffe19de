#include "koopzubov/interval.hpp"

#include <numbers>
#include <sstream>

namespace kz {

namespace {

constexpr double kInflate = 1e-12;

Interval widen(double lo, double hi) {
  return Interval(lo - kInflate * std::fabs(lo), hi + kInflate * std::fabs(hi));
}

Interval clamp_unit(const Interval& a) {
  return Interval(std::max(a.lo(), -1.0), std::min(a.hi(), 1.0));
}

double ipow(double x, int k) {
  double result = 1.0;
  double base = x;
  while (k > 0) {
    if (k & 1) result *= base;
    base *= base;
    k >>= 1;
  }
  return result;
}

// True if some t = offset + 2*pi*k lies in [lo, hi].
bool hits_phase(double lo, double hi, double offset) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double k = std::ceil((lo - offset) / two_pi);
  return offset + k * two_pi <= hi;
}

}  // namespace

Interval pow_int(const Interval& a, int k) {
  if (k < 0) throw DomainError("pow_int requires a non-negative exponent");
  if (k == 0) return Interval(1.0);
  if (k == 1) return a;
  const double l = ipow(a.lo(), k);
  const double h = ipow(a.hi(), k);
  if (k % 2 == 1) return Interval(l, h);
  if (a.contains(0.0)) return Interval(0.0, std::max(l, h));
  return Interval(std::min(l, h), std::max(l, h));
}

Interval sqrt(const Interval& a) {
  if (a.lo() < 0.0) throw DomainError("interval sqrt of a range with negative values");
  return widen(std::sqrt(a.lo()), std::sqrt(a.hi()));
}

Interval exp(const Interval& a) {
  const Interval r = widen(std::exp(a.lo()), std::exp(a.hi()));
  return Interval(std::max(r.lo(), 0.0), r.hi());
}

Interval tanh(const Interval& a) {
  return clamp_unit(widen(std::tanh(a.lo()), std::tanh(a.hi())));
}

Interval sin(const Interval& a) {
  if (!a.is_finite()) throw DomainError("interval sin of an unbounded range");
  if (a.width() >= 2.0 * std::numbers::pi) return Interval(-1.0, 1.0);
  const double sl = std::sin(a.lo());
  const double sh = std::sin(a.hi());
  double lo = std::min(sl, sh);
  double hi = std::max(sl, sh);
  if (hits_phase(a.lo(), a.hi(), 0.5 * std::numbers::pi)) hi = 1.0;
  if (hits_phase(a.lo(), a.hi(), -0.5 * std::numbers::pi)) lo = -1.0;
  return clamp_unit(widen(lo, hi));
}

Interval cos(const Interval& a) {
  if (!a.is_finite()) throw DomainError("interval cos of an unbounded range");
  if (a.width() >= 2.0 * std::numbers::pi) return Interval(-1.0, 1.0);
  const double cl = std::cos(a.lo());
  const double ch = std::cos(a.hi());
  double lo = std::min(cl, ch);
  double hi = std::max(cl, ch);
  if (hits_phase(a.lo(), a.hi(), 0.0)) hi = 1.0;
  if (hits_phase(a.lo(), a.hi(), std::numbers::pi)) lo = -1.0;
  return clamp_unit(widen(lo, hi));
}

Interval abs(const Interval& a) {
  if (a.lo() >= 0.0) return a;
  if (a.hi() <= 0.0) return -a;
  return Interval(0.0, a.mag());
}

Interval norm_sq_bound(std::span<const Interval> v) {
  Interval acc(0.0);
  for (const auto& x : v) acc += sqr(x);
  return acc;
}

std::string to_string(const Interval& a) {
  std::ostringstream os;
  os.precision(17);
  os << '[' << a.lo() << ", " << a.hi() << ']';
  return os.str();
}

Box Box::point(const State& x) {
  std::vector<Interval> d;
  d.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) d.emplace_back(x[i]);
  return Box(std::move(d));
}

State Box::midpoint() const {
  State m(static_cast<Eigen::Index>(dims_.size()));
  for (std::size_t i = 0; i < dims_.size(); ++i) m[static_cast<Eigen::Index>(i)] = dims_[i].mid();
  return m;
}

bool Box::contains(const State& x) const {
  if (static_cast<std::size_t>(x.size()) != dims_.size()) return false;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (!dims_[i].contains(x[static_cast<Eigen::Index>(i)])) return false;
  }
  return true;
}

std::size_t Box::widest_dim() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dims_.size(); ++i) {
    if (dims_[i].width() > dims_[best].width()) best = i;
  }
  return best;
}

double Box::max_width() const {
  double w = 0.0;
  for (const auto& d : dims_) w = std::max(w, d.width());
  return w;
}

bool Box::is_finite() const {
  return std::all_of(dims_.begin(), dims_.end(), [](const Interval& d) { return d.is_finite(); });
}

std::pair<Box, Box> Box::split() const {
  if (dims_.empty() || max_width() <= 0.0) {
    throw DomainError("cannot split a degenerate box");
  }
  const std::size_t k = widest_dim();
  const double m = dims_[k].mid();
  Box left = *this;
  Box right = *this;
  left.dims_[k] = Interval(dims_[k].lo(), m);
  right.dims_[k] = Interval(m, dims_[k].hi());
  return {std::move(left), std::move(right)};
}

std::string to_string(const Box& b) {
  std::string s = "(";
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (i) s += ", ";
    s += to_string(b[i]);
  }
  return s + ")";
}

double frobenius_upper(const IntervalMatrix& m) {
  return std::sqrt(norm_sq_bound(m.data()).hi());
}

}  // namespace kz
