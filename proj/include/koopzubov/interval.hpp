#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "koopzubov/errors.hpp"

namespace kz {

using State = Eigen::VectorXd;

// Closed real interval [lo, hi].
//
// Endpoint arithmetic (+, -, *, /) is carried out in round-to-nearest; the
// transcendental functions widen their results outward by a relative 1e-12
// to absorb libm rounding. Certification margins elsewhere are many orders
// of magnitude larger than either effect.
class Interval {
 public:
  constexpr Interval() = default;
  constexpr Interval(double v) : lo_(v), hi_(v) {}  // NOLINT: implicit point interval
  Interval(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!(lo <= hi)) {
      throw DomainError("interval with lo > hi or NaN endpoint");
    }
  }

  static Interval entire() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return Interval(-inf, inf);
  }

  constexpr double lo() const { return lo_; }
  constexpr double hi() const { return hi_; }
  double mid() const { return std::isfinite(lo_) && std::isfinite(hi_) ? 0.5 * (lo_ + hi_) : 0.0; }
  double width() const { return hi_ - lo_; }
  double mag() const { return std::max(std::fabs(lo_), std::fabs(hi_)); }
  double mig() const { return contains(0.0) ? 0.0 : std::min(std::fabs(lo_), std::fabs(hi_)); }

  bool is_finite() const { return std::isfinite(lo_) && std::isfinite(hi_); }
  bool is_point() const { return lo_ == hi_; }
  bool contains(double v) const { return lo_ <= v && v <= hi_; }
  bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }
  bool intersects(const Interval& o) const { return lo_ <= o.hi_ && o.lo_ <= hi_; }

  Interval& operator+=(const Interval& o) {
    lo_ += o.lo_;
    hi_ += o.hi_;
    return *this;
  }
  Interval& operator-=(const Interval& o) {
    const double l = lo_ - o.hi_;
    hi_ = hi_ - o.lo_;
    lo_ = l;
    return *this;
  }

  friend bool operator==(const Interval&, const Interval&) = default;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
};

inline Interval operator+(Interval a, const Interval& b) { return a += b; }
inline Interval operator-(Interval a, const Interval& b) { return a -= b; }
inline Interval operator-(const Interval& a) { return Interval(-a.hi(), -a.lo()); }

inline Interval operator*(const Interval& a, const Interval& b) {
  if (a.is_point() && a.lo() == 0.0) return Interval(0.0);
  if (b.is_point() && b.lo() == 0.0) return Interval(0.0);
  const double p1 = a.lo() * b.lo();
  const double p2 = a.lo() * b.hi();
  const double p3 = a.hi() * b.lo();
  const double p4 = a.hi() * b.hi();
  return Interval(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}));
}

inline Interval operator*(double s, const Interval& a) {
  if (s == 0.0) return Interval(0.0);
  return s > 0 ? Interval(s * a.lo(), s * a.hi()) : Interval(s * a.hi(), s * a.lo());
}
inline Interval operator*(const Interval& a, double s) { return s * a; }

inline Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains(0.0)) {
    throw DomainError("interval division by a range containing zero");
  }
  const Interval inv(1.0 / b.hi(), 1.0 / b.lo());
  return a * inv;
}

inline Interval hull(const Interval& a, const Interval& b) {
  return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

// Intersection of two enclosures of the same quantity. Both contain the true
// range, so they must overlap; if rounding separates them, fall back to the
// narrower one.
inline Interval intersect(const Interval& a, const Interval& b) {
  const double lo = std::max(a.lo(), b.lo());
  const double hi = std::min(a.hi(), b.hi());
  if (lo <= hi) return Interval(lo, hi);
  return a.width() <= b.width() ? a : b;
}

// Square with the dependency handled: sqr([-1, 2]) = [0, 4].
inline Interval sqr(const Interval& a) {
  const double l2 = a.lo() * a.lo();
  const double h2 = a.hi() * a.hi();
  if (a.contains(0.0)) return Interval(0.0, std::max(l2, h2));
  return Interval(std::min(l2, h2), std::max(l2, h2));
}

Interval pow_int(const Interval& a, int k);
Interval sqrt(const Interval& a);
Interval exp(const Interval& a);
Interval tanh(const Interval& a);
Interval sin(const Interval& a);
Interval cos(const Interval& a);
Interval abs(const Interval& a);

// Enclosure of sum_i v_i^2; sqrt(hi) bounds the 2-norm from above.
Interval norm_sq_bound(std::span<const Interval> v);

std::string to_string(const Interval& a);

// Axis-aligned box, one interval per state coordinate.
class Box {
 public:
  Box() = default;
  explicit Box(std::vector<Interval> dims) : dims_(std::move(dims)) {}
  Box(std::initializer_list<Interval> dims) : dims_(dims) {}

  // Degenerate box at a point.
  static Box point(const State& x);

  State midpoint() const;
  bool contains(const State& x) const;

  std::size_t size() const { return dims_.size(); }
  const Interval& operator[](std::size_t i) const { return dims_[i]; }
  Interval& operator[](std::size_t i) { return dims_[i]; }
  std::span<const Interval> dims() const { return dims_; }
  auto begin() const { return dims_.begin(); }
  auto end() const { return dims_.end(); }

  std::size_t widest_dim() const;
  double max_width() const;
  bool is_finite() const;

  // Bisects the widest coordinate at its midpoint. Throws on a point box.
  std::pair<Box, Box> split() const;

  friend bool operator==(const Box&, const Box&) = default;

 private:
  std::vector<Interval> dims_;
};

std::string to_string(const Box& b);

// Dense row-major matrix of intervals.
class IntervalMatrix {
 public:
  IntervalMatrix() = default;
  IntervalMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Interval(0.0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  Interval& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const Interval& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const Interval> row(std::size_t i) const {
    return std::span<const Interval>(data_).subspan(i * cols_, cols_);
  }
  std::span<const Interval> data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Interval> data_;
};

// Upper bound of the Frobenius norm of an interval matrix.
double frobenius_upper(const IntervalMatrix& m);

}  // namespace kz
