#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ncs/errors.hpp"

namespace ncs {

using Vec = std::vector<double>;

/// Small dense row-major matrix; just enough for gains and step Jacobians.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Vec mat_vec(const Mat& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.cols) throw ConfigError("mat_vec: dimension mismatch");
  Vec y(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw ConfigError("mat_mul: dimension mismatch");
  Mat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

/// mᵀ x
inline Vec mat_tvec(const Mat& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.rows) throw ConfigError("mat_tvec: dimension mismatch");
  Vec y(m.cols, 0.0);
  for (int j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) s += m(i, j) * x[i];
    y[j] = s;
  }
  return y;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline Vec add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vec sub(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

inline Vec scale(Vec a, double s) {
  for (double& v : a) v *= s;
  return a;
}

/// a += s * b
inline void axpy(Vec& a, double s, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

inline bool all_finite(const Vec& a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// Induced 2-norm via power iteration on mᵀm. Deterministic start, fixed
/// iteration count; plenty for the 4x4 matrices used here.
inline double spectral_norm(const Mat& m) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  Vec v(m.cols, 1.0 / std::sqrt(static_cast<double>(m.cols)));
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vec w = mat_vec(m, v);
    Vec z = mat_tvec(m, w);
    const double n = norm2(z);
    if (n == 0.0) return 0.0;
    for (double& e : z) e /= n;
    lambda = n;
    v = std::move(z);
  }
  return std::sqrt(lambda);
}

/// Solve H x = b for symmetric positive definite H by Cholesky, in place.
/// Returns false when H is not (numerically) positive definite.
inline bool cholesky_solve(Mat H, Vec b, Vec& out) {
  const int n = H.rows;
  if (H.cols != n || static_cast<int>(b.size()) != n) throw ConfigError("cholesky: shape");
  for (int j = 0; j < n; ++j) {
    double d = H(j, j);
    for (int k = 0; k < j; ++k) d -= H(j, k) * H(j, k);
    if (d <= 0.0 || !std::isfinite(d)) return false;
    const double l = std::sqrt(d);
    H(j, j) = l;
    for (int i = j + 1; i < n; ++i) {
      double s = H(i, j);
      for (int k = 0; k < j; ++k) s -= H(i, k) * H(j, k);
      H(i, j) = s / l;
    }
  }
  // forward then backward substitution
  for (int i = 0; i < n; ++i) {
    double s = b[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) s -= H(i, k) * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(i)] = s / H(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k) s -= H(k, i) * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(i)] = s / H(i, i);
  }
  out = std::move(b);
  return true;
}

/// Exact floating-point sum split: a + b == hi + lo exactly (Knuth two-sum).
struct DoublePair {
  double hi = 0.0;
  double lo = 0.0;
};

inline DoublePair two_sum(double a, double b) {
  const double s = a + b;
  const double ap = s - b;
  const double bp = s - ap;
  const double da = a - ap;
  const double db = b - bp;
  return {s, da + db};
}

/// a - b as an exact two-double value.
inline DoublePair exact_diff(double a, double b) { return two_sum(a, -b); }

/// x + (hi + lo). When the exact real sum is itself a double (the round-trip
/// case x == b after d = exact_diff(a, b)), the result is exactly that double.
inline double recombine(double x, const DoublePair& d) {
  const DoublePair s = two_sum(x, d.hi);
  const double t = s.lo + d.lo;
  return s.hi + t;
}

}  // namespace ncs
