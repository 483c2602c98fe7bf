#pragma once

#include <cmath>

namespace pdeflow {

// Layout of the derivative data carried by a traced scalar: the value, first
// derivatives with respect to n_grad input coordinates, and the packed upper
// triangle of second derivatives over the first n_hess coordinates.
// Coordinates that only need first-order treatment (e.g. a time input) are
// ordered after the n_hess block.
//
// Component order: [value, g_0 .. g_{n-1}, H_00, H_01, .., H_0m, H_11, ..]
struct JetSpec {
  int n_grad = 0;
  int n_hess = 0;

  int size() const { return 1 + n_grad + n_hess * (n_hess + 1) / 2; }
  int grad(int i) const { return 1 + i; }
  // packed upper-triangle index; requires i <= j < n_hess
  int hess(int i, int j) const {
    return 1 + n_grad + i * n_hess - i * (i + 1) / 2 + j;
  }
  bool operator==(const JetSpec&) const = default;

  static JetSpec value_only() { return {0, 0}; }
  static JetSpec gradient(int n) { return {n, 0}; }
  static JetSpec full(int n) { return {n, n}; }
  // order in {0,1,2} as exposed by lift_input
  static JetSpec for_order(int n, int order) {
    if (order <= 0) return {0, 0};
    if (order == 1) return {n, 0};
    return {n, n};
  }
};

// Jets can describe at most 4 input coordinates (3 spatial plus time).
inline constexpr int kMaxJetComponents = 1 + 4 + 10;

// The kernels below assume dst does not alias the operands unless stated.

inline void jet_zero(const JetSpec& s, double* dst) {
  for (int q = 0, n = s.size(); q < n; ++q) dst[q] = 0.0;
}

inline void jet_copy(const JetSpec& s, double* dst, const double* a) {
  for (int q = 0, n = s.size(); q < n; ++q) dst[q] = a[q];
}

inline void jet_const(const JetSpec& s, double* dst, double v) {
  jet_zero(s, dst);
  dst[0] = v;
}

// Seed for input coordinate `coord`: identity first derivative.
inline void jet_seed(const JetSpec& s, double* dst, double v, int coord) {
  jet_const(s, dst, v);
  if (coord < s.n_grad) dst[s.grad(coord)] = 1.0;
}

inline void jet_add(const JetSpec& s, double* dst, const double* a, const double* b) {
  for (int q = 0, n = s.size(); q < n; ++q) dst[q] = a[q] + b[q];
}

inline void jet_sub(const JetSpec& s, double* dst, const double* a, const double* b) {
  for (int q = 0, n = s.size(); q < n; ++q) dst[q] = a[q] - b[q];
}

inline void jet_neg(const JetSpec& s, double* dst, const double* a) {
  for (int q = 0, n = s.size(); q < n; ++q) dst[q] = -a[q];
}

inline void jet_scale(const JetSpec& s, double* dst, const double* a, double c) {
  for (int q = 0, n = s.size(); q < n; ++q) dst[q] = c * a[q];
}

// dst += c * a, componentwise
inline void jet_axpy(const JetSpec& s, double* dst, const double* a, double c) {
  for (int q = 0, n = s.size(); q < n; ++q) dst[q] += c * a[q];
}

inline double jet_dot(const JetSpec& s, const double* a, const double* b) {
  double acc = 0.0;
  for (int q = 0, n = s.size(); q < n; ++q) acc += a[q] * b[q];
  return acc;
}

// Leibniz product through second order.
inline void jet_mul(const JetSpec& s, double* dst, const double* a, const double* b) {
  const double av = a[0], bv = b[0];
  int k = 1 + s.n_grad;
  for (int i = 0; i < s.n_hess; ++i)
    for (int j = i; j < s.n_hess; ++j, ++k)
      dst[k] = av * b[k] + bv * a[k] + a[1 + i] * b[1 + j] + a[1 + j] * b[1 + i];
  for (int i = 0; i < s.n_grad; ++i) dst[1 + i] = av * b[1 + i] + bv * a[1 + i];
  dst[0] = av * bv;
}

// Quotient rule through second order; caller guarantees b[0] != 0.
inline void jet_div(const JetSpec& s, double* dst, const double* a, const double* b) {
  const double bv = b[0];
  const double cv = a[0] / bv;
  double cg[4];
  for (int i = 0; i < s.n_grad; ++i) cg[i] = (a[1 + i] - cv * b[1 + i]) / bv;
  int k = 1 + s.n_grad;
  for (int i = 0; i < s.n_hess; ++i)
    for (int j = i; j < s.n_hess; ++j, ++k)
      dst[k] = (a[k] - cv * b[k] - cg[i] * b[1 + j] - cg[j] * b[1 + i]) / bv;
  for (int i = 0; i < s.n_grad; ++i) dst[1 + i] = cg[i];
  dst[0] = cv;
}

// dst = f(a) for a scalar function with value f0 and derivatives f1, f2 at a[0].
inline void jet_compose(const JetSpec& s, double* dst, const double* a,
                        double f0, double f1, double f2) {
  int k = 1 + s.n_grad;
  for (int i = 0; i < s.n_hess; ++i)
    for (int j = i; j < s.n_hess; ++j, ++k)
      dst[k] = f2 * a[1 + i] * a[1 + j] + f1 * a[k];
  for (int i = 0; i < s.n_grad; ++i) dst[1 + i] = f1 * a[1 + i];
  dst[0] = f0;
}

// Derivative jet of a scalar composition: D = jet of f'(a(x)). Used by the
// reverse sweep; needs one derivative order beyond jet_compose.
inline void jet_compose_deriv(const JetSpec& s, double* D, const double* a,
                              double f1, double f2, double f3) {
  jet_compose(s, D, a, f1, f2, f3);
}

// acc += M(D)^T * cbar, where M(D) is the Jacobian of jet multiplication by D.
// This is the adjoint propagation rule shared by all recorded scalar ops: if
// the forward differential is dc = D (.) da in jet arithmetic, the reverse
// update for a's adjoint is this transposed product.
inline void jet_mul_transpose_accum(const JetSpec& s, double* acc, const double* D,
                                    const double* cbar) {
  const double dv = D[0];
  double av = dv * cbar[0];
  for (int i = 0; i < s.n_grad; ++i) {
    av += D[1 + i] * cbar[1 + i];
    acc[1 + i] += dv * cbar[1 + i];
  }
  int k = 1 + s.n_grad;
  for (int i = 0; i < s.n_hess; ++i)
    for (int j = i; j < s.n_hess; ++j, ++k) {
      const double cb = cbar[k];
      av += D[k] * cb;
      acc[1 + j] += D[1 + i] * cb;
      acc[1 + i] += D[1 + j] * cb;
      acc[k] += dv * cb;
    }
  acc[0] += av;
}

// Scalar derivative triples for the supported elementary functions.

struct UnaryDerivs {
  double f0, f1, f2, f3;
};

inline UnaryDerivs tanh_derivs(double x) {
  const double t = std::tanh(x);
  const double f1 = 1.0 - t * t;
  const double f2 = -2.0 * t * f1;
  const double f3 = -2.0 * (f1 * f1 + t * f2);
  return {t, f1, f2, f3};
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + e^x) in overflow-safe form
inline double softplus(double x) {
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline UnaryDerivs softplus_derivs(double x) {
  const double sg = sigmoid(x);
  const double f2 = sg * (1.0 - sg);
  return {softplus(x), sg, f2, f2 * (1.0 - 2.0 * sg)};
}

inline UnaryDerivs exp_derivs(double x) {
  const double e = std::exp(x);
  return {e, e, e, e};
}

inline UnaryDerivs log_derivs(double x) {
  const double inv = 1.0 / x;
  return {std::log(x), inv, -inv * inv, 2.0 * inv * inv * inv};
}

}  // namespace pdeflow
