#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "savbdf/errors.hpp"

namespace savbdf {

/// Exact rational p/q, normalized with q > 0 and gcd(p, q) == 1.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  constexpr Rational() = default;
  constexpr Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  constexpr double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend constexpr Rational operator+(Rational a, Rational b) {
    return {a.num * b.den + b.num * a.den, a.den * b.den};
  }
  friend constexpr Rational operator*(Rational a, Rational b) {
    return {a.num * b.num, a.den * b.den};
  }
  friend constexpr bool operator==(Rational a, Rational b) {
    return a.num == b.num && a.den == b.den;
  }
};

/// Coefficients of the implicit-explicit BDFk scheme:
///   (alpha * u^{n+1} - sum_i a_i u^{n-i}) / dt  approximates u_t(t^{n+1}),
///   sum_i b_i v^{n-i}                             extrapolates v(t^{n+1}).
/// Weights are ordered most recent level first.
struct BdfTableau {
  int order = 1;
  Rational alpha;
  std::vector<Rational> a_weights;
  std::vector<Rational> b_weights;
  int eta_exponent = 3;

  double alpha_value() const { return alpha.value(); }

  std::vector<double> a_values() const { return to_doubles(a_weights); }
  std::vector<double> b_values() const { return to_doubles(b_weights); }

 private:
  static std::vector<double> to_doubles(std::span<const Rational> w) {
    std::vector<double> out;
    out.reserve(w.size());
    for (const auto& q : w) out.push_back(q.value());
    return out;
  }
};

/// Default exponent p_k in eta = 1 - (1 - xi)^p_k: 3 for k = 1, k + 1 otherwise.
inline int default_eta_exponent(int k) { return k == 1 ? 3 : k + 1; }

inline BdfTableau tableau(int k) {
  BdfTableau t;
  t.order = k;
  t.eta_exponent = k >= 1 ? default_eta_exponent(k) : 0;
  switch (k) {
    case 1:
      t.alpha = {1};
      t.a_weights = {{1}};
      t.b_weights = {{1}};
      break;
    case 2:
      t.alpha = {3, 2};
      t.a_weights = {{2}, {-1, 2}};
      t.b_weights = {{2}, {-1}};
      break;
    case 3:
      t.alpha = {11, 6};
      t.a_weights = {{3}, {-3, 2}, {1, 3}};
      t.b_weights = {{3}, {-3}, {1}};
      break;
    case 4:
      t.alpha = {25, 12};
      t.a_weights = {{4}, {-3}, {4, 3}, {-1, 4}};
      t.b_weights = {{4}, {-6}, {4}, {-1}};
      break;
    case 5:
      t.alpha = {137, 60};
      t.a_weights = {{5}, {-5}, {10, 3}, {-5, 4}, {1, 5}};
      t.b_weights = {{5}, {-10}, {10}, {-5}, {1}};
      break;
    default:
      throw UnsupportedOrder(k);
  }
  return t;
}

/// Same as tableau(k) with the eta exponent overridden (must be >= 1).
inline BdfTableau tableau(int k, int eta_exponent) {
  auto t = tableau(k);
  if (eta_exponent < 1) throw Error("eta exponent must be >= 1");
  t.eta_exponent = eta_exponent;
  return t;
}

}  // namespace savbdf
