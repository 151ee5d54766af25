#include "robustggm/special.hpp"

#include <cmath>
#include <numbers>

namespace robustggm {

namespace {

// Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
// evaluated bottom-up. Converges quickly for x >= 4.
double erfcx_continued_fraction(double x) {
  constexpr int kTerms = 80;
  double tail = x;
  for (int k = kTerms; k >= 1; --k) tail = x + 0.5 * k / tail;
  return 1.0 / (std::sqrt(std::numbers::pi) * tail);
}

}  // namespace

double erfcx(double x) {
  if (x < 0.0) {
    // erfc(x) = 2 - erfc(-x)
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x < 4.0) return std::exp(x * x) * std::erfc(x);
  return erfcx_continued_fraction(x);
}

double gamma_power_moment(double shape, double rate, double a) {
  return std::exp(std::lgamma(shape + a) - std::lgamma(shape) - a * std::log(rate));
}

}  // namespace robustggm
