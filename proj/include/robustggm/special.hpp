#pragma once

namespace robustggm {

/// Scaled complementary error function exp(x^2) * erfc(x). Finite for
/// x > -26 and accurate to a few ulps; never underflows for large x.
double erfcx(double x);

/// E[tau^a] for tau ~ Gamma(shape, rate): Gamma(shape + a) / Gamma(shape) * rate^{-a}.
double gamma_power_moment(double shape, double rate, double a);

}  // namespace robustggm
