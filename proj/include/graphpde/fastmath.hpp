#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstddef>

// Branch-free elementwise exp/tanh used on activation buffers.
//
// Every element goes through the identical arithmetic sequence (explicit fma,
// min/max clamps, no data-dependent branches), so results do not depend on
// buffer position or SIMD packing. That makes node-relabeling tests bitwise
// reproducible, which libm/SIMD-library tails do not guarantee. Accuracy is
// ~2 ulp over the clamped range, and the backward pass differentiates this
// function (1 - t^2 on the stored output), so gradients stay consistent.

namespace graphpde::fastmath {

/// exp(x) for x in [-700, 700]; callers clamp. Cody-Waite reduction plus a
/// degree-13 Taylor/Horner core on |r| <= ln2/2, then exact 2^n scaling.
inline double exp_pi(double x) {
  constexpr double kLog2E = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  // round-to-nearest-even via the 2^52+2^51 shifter (|x*log2e| << 2^51);
  // plain nearbyint defeats the vectorizer when combined with min/max
  constexpr double kShift = 6755399441055744.0;

  const double t = std::fma(x, kLog2E, kShift);
  const double nf = t - kShift;
  const std::int64_t n = std::bit_cast<std::int64_t>(t) - std::bit_cast<std::int64_t>(kShift);
  double r = std::fma(-nf, kLn2Hi, x);
  r = std::fma(-nf, kLn2Lo, r);

  // Taylor coefficients 1/k!; truncation error < 3e-17 on the reduced range.
  double p = 1.6059043836821613e-10;           // 1/13!
  p = std::fma(p, r, 2.08767569878681e-09);    // 1/12!
  p = std::fma(p, r, 2.505210838544172e-08);   // 1/11!
  p = std::fma(p, r, 2.7557319223985893e-07);  // 1/10!
  p = std::fma(p, r, 2.755731922398589e-06);   // 1/9!
  p = std::fma(p, r, 2.48015873015873e-05);    // 1/8!
  p = std::fma(p, r, 1.984126984126984e-04);   // 1/7!
  p = std::fma(p, r, 1.3888888888888889e-03);  // 1/6!
  p = std::fma(p, r, 8.333333333333333e-03);   // 1/5!
  p = std::fma(p, r, 4.1666666666666664e-02);  // 1/4!
  p = std::fma(p, r, 1.6666666666666666e-01);  // 1/3!
  p = std::fma(p, r, 5.0e-01);                 // 1/2!
  p = std::fma(p, r, 1.0);
  p = std::fma(p, r, 1.0);

  // 2^n via exponent bits, split in two to stay clear of overflow/subnormals.
  const std::int64_t n1 = n / 2;
  const std::int64_t n2 = n - n1;
  const double s1 = std::bit_cast<double>((n1 + 1023) << 52);
  const double s2 = std::bit_cast<double>((n2 + 1023) << 52);
  return (p * s1) * s2;
}

/// tanh(x) = 1 - 2/(exp(2x)+1); input clamped where tanh is +-1 to 1 ulp.
inline double tanh_pi(double x) {
  double z = 2.0 * x;
  z = std::min(std::max(z, -44.0), 44.0);
  return 1.0 - 2.0 / (exp_pi(z) + 1.0);
}

/// In-place tanh over a buffer; the loop body autovectorizes.
inline void tanh_inplace(double* buf, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) buf[i] = tanh_pi(buf[i]);
}

}  // namespace graphpde::fastmath
