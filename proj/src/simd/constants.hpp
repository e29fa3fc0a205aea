#pragma once

// Shared coefficients of the exp/log kernels (fdlibm e_exp.c / e_log.c).
// Both the reference and the vector kernels read them from here so the two
// cannot drift apart.

#include <cstdint>

namespace quenched::simd::detail {

inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kInvLn2 = 1.44269504088896338700e+00;
inline constexpr double kSqrt2 = 1.41421356237309514547e+00;

inline constexpr double kLg1 = 6.666666666666735130e-01;
inline constexpr double kLg2 = 3.999999999940941908e-01;
inline constexpr double kLg3 = 2.857142874366239149e-01;
inline constexpr double kLg4 = 2.222219843214978396e-01;
inline constexpr double kLg5 = 1.818357216161805012e-01;
inline constexpr double kLg6 = 1.531383769920937332e-01;
inline constexpr double kLg7 = 1.479819860511658591e-01;

inline constexpr double kP1 = 1.66666666666666019037e-01;
inline constexpr double kP2 = -2.77777777770155933842e-03;
inline constexpr double kP3 = 6.61375632143793436117e-05;
inline constexpr double kP4 = -1.65339022054652515390e-06;
inline constexpr double kP5 = 4.13813679705723846039e-08;

// exp flushes to zero below this argument; the scaled result stays normal.
inline constexpr double kExpLow = -708.0;
inline constexpr double kExpHigh = 709.0;

inline constexpr double kTwo54 = 18014398509481984.0;  // 2^54
inline constexpr double kTwo52 = 4503599627370496.0;   // 2^52
inline constexpr double kMinNormal = 2.2250738585072014e-308;

inline constexpr std::uint64_t kMantissaMask = 0x000fffffffffffffULL;
inline constexpr std::uint64_t kExponentOne = 0x3ff0000000000000ULL;

}  // namespace quenched::simd::detail
