// Copyright (c) the maskris-lab authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Shared constants for the exp and log kernels, so the scalar and AVX2
// versions evaluate the same polynomials.

namespace maskris::simd::vmath {

inline constexpr double kLog2e = 1.4426950408889634074;
// ln 2 split so that n * kLn2Hi is exact for |n| < 2^11.
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kSqrt2 = 1.41421356237309504880;

// exp(x) is evaluated for x clamped to [kExpMin, kExpMax].
inline constexpr double kExpMin = -708.0;
inline constexpr double kExpMax = 709.0;

// Taylor coefficients 1/k! for k = 13 down to 0; |r| <= ln2/2 after range
// reduction leaves a truncation error below 2e-16 relative.
inline constexpr double kExpPoly[14] = {
    1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
    1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
    1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
    1.0,                1.0};

// log(m) = 2 atanh(f), f = (m - 1) / (m + 1), as f * sum_k (2 / (2k + 1)) f^2k
// for k = 10 down to 0; |f| <= 0.1716 for m in [sqrt(1/2), sqrt(2)].
inline constexpr double kLogPoly[11] = {2.0 / 21.0, 2.0 / 19.0, 2.0 / 17.0, 2.0 / 15.0,
                                        2.0 / 13.0, 2.0 / 11.0, 2.0 / 9.0,  2.0 / 7.0,
                                        2.0 / 5.0,  2.0 / 3.0,  2.0};

}  // namespace maskris::simd::vmath
