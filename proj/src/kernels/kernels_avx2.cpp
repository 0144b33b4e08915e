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

// Compiled with -mavx2 -mfma. Nothing in this file may run before the
// dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <bit>

#include "maskris/kernels.hpp"
#include "vmath_coeffs.hpp"

namespace maskris::simd {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matmul_acc(const double* x, const double* w, double* y, std::size_t n,
                std::size_t k, std::size_t d) {
  const std::size_t dv = d & ~std::size_t{3};
  for (std::size_t i = 0; i < n; ++i) {
    double* yi = y + i * d;
    const double* xi = x + i * k;
    std::size_t j = 0;
    // Four output vectors held in registers across the whole k loop.
    for (; j + 16 <= dv; j += 16) {
      __m256d a0 = _mm256_loadu_pd(yi + j);
      __m256d a1 = _mm256_loadu_pd(yi + j + 4);
      __m256d a2 = _mm256_loadu_pd(yi + j + 8);
      __m256d a3 = _mm256_loadu_pd(yi + j + 12);
      for (std::size_t p = 0; p < k; ++p) {
        if (xi[p] == 0.0) continue;
        const __m256d xv = _mm256_set1_pd(xi[p]);
        const double* wp = w + p * d + j;
        a0 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wp), a0);
        a1 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wp + 4), a1);
        a2 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wp + 8), a2);
        a3 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wp + 12), a3);
      }
      _mm256_storeu_pd(yi + j, a0);
      _mm256_storeu_pd(yi + j + 4, a1);
      _mm256_storeu_pd(yi + j + 8, a2);
      _mm256_storeu_pd(yi + j + 12, a3);
    }
    for (; j < dv; j += 4) {
      __m256d a0 = _mm256_loadu_pd(yi + j);
      for (std::size_t p = 0; p < k; ++p) {
        if (xi[p] == 0.0) continue;
        a0 = _mm256_fmadd_pd(_mm256_set1_pd(xi[p]), _mm256_loadu_pd(w + p * d + j), a0);
      }
      _mm256_storeu_pd(yi + j, a0);
    }
    for (; j < d; ++j) {
      double acc = yi[j];
      for (std::size_t p = 0; p < k; ++p) {
        if (xi[p] == 0.0) continue;
        acc += xi[p] * w[p * d + j];
      }
      yi[j] = acc;
    }
  }
}

void matmul_tn_acc(const double* x, const double* dy, double* g, std::size_t n,
                   std::size_t k, std::size_t d) {
  const std::size_t dv = d & ~std::size_t{15};
  // Two rows of g times sixteen columns stay in registers while the n
  // dimension streams past.
  std::size_t p = 0;
  for (; p + 2 <= k; p += 2) {
    double* g0 = g + p * d;
    double* g1 = g0 + d;
    for (std::size_t j = 0; j < dv; j += 16) {
      __m256d a0 = _mm256_loadu_pd(g0 + j), a1 = _mm256_loadu_pd(g0 + j + 4);
      __m256d a2 = _mm256_loadu_pd(g0 + j + 8), a3 = _mm256_loadu_pd(g0 + j + 12);
      __m256d b0 = _mm256_loadu_pd(g1 + j), b1 = _mm256_loadu_pd(g1 + j + 4);
      __m256d b2 = _mm256_loadu_pd(g1 + j + 8), b3 = _mm256_loadu_pd(g1 + j + 12);
      for (std::size_t i = 0; i < n; ++i) {
        const double x0 = x[i * k + p];
        const double x1 = x[i * k + p + 1];
        if (x0 == 0.0 && x1 == 0.0) continue;
        const double* di = dy + i * d + j;
        const __m256d d0 = _mm256_loadu_pd(di), d1 = _mm256_loadu_pd(di + 4);
        const __m256d d2 = _mm256_loadu_pd(di + 8), d3 = _mm256_loadu_pd(di + 12);
        if (x0 != 0.0) {
          const __m256d v = _mm256_set1_pd(x0);
          a0 = _mm256_fmadd_pd(v, d0, a0);
          a1 = _mm256_fmadd_pd(v, d1, a1);
          a2 = _mm256_fmadd_pd(v, d2, a2);
          a3 = _mm256_fmadd_pd(v, d3, a3);
        }
        if (x1 != 0.0) {
          const __m256d v = _mm256_set1_pd(x1);
          b0 = _mm256_fmadd_pd(v, d0, b0);
          b1 = _mm256_fmadd_pd(v, d1, b1);
          b2 = _mm256_fmadd_pd(v, d2, b2);
          b3 = _mm256_fmadd_pd(v, d3, b3);
        }
      }
      _mm256_storeu_pd(g0 + j, a0), _mm256_storeu_pd(g0 + j + 4, a1);
      _mm256_storeu_pd(g0 + j + 8, a2), _mm256_storeu_pd(g0 + j + 12, a3);
      _mm256_storeu_pd(g1 + j, b0), _mm256_storeu_pd(g1 + j + 4, b1);
      _mm256_storeu_pd(g1 + j + 8, b2), _mm256_storeu_pd(g1 + j + 12, b3);
    }
  }
  // Leftover columns of the rows done above, then leftover rows.
  if (dv < d) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t q = 0; q < p; ++q) {
        const double xv = x[i * k + q];
        if (xv != 0.0) axpy(xv, dy + i * d + dv, g + q * d + dv, d - dv);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = p; q < k; ++q) {
      const double xv = x[i * k + q];
      if (xv != 0.0) axpy(xv, dy + i * d, g + q * d, d);
    }
  }
}

void matmul_nt_acc(const double* dy, const double* w, double* y, std::size_t n,
                   std::size_t k, std::size_t d) {
  if (d % 4 != 0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < k; ++p) y[i * k + p] += dot(dy + i * d, w + p * d, d);
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* di = dy + i * d;
    double* yi = y + i * k;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const double* w0 = w + p * d;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      for (std::size_t j = 0; j < d; j += 4) {
        const __m256d dv = _mm256_loadu_pd(di + j);
        s0 = _mm256_fmadd_pd(dv, _mm256_loadu_pd(w0 + j), s0);
        s1 = _mm256_fmadd_pd(dv, _mm256_loadu_pd(w0 + d + j), s1);
        s2 = _mm256_fmadd_pd(dv, _mm256_loadu_pd(w0 + 2 * d + j), s2);
        s3 = _mm256_fmadd_pd(dv, _mm256_loadu_pd(w0 + 3 * d + j), s3);
      }
      // Transpose-reduce the four accumulators into one vector of sums.
      const __m256d h01 = _mm256_hadd_pd(s0, s1);
      const __m256d h23 = _mm256_hadd_pd(s2, s3);
      const __m256d lo = _mm256_permute2f128_pd(h01, h23, 0x20);
      const __m256d hi = _mm256_permute2f128_pd(h01, h23, 0x31);
      _mm256_storeu_pd(yi + p, _mm256_add_pd(_mm256_loadu_pd(yi + p), _mm256_add_pd(lo, hi)));
    }
    for (; p < k; ++p) yi[p] += dot(di, w + p * d, d);
  }
}

void zero_masked_pixels(float* rgb, const std::uint8_t* mask,
                        std::size_t pixels) {
  // Eight pixels are 24 interleaved floats; spread each pixel's keep flag
  // over its three channel lanes.
  const __m256i spread0 = _mm256_setr_epi32(0, 0, 0, 1, 1, 1, 2, 2);
  const __m256i spread1 = _mm256_setr_epi32(2, 3, 3, 3, 4, 4, 4, 5);
  const __m256i spread2 = _mm256_setr_epi32(5, 5, 6, 6, 6, 7, 7, 7);
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 8 <= pixels; i += 8) {
    std::uint64_t bytes;
    __builtin_memcpy(&bytes, mask + i, sizeof(bytes));
    if (bytes == 0) continue;
    const __m256i m32 =
        _mm256_cvtepu8_epi32(_mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + i)));
    const __m256i keep = _mm256_cmpeq_epi32(m32, zero);
    float* p = rgb + 3 * i;
    for (int part = 0; part < 3; ++part) {
      const __m256i idx = part == 0 ? spread0 : (part == 1 ? spread1 : spread2);
      const __m256 k = _mm256_castsi256_ps(_mm256_permutevar8x32_epi32(keep, idx));
      _mm256_storeu_ps(p + 8 * part, _mm256_and_ps(_mm256_loadu_ps(p + 8 * part), k));
    }
  }
  for (; i < pixels; ++i) {
    if (mask[i]) {
      rgb[3 * i] = 0.0f;
      rgb[3 * i + 1] = 0.0f;
      rgb[3 * i + 2] = 0.0f;
    }
  }
}

void intersection_union(const std::uint8_t* a, const std::uint8_t* b,
                        std::size_t n, std::uint64_t* inter,
                        std::uint64_t* uni) {
  const __m256i zero = _mm256_setzero_si256();
  std::uint64_t i_count = 0;
  std::uint64_t u_count = 0;
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    // Bits set where the byte is zero.
    const auto za = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(va, zero)));
    const auto zb = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(vb, zero)));
    i_count += static_cast<std::uint64_t>(std::popcount(~za & ~zb));
    u_count += static_cast<std::uint64_t>(std::popcount(~(za & zb)));
  }
  for (; i < n; ++i) {
    const bool pa = a[i] != 0;
    const bool pb = b[i] != 0;
    i_count += (pa && pb) ? 1 : 0;
    u_count += (pa || pb) ? 1 : 0;
  }
  *inter = i_count;
  *uni = u_count;
}

// Scalar tails reuse the vector path on a padded copy so every element goes
// through identical arithmetic.
template <typename F>
void by_blocks(const double* x, double* y, std::size_t n, double pad, F&& f) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, f(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {pad, pad, pad, pad};
    for (std::size_t j = i; j < n; ++j) buf[j - i] = x[j];
    _mm256_store_pd(buf, f(_mm256_load_pd(buf)));
    for (std::size_t j = i; j < n; ++j) y[j] = buf[j - i];
  }
}

__m256d exp4(__m256d x) {
  using namespace vmath;
  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(kExpMin)), _mm256_set1_pd(kExpMax));
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2e)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, _mm256_set1_pd(kLn2Hi), x);
  r = _mm256_fnmadd_pd(k, _mm256_set1_pd(kLn2Lo), r);
  __m256d p = _mm256_set1_pd(kExpPoly[0]);
  for (int c = 1; c < 14; ++c) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kExpPoly[c]));
  // k + 1.5 * 2^52 holds k in its low mantissa bits.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);
  const __m256i ki = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(k, magic)),
                                      _mm256_castpd_si256(magic));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ki, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

__m256d log4(__m256d x) {
  using namespace vmath;
  const __m256i bits = _mm256_castpd_si256(x);
  // Biased exponent as a double: OR it into the mantissa of 2^52.
  const __m256i ebits = _mm256_srli_epi64(bits, 52);
  const __m256d two52 = _mm256_set1_pd(4503599627370496.0);
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(ebits, _mm256_castpd_si256(two52))), two52);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000fffffffffffffLL)),
                      _mm256_set1_epi64x(0x3ff0000000000000LL)));
  const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  e = _mm256_add_pd(e, _mm256_and_pd(big, _mm256_set1_pd(1.0)));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d f = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d s = _mm256_mul_pd(f, f);
  __m256d p = _mm256_set1_pd(kLogPoly[0]);
  for (int c = 1; c < 11; ++c) p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(kLogPoly[c]));
  const __m256d lo = _mm256_fmadd_pd(e, _mm256_set1_pd(kLn2Lo), _mm256_mul_pd(f, p));
  return _mm256_fmadd_pd(e, _mm256_set1_pd(kLn2Hi), lo);
}

void vexp(const double* x, double* y, std::size_t n) { by_blocks(x, y, n, 0.0, exp4); }
void vlog(const double* x, double* y, std::size_t n) { by_blocks(x, y, n, 1.0, log4); }

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{Isa::kAvx2,     &dot,
                                 &axpy,          &matmul_acc,
                                 &matmul_tn_acc, &matmul_nt_acc,
                                 &zero_masked_pixels, &intersection_union,
                                 &vexp,          &vlog};
  return table;
}

}  // namespace maskris::simd
