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

#include "maskris/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "vmath_coeffs.hpp"

namespace maskris::simd {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matmul_acc(const double* x, const double* w, double* y, std::size_t n,
                std::size_t k, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) {
    double* yi = y + i * d;
    const double* xi = x + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = xi[p];
      if (xv == 0.0) continue;
      const double* wp = w + p * d;
      for (std::size_t j = 0; j < d; ++j) yi[j] += xv * wp[j];
    }
  }
}

void matmul_tn_acc(const double* x, const double* dy, double* g, std::size_t n,
                   std::size_t k, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * k;
    const double* di = dy + i * d;
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = xi[p];
      if (xv == 0.0) continue;
      double* gp = g + p * d;
      for (std::size_t j = 0; j < d; ++j) gp[j] += xv * di[j];
    }
  }
}

void matmul_nt_acc(const double* dy, const double* w, double* y, std::size_t n,
                   std::size_t k, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* di = dy + i * d;
    double* yi = y + i * k;
    for (std::size_t p = 0; p < k; ++p) yi[p] += dot(di, w + p * d, d);
  }
}

void zero_masked_pixels(float* rgb, const std::uint8_t* mask,
                        std::size_t pixels) {
  for (std::size_t i = 0; i < pixels; ++i) {
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
  std::uint64_t i_count = 0;
  std::uint64_t u_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pa = a[i] != 0;
    const bool pb = b[i] != 0;
    i_count += (pa && pb) ? 1 : 0;
    u_count += (pa || pb) ? 1 : 0;
  }
  *inter = i_count;
  *uni = u_count;
}

void vexp(const double* x, double* y, std::size_t n) {
  using namespace vmath;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::clamp(x[i], kExpMin, kExpMax);
    const double k = std::nearbyint(v * kLog2e);
    const double r = (v - k * kLn2Hi) - k * kLn2Lo;
    double p = kExpPoly[0];
    for (int c = 1; c < 14; ++c) p = p * r + kExpPoly[c];
    const auto bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(k) + 1023) << 52;
    y[i] = p * std::bit_cast<double>(bits);
  }
}

void vlog(const double* x, double* y, std::size_t n) {
  using namespace vmath;
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(x[i]);
    double e = static_cast<double>(static_cast<int>((bits >> 52) & 0x7ff) - 1023);
    double m = std::bit_cast<double>((bits & 0x000fffffffffffffULL) | 0x3ff0000000000000ULL);
    if (m > kSqrt2) {
      m *= 0.5;
      e += 1.0;
    }
    const double f = (m - 1.0) / (m + 1.0);
    const double s = f * f;
    double p = kLogPoly[0];
    for (int c = 1; c < 11; ++c) p = p * s + kLogPoly[c];
    y[i] = e * kLn2Hi + (f * p + e * kLn2Lo);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::kScalar,   &dot,
                                 &axpy,          &matmul_acc,
                                 &matmul_tn_acc, &matmul_nt_acc,
                                 &zero_masked_pixels, &intersection_union,
                                 &vexp,          &vlog};
  return table;
}

}  // namespace maskris::simd
