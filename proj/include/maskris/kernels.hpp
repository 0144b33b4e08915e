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

// Arithmetic inner loops shared by the model, masking and metrics code.
//
// Each kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is chosen once at first use from CPUID and
// can be pinned with MASKRIS_KERNELS=scalar|avx2. All matrices are dense
// row-major.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace maskris::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // Y[n x d] += X[n x k] * W[k x d]
  void (*matmul_acc)(const double* x, const double* w, double* y,
                     std::size_t n, std::size_t k, std::size_t d);
  // G[k x d] += X[n x k]^T * D[n x d]
  void (*matmul_tn_acc)(const double* x, const double* dy, double* g,
                        std::size_t n, std::size_t k, std::size_t d);
  // Y[n x k] += D[n x d] * W[k x d]^T
  void (*matmul_nt_acc)(const double* dy, const double* w, double* y,
                        std::size_t n, std::size_t k, std::size_t d);
  // Zero all three channels of every pixel whose mask byte is non-zero.
  void (*zero_masked_pixels)(float* rgb, const std::uint8_t* mask,
                             std::size_t pixels);
  // Counts of (a && b) and (a || b) over 0/1 byte masks.
  void (*intersection_union)(const std::uint8_t* a, const std::uint8_t* b,
                             std::size_t n, std::uint64_t* inter,
                             std::uint64_t* uni);
  // y[i] = exp(x[i]) with x clamped to [-708, 709]; relative error ~1e-15.
  // In place (x == y) is allowed.
  void (*vexp)(const double* x, double* y, std::size_t n);
  // y[i] = log(x[i]) for positive normal x; absolute error ~1e-16 near 1.
  void (*vlog)(const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the CPU or the build lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// Active table. Resolved once; thread-safe.
const KernelTable& kernels();

std::string_view isa_name(Isa isa);

}  // namespace maskris::simd
