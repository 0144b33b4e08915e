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

#include <cstdlib>
#include <string>

#include "maskris/kernels.hpp"

namespace maskris::simd {

#if defined(MASKRIS_HAVE_AVX2_KERNELS)
const KernelTable& avx2_kernel_table();
#endif

namespace {

bool cpu_has_avx2_fma() {
#if defined(MASKRIS_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& resolve() {
  const char* forced = std::getenv("MASKRIS_KERNELS");
  const std::string choice = forced ? forced : "";
  if (choice == "scalar") return scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(MASKRIS_HAVE_AVX2_KERNELS)
  static const bool supported = cpu_has_avx2_fma();
  if (supported) return &avx2_kernel_table();
#endif
  return nullptr;
}

const KernelTable& kernels() {
  static const KernelTable& active = resolve();
  return active;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace maskris::simd
