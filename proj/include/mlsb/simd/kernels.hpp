// Copyright 2026 The mlsb Authors
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

// Data-parallel inner loops. Every kernel has a portable scalar reference
// and, where the target supports it, AVX2+FMA (x86-64) or NEON (AArch64)
// variants. The active table is chosen once per process from CPU features;
// MLSB_SIMD=scalar|avx2|neon in the environment overrides the choice.

#include <cstddef>
#include <string_view>
#include <vector>

namespace mlsb::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[i] = max(0, x[i])
  void (*relu)(const double* x, double* y, std::size_t n);
  // gx[i] += x[i] > 0 ? gy[i] : 0
  void (*relu_backward)(const double* x, const double* gy, double* gx,
                        std::size_t n);
  // x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
};

// Variants compiled into this binary and supported by the running CPU.
std::vector<Isa> available_isas();

// Throws ValueError when the variant is unavailable on this machine.
const KernelTable& kernels_for(Isa isa);

// The process-wide active table.
const KernelTable& kernels();

namespace detail {
extern const KernelTable kScalarTable;
#if defined(MLSB_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(MLSB_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace mlsb::simd
