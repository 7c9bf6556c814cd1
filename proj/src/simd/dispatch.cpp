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

#include <cstdlib>
#include <string>

#include "mlsb/errors.hpp"
#include "mlsb/simd/kernels.hpp"

namespace mlsb::simd {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(MLSB_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(MLSB_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_of(Isa isa) {
  switch (isa) {
#if defined(MLSB_HAVE_AVX2)
    case Isa::kAvx2:
      return detail::kAvx2Table;
#endif
#if defined(MLSB_HAVE_NEON)
    case Isa::kNeon:
      return detail::kNeonTable;
#endif
    default:
      return detail::kScalarTable;
  }
}

const KernelTable& select_active() {
  if (const char* forced = std::getenv("MLSB_SIMD")) {
    const std::string want(forced);
    for (Isa isa : available_isas()) {
      if (isa_name(isa) == want) return table_of(isa);
    }
    if (!want.empty()) {
      throw ValueError("MLSB_SIMD=" + want +
                       " names a kernel variant this machine cannot run");
    }
  }
  return table_of(available_isas().back());
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out{Isa::kScalar};
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (cpu_supports(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& kernels_for(Isa isa) {
  if (!cpu_supports(isa)) {
    throw ValueError("kernel variant '" + std::string(isa_name(isa)) +
                     "' is not available on this machine");
  }
  return table_of(isa);
}

const KernelTable& kernels() {
  static const KernelTable& active = select_active();
  return active;
}

}  // namespace mlsb::simd
