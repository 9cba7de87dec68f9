// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "sendd/simd/kernels.hpp"

namespace sendd::simd {
namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("SENDD_SIMD"); env && std::string(env) == "scalar")
    return &scalar_kernels();
  return isa_available(Isa::Avx2) ? &avx2_kernels() : &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (!isa_available(isa)) throw std::runtime_error("requested ISA not available on this CPU");
  active().store(isa == Isa::Avx2 ? &avx2_kernels() : &scalar_kernels());
}

Isa active_isa() { return kernels().isa; }

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

}  // namespace sendd::simd
