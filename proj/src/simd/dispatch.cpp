#include <atomic>
#include <cstdlib>
#include <string>

#include "cwae/error.hpp"
#include "cwae/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace cwae::simd {
namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
      return true;  // Advanced SIMD is mandatory on AArch64.
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* compiled(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &scalar_kernels();
    case Isa::avx2:
      return detail::avx2_table();
    case Isa::neon:
      return detail::neon_table();
  }
  return nullptr;
}

const KernelTable* best_available() {
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (isa_supported(isa)) return compiled(isa);
  }
  return &scalar_kernels();
}

const KernelTable* initial_choice() {
  const char* env = std::getenv("CWAE_ISA");
  if (env == nullptr || std::string_view(env).empty() ||
      std::string_view(env) == "auto") {
    return best_available();
  }
  return &kernels_for(parse_isa(env));
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_choice()};
  return slot;
}

}  // namespace

bool isa_supported(Isa isa) { return compiled(isa) != nullptr && cpu_has(isa); }

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw ValidationError("SIMD variant '" + std::string(isa_name(isa)) +
                          "' is not available on this build/CPU");
  }
  return *compiled(isa);
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active(Isa isa) {
  active_slot().store(&kernels_for(isa), std::memory_order_release);
}

std::vector<Isa> supported_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  throw ValidationError("unknown SIMD variant '" + std::string(name) +
                        "' (expected scalar, avx2, neon or auto)");
}

}  // namespace cwae::simd
