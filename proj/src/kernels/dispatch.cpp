#include <atomic>
#include <cstdlib>
#include <string>

#include "peerconf/error.hpp"
#include "peerconf/kernels.hpp"

namespace peerconf::kernels {
namespace {

const KernelTable* detect() noexcept {
  if (const char* env = std::getenv("PEERCONF_ISA")) {
    if (std::string_view(env) == "scalar") return &scalar::table();
  }
#if defined(PEERCONF_SCALAR_ONLY)
  return &scalar::table();
#endif
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2::supported()) return &avx2::table();
#elif defined(__aarch64__)
  return &neon::table();
#endif
  return &scalar::table();
}

std::atomic<const KernelTable*>& slot() noexcept {
  static std::atomic<const KernelTable*> current{detect()};
  return current;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

const KernelTable& active() noexcept {
  return *slot().load(std::memory_order_relaxed);
}

Isa active_isa() noexcept { return active().isa; }

bool available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return avx2::supported();
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

void select(Isa isa) {
  if (!available(isa)) {
    throw Error("kernel ISA '" + std::string(isa_name(isa)) +
                "' is not available on this CPU");
  }
  const KernelTable* t = &scalar::table();
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::avx2) t = &avx2::table();
#endif
#if defined(__aarch64__)
  if (isa == Isa::neon) t = &neon::table();
#endif
  slot().store(t, std::memory_order_relaxed);
}

}  // namespace peerconf::kernels
