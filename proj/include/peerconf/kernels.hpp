#pragma once

// Data-parallel inner loops shared by the model and the estimators.
//
// Every kernel has a scalar reference implementation; AVX2 (x86-64) and NEON
// (aarch64) variants are compiled alongside it and one table is selected at
// first use from the running CPU. Setting PEERCONF_ISA=scalar in the
// environment pins the reference path. Variants differ only in summation
// order, so results agree to rounding (see tests/test_kernels.cpp).

#include <cstddef>
#include <span>
#include <string_view>

namespace peerconf::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

// First moment and variance-weighted second moment of one weight row:
//   first  = sum_j g_j p_j
//   second = sum_j g_j^2 v_j
struct RowMoments {
  double first = 0.0;
  double second = 0.0;
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  RowMoments (*row_moments)(const double* g, const double* p, const double* v,
                            std::size_t n);
  double (*weighted_dot)(const double* w, const double* a, const double* b,
                         std::size_t n);
  // out_j += alpha * x_j
  void (*axpy)(double alpha, const double* x, double* out, std::size_t n);
};

namespace scalar {
const KernelTable& table() noexcept;
}
#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
const KernelTable& table() noexcept;
bool supported() noexcept;
}  // namespace avx2
#endif
#if defined(__aarch64__)
namespace neon {
const KernelTable& table() noexcept;
}
#endif

// The table in use for this process.
const KernelTable& active() noexcept;
Isa active_isa() noexcept;

// Overrides the process-wide selection; used by equivalence tests and the CLI
// `--isa` flag. Throws peerconf::Error if the ISA is unavailable on this CPU.
void select(Isa isa);
bool available(Isa isa) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline RowMoments row_moments(std::span<const double> g,
                              std::span<const double> p,
                              std::span<const double> v) {
  return active().row_moments(g.data(), p.data(), v.data(), g.size());
}

inline double weighted_dot(std::span<const double> w,
                           std::span<const double> a,
                           std::span<const double> b) {
  return active().weighted_dot(w.data(), a.data(), b.data(), w.size());
}

inline void axpy(double alpha, std::span<const double> x,
                 std::span<double> out) {
  active().axpy(alpha, x.data(), out.data(), x.size());
}

}  // namespace peerconf::kernels
