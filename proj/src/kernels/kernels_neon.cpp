#include "peerconf/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace peerconf::kernels::neon {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

RowMoments row_moments(const double* g, const double* p, const double* v,
                       std::size_t n) {
  float64x2_t first = vdupq_n_f64(0.0);
  float64x2_t second = vdupq_n_f64(0.0);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    const float64x2_t gj = vld1q_f64(g + j);
    first = vfmaq_f64(first, gj, vld1q_f64(p + j));
    second = vfmaq_f64(second, vmulq_f64(gj, gj), vld1q_f64(v + j));
  }
  RowMoments m{vaddvq_f64(first), vaddvq_f64(second)};
  for (; j < n; ++j) {
    m.first += g[j] * p[j];
    m.second += g[j] * g[j] * v[j];
  }
  return m;
}

double weighted_dot(const double* w, const double* a, const double* b,
                    std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vfmaq_f64(acc, vmulq_f64(vld1q_f64(w + i), vld1q_f64(a + i)),
                    vld1q_f64(b + i));
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vfmaq_f64(vld1q_f64(out + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) out[i] += alpha * x[i];
}

constexpr KernelTable kTable{Isa::neon, &dot, &row_moments, &weighted_dot,
                             &axpy};

}  // namespace

const KernelTable& table() noexcept { return kTable; }

}  // namespace peerconf::kernels::neon

#endif
