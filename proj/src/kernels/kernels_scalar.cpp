#include "peerconf/kernels.hpp"

namespace peerconf::kernels::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

RowMoments row_moments(const double* g, const double* p, const double* v,
                       std::size_t n) {
  RowMoments m;
  for (std::size_t j = 0; j < n; ++j) {
    m.first += g[j] * p[j];
    m.second += g[j] * g[j] * v[j];
  }
  return m;
}

double weighted_dot(const double* w, const double* a, const double* b,
                    std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += alpha * x[i];
}

constexpr KernelTable kTable{Isa::scalar, &dot, &row_moments, &weighted_dot,
                             &axpy};

}  // namespace

const KernelTable& table() noexcept { return kTable; }

}  // namespace peerconf::kernels::scalar
