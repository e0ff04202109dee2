#pragma once
// Dense double-precision kernels used by the tree network.
//
// Every kernel has a scalar reference implementation and an AVX2/FMA
// variant. The active backend is picked once at startup from CPUID and can
// be overridden (tests force each backend to compare them).

#include <cstddef>
#include <span>

namespace rwrl::kernels {

enum class Backend { kScalar, kAvx2 };

bool backend_supported(Backend backend);
Backend active_backend();
// Throws std::invalid_argument when the backend is not supported here.
void set_backend(Backend backend);
const char* backend_name(Backend backend);

struct AdamCoefficients {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

// y = W x + b. W is row-major with y.size() rows and x.size() columns.
void gemv(std::span<const double> w, std::span<const double> b,
          std::span<const double> x, std::span<double> y);
// x_grad += W^T g.
void gemv_t_acc(std::span<const double> w, std::span<const double> g,
                std::span<double> x_grad);
// w_grad += g x^T.
void ger_acc(std::span<const double> g, std::span<const double> x,
             std::span<double> w_grad);
// y += a x.
void axpy(double a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
// In-place Adam update; entries with mask == 0 are left untouched.
void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 std::span<const unsigned char> mask,
                 const AdamCoefficients& c);

// Backend-specific entry points. The dispatching functions above forward to
// one of these.
namespace scalar {
void gemv(const double* w, const double* b, const double* x, double* y,
          std::size_t rows, std::size_t cols);
void gemv_t_acc(const double* w, const double* g, double* x_grad,
                std::size_t rows, std::size_t cols);
void ger_acc(const double* g, const double* x, double* w_grad,
             std::size_t rows, std::size_t cols);
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v,
                 const unsigned char* mask, std::size_t n,
                 const AdamCoefficients& c);
}  // namespace scalar

namespace avx2 {
void gemv(const double* w, const double* b, const double* x, double* y,
          std::size_t rows, std::size_t cols);
void gemv_t_acc(const double* w, const double* g, double* x_grad,
                std::size_t rows, std::size_t cols);
void ger_acc(const double* g, const double* x, double* w_grad,
             std::size_t rows, std::size_t cols);
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v,
                 const unsigned char* mask, std::size_t n,
                 const AdamCoefficients& c);
}  // namespace avx2

}  // namespace rwrl::kernels
