#include <atomic>
#include <cassert>
#include <stdexcept>

#include "rwrl/kernels.hpp"

namespace rwrl::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

bool backend_supported(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
      return cpu_has_avx2();
  }
  return false;
}

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw std::invalid_argument(std::string("kernel backend not supported: ") +
                                backend_name(backend));
  }
  backend_slot().store(backend, std::memory_order_relaxed);
}

const char* backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

void gemv(std::span<const double> w, std::span<const double> b,
          std::span<const double> x, std::span<double> y) {
  assert(w.size() == y.size() * x.size() && b.size() == y.size());
  if (active_backend() == Backend::kAvx2) {
    avx2::gemv(w.data(), b.data(), x.data(), y.data(), y.size(), x.size());
  } else {
    scalar::gemv(w.data(), b.data(), x.data(), y.data(), y.size(), x.size());
  }
}

void gemv_t_acc(std::span<const double> w, std::span<const double> g,
                std::span<double> x_grad) {
  assert(w.size() == g.size() * x_grad.size());
  if (active_backend() == Backend::kAvx2) {
    avx2::gemv_t_acc(w.data(), g.data(), x_grad.data(), g.size(),
                     x_grad.size());
  } else {
    scalar::gemv_t_acc(w.data(), g.data(), x_grad.data(), g.size(),
                       x_grad.size());
  }
}

void ger_acc(std::span<const double> g, std::span<const double> x,
             std::span<double> w_grad) {
  assert(w_grad.size() == g.size() * x.size());
  if (active_backend() == Backend::kAvx2) {
    avx2::ger_acc(g.data(), x.data(), w_grad.data(), g.size(), x.size());
  } else {
    scalar::ger_acc(g.data(), x.data(), w_grad.data(), g.size(), x.size());
  }
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  if (active_backend() == Backend::kAvx2) {
    avx2::axpy(a, x.data(), y.data(), x.size());
  } else {
    scalar::axpy(a, x.data(), y.data(), x.size());
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  if (active_backend() == Backend::kAvx2) {
    return avx2::dot(x.data(), y.data(), x.size());
  }
  return scalar::dot(x.data(), y.data(), x.size());
}

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 std::span<const unsigned char> mask,
                 const AdamCoefficients& c) {
  assert(grad.size() == param.size() && m.size() == param.size() &&
         v.size() == param.size() && mask.size() == param.size());
  if (active_backend() == Backend::kAvx2) {
    avx2::adam_update(param.data(), grad.data(), m.data(), v.data(),
                      mask.data(), param.size(), c);
  } else {
    scalar::adam_update(param.data(), grad.data(), m.data(), v.data(),
                        mask.data(), param.size(), c);
  }
}

}  // namespace rwrl::kernels
