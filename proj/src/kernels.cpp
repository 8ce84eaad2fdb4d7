// Copyright 2026 The DMRL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dmrl/kernels.hpp"

#include <atomic>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dmrl::nk {

namespace {
std::atomic<int> g_max_threads{0};

int effective_threads() {
#ifdef _OPENMP
  int cap = g_max_threads.load(std::memory_order_relaxed);
  int hw = omp_get_max_threads();
  return cap > 0 ? (cap < hw ? cap : hw) : hw;
#else
  return 1;
#endif
}
}  // namespace

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }
int max_threads() { return effective_threads(); }

namespace serial {

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec(const double* w, int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) y[r] = dot(w + static_cast<int64_t>(r) * cols, x, cols);
}

void matvec_add(const double* w, int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) y[r] += dot(w + static_cast<int64_t>(r) * cols, x, cols);
}

void matvec_t_add(const double* w, int rows, int cols, const double* g, double* gx) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<int64_t>(r) * cols;
    const double gr = g[r];
    for (int c = 0; c < cols; ++c) gx[c] += wr[c] * gr;
  }
}

void outer_add(const double* g, int rows, const double* x, int cols, double* dw) {
  for (int r = 0; r < rows; ++r) {
    double* dwr = dw + static_cast<int64_t>(r) * cols;
    const double gr = g[r];
    for (int c = 0; c < cols; ++c) dwr[c] += gr * x[c];
  }
}

void matmul(const double* a, int n, int k, const double* b, int m, double* c) {
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<int64_t>(i) * k;
    double* ci = c + static_cast<int64_t>(i) * m;
    for (int j = 0; j < m; ++j) ci[j] = 0.0;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<int64_t>(p) * m;
      for (int j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

}  // namespace serial

void matmul(const double* a, int n, int k, const double* b, int m, double* c) {
#ifdef _OPENMP
  const int64_t work = static_cast<int64_t>(n) * k * m;
  if (work >= 1 << 16 && effective_threads() > 1) {
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (int i = 0; i < n; ++i) {
      serial::matmul(a + static_cast<int64_t>(i) * k, 1, k, b, m, c + static_cast<int64_t>(i) * m);
    }
    return;
  }
#endif
  serial::matmul(a, n, k, b, m, c);
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& body) {
#ifdef _OPENMP
  if (n > 1 && effective_threads() > 1) {
    // Exceptions must not unwind across the omp region; capture and rethrow.
    std::exception_ptr error;
#pragma omp parallel num_threads(effective_threads())
    {
#pragma omp for schedule(static)
      for (int64_t i = 0; i < n; ++i) {
        try {
          body(i);
        } catch (...) {
#pragma omp critical(dmrl_parallel_for_error)
          if (!error) error = std::current_exception();
        }
      }
    }
    if (error) std::rethrow_exception(error);
    return;
  }
#endif
  for (int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace dmrl::nk
