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

#ifndef DMRL_KERNELS_H_
#define DMRL_KERNELS_H_

#include <cstdint>
#include <functional>

// Dense kernels. Every parallel entry point partitions work by output index,
// so results are bit-identical to the serial reference for any thread count.
// The serial namespace is the reference used by tests and the benchmark.
namespace dmrl::nk {

// Global cap on worker threads (0 = runtime default). Applies to all
// parallel kernels and to parallel_for.
void set_max_threads(int n);
int max_threads();

namespace serial {

double dot(const double* a, const double* b, int n);
// y = W x        (W is rows x cols, row-major)
void matvec(const double* w, int rows, int cols, const double* x, double* y);
// y += W x
void matvec_add(const double* w, int rows, int cols, const double* x, double* y);
// gx += W^T g
void matvec_t_add(const double* w, int rows, int cols, const double* g, double* gx);
// dw += g x^T   (g has rows entries, x has cols entries)
void outer_add(const double* g, int rows, const double* x, int cols, double* dw);
// C = A B       (A n x k, B k x m, C n x m)
void matmul(const double* a, int n, int k, const double* b, int m, double* c);

}  // namespace serial

// OpenMP-parallel matmul, row-partitioned; falls back to serial for small n.
void matmul(const double* a, int n, int k, const double* b, int m, double* c);

// Runs body(i) for i in [0, n). Iterations must be independent and write only
// to their own output slots; then the result does not depend on thread count.
void parallel_for(int64_t n, const std::function<void(int64_t)>& body);

}  // namespace dmrl::nk

#endif  // DMRL_KERNELS_H_
