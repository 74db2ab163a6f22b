// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace rforge::detail {

// Strided view of a row-major-ish matrix: element (i, j) lives at
// data[i * row_stride + j * col_stride]. Transposes are stride swaps.
template <typename T>
struct MatView {
    const T* data;
    std::int64_t row_stride;
    std::int64_t col_stride;
};

// C[M,N] (row-major, leading dim ldc) = A[M,K] * B[K,N], or += when
// accumulate is set. Each output element is reduced with fused multiply-adds
// in strictly increasing k, starting from 0 (or from C), so results are
// bit-identical to a naive `acc = fma(a, b, acc)` loop over k.
template <typename T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, MatView<T> a, MatView<T> b, T* c,
          std::int64_t ldc, bool accumulate);

extern template void gemm<float>(std::int64_t, std::int64_t, std::int64_t, MatView<float>, MatView<float>,
                                 float*, std::int64_t, bool);
extern template void gemm<double>(std::int64_t, std::int64_t, std::int64_t, MatView<double>,
                                  MatView<double>, double*, std::int64_t, bool);

}  // namespace rforge::detail
