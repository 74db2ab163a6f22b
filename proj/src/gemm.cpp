// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemm.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <vector>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace rforge::detail {

namespace {

template <typename T>
struct Blocking;

template <>
struct Blocking<float> {
    static constexpr std::int64_t mr = 6;
    static constexpr std::int64_t nr = 32;
    static constexpr std::int64_t kc = 256;
    static constexpr std::int64_t mc = 96;
};

template <>
struct Blocking<double> {
    static constexpr std::int64_t mr = 6;
    static constexpr std::int64_t nr = 16;
    static constexpr std::int64_t kc = 256;
    static constexpr std::int64_t mc = 96;
};

// Packs a kc x nc block of B into nr-wide column panels, k-major inside a
// panel. Columns past n are zero.
template <typename T>
void pack_b(MatView<T> b, std::int64_t k0, std::int64_t kc, std::int64_t n, T* out) {
    constexpr auto nr = Blocking<T>::nr;
    for (std::int64_t j0 = 0; j0 < n; j0 += nr) {
        const std::int64_t w = std::min(nr, n - j0);
        for (std::int64_t p = 0; p < kc; ++p) {
            const T* src = b.data + (k0 + p) * b.row_stride + j0 * b.col_stride;
            T* dst = out + p * nr;
            if (b.col_stride == 1) {
                std::copy(src, src + w, dst);
            } else {
                for (std::int64_t j = 0; j < w; ++j) dst[j] = src[j * b.col_stride];
            }
            std::fill(dst + w, dst + nr, T(0));
        }
        out += kc * nr;
    }
}

// Packs an mc x kc block of A into mr-tall row panels, k-major inside a panel.
template <typename T>
void pack_a(MatView<T> a, std::int64_t i0, std::int64_t mc, std::int64_t k0, std::int64_t kc, T* out) {
    constexpr auto mr = Blocking<T>::mr;
    for (std::int64_t r0 = 0; r0 < mc; r0 += mr) {
        const std::int64_t h = std::min(mr, mc - r0);
        for (std::int64_t p = 0; p < kc; ++p) {
            T* dst = out + p * mr;
            for (std::int64_t i = 0; i < h; ++i)
                dst[i] = a.data[(i0 + r0 + i) * a.row_stride + (k0 + p) * a.col_stride];
            for (std::int64_t i = h; i < mr; ++i) dst[i] = T(0);
        }
        out += kc * mr;
    }
}

template <typename T>
void micro_kernel_generic(std::int64_t kc, const T* __restrict ap, const T* __restrict bp, T* __restrict acc_out) {
    constexpr auto mr = Blocking<T>::mr;
    constexpr auto nr = Blocking<T>::nr;
    T* acc = acc_out;
    for (std::int64_t p = 0; p < kc; ++p) {
        const T* brow = bp + p * nr;
        const T* acol = ap + p * mr;
        for (std::int64_t i = 0; i < mr; ++i)
            for (std::int64_t j = 0; j < nr; ++j) acc[i * nr + j] = std::fma(acol[i], brow[j], acc[i * nr + j]);
    }
}

#if defined(__AVX512F__)
// 6 rows x 2 vectors of accumulators; the k loop is the only reduction, so
// every lane sees the same fma sequence as the scalar reference.
template <typename T>
void micro_kernel_avx512(std::int64_t kc, const T* __restrict ap, const T* __restrict bp, T* __restrict acc) {
    constexpr auto nr = Blocking<T>::nr;
    constexpr std::int64_t lanes = 64 / sizeof(T);
    static_assert(nr == 2 * lanes && Blocking<T>::mr == 6);
    if constexpr (std::is_same_v<T, float>) {
        __m512 c00 = _mm512_load_ps(acc + 0 * nr), c01 = _mm512_load_ps(acc + 0 * nr + lanes);
        __m512 c10 = _mm512_load_ps(acc + 1 * nr), c11 = _mm512_load_ps(acc + 1 * nr + lanes);
        __m512 c20 = _mm512_load_ps(acc + 2 * nr), c21 = _mm512_load_ps(acc + 2 * nr + lanes);
        __m512 c30 = _mm512_load_ps(acc + 3 * nr), c31 = _mm512_load_ps(acc + 3 * nr + lanes);
        __m512 c40 = _mm512_load_ps(acc + 4 * nr), c41 = _mm512_load_ps(acc + 4 * nr + lanes);
        __m512 c50 = _mm512_load_ps(acc + 5 * nr), c51 = _mm512_load_ps(acc + 5 * nr + lanes);
        for (std::int64_t p = 0; p < kc; ++p) {
            const __m512 b0 = _mm512_loadu_ps(bp + p * nr);
            const __m512 b1 = _mm512_loadu_ps(bp + p * nr + lanes);
            const T* a = ap + p * 6;
            __m512 av = _mm512_set1_ps(a[0]);
            c00 = _mm512_fmadd_ps(av, b0, c00); c01 = _mm512_fmadd_ps(av, b1, c01);
            av = _mm512_set1_ps(a[1]);
            c10 = _mm512_fmadd_ps(av, b0, c10); c11 = _mm512_fmadd_ps(av, b1, c11);
            av = _mm512_set1_ps(a[2]);
            c20 = _mm512_fmadd_ps(av, b0, c20); c21 = _mm512_fmadd_ps(av, b1, c21);
            av = _mm512_set1_ps(a[3]);
            c30 = _mm512_fmadd_ps(av, b0, c30); c31 = _mm512_fmadd_ps(av, b1, c31);
            av = _mm512_set1_ps(a[4]);
            c40 = _mm512_fmadd_ps(av, b0, c40); c41 = _mm512_fmadd_ps(av, b1, c41);
            av = _mm512_set1_ps(a[5]);
            c50 = _mm512_fmadd_ps(av, b0, c50); c51 = _mm512_fmadd_ps(av, b1, c51);
        }
        _mm512_store_ps(acc + 0 * nr, c00); _mm512_store_ps(acc + 0 * nr + lanes, c01);
        _mm512_store_ps(acc + 1 * nr, c10); _mm512_store_ps(acc + 1 * nr + lanes, c11);
        _mm512_store_ps(acc + 2 * nr, c20); _mm512_store_ps(acc + 2 * nr + lanes, c21);
        _mm512_store_ps(acc + 3 * nr, c30); _mm512_store_ps(acc + 3 * nr + lanes, c31);
        _mm512_store_ps(acc + 4 * nr, c40); _mm512_store_ps(acc + 4 * nr + lanes, c41);
        _mm512_store_ps(acc + 5 * nr, c50); _mm512_store_ps(acc + 5 * nr + lanes, c51);
    } else {
        __m512d c00 = _mm512_load_pd(acc + 0 * nr), c01 = _mm512_load_pd(acc + 0 * nr + lanes);
        __m512d c10 = _mm512_load_pd(acc + 1 * nr), c11 = _mm512_load_pd(acc + 1 * nr + lanes);
        __m512d c20 = _mm512_load_pd(acc + 2 * nr), c21 = _mm512_load_pd(acc + 2 * nr + lanes);
        __m512d c30 = _mm512_load_pd(acc + 3 * nr), c31 = _mm512_load_pd(acc + 3 * nr + lanes);
        __m512d c40 = _mm512_load_pd(acc + 4 * nr), c41 = _mm512_load_pd(acc + 4 * nr + lanes);
        __m512d c50 = _mm512_load_pd(acc + 5 * nr), c51 = _mm512_load_pd(acc + 5 * nr + lanes);
        for (std::int64_t p = 0; p < kc; ++p) {
            const __m512d b0 = _mm512_loadu_pd(bp + p * nr);
            const __m512d b1 = _mm512_loadu_pd(bp + p * nr + lanes);
            const T* a = ap + p * 6;
            __m512d av = _mm512_set1_pd(a[0]);
            c00 = _mm512_fmadd_pd(av, b0, c00); c01 = _mm512_fmadd_pd(av, b1, c01);
            av = _mm512_set1_pd(a[1]);
            c10 = _mm512_fmadd_pd(av, b0, c10); c11 = _mm512_fmadd_pd(av, b1, c11);
            av = _mm512_set1_pd(a[2]);
            c20 = _mm512_fmadd_pd(av, b0, c20); c21 = _mm512_fmadd_pd(av, b1, c21);
            av = _mm512_set1_pd(a[3]);
            c30 = _mm512_fmadd_pd(av, b0, c30); c31 = _mm512_fmadd_pd(av, b1, c31);
            av = _mm512_set1_pd(a[4]);
            c40 = _mm512_fmadd_pd(av, b0, c40); c41 = _mm512_fmadd_pd(av, b1, c41);
            av = _mm512_set1_pd(a[5]);
            c50 = _mm512_fmadd_pd(av, b0, c50); c51 = _mm512_fmadd_pd(av, b1, c51);
        }
        _mm512_store_pd(acc + 0 * nr, c00); _mm512_store_pd(acc + 0 * nr + lanes, c01);
        _mm512_store_pd(acc + 1 * nr, c10); _mm512_store_pd(acc + 1 * nr + lanes, c11);
        _mm512_store_pd(acc + 2 * nr, c20); _mm512_store_pd(acc + 2 * nr + lanes, c21);
        _mm512_store_pd(acc + 3 * nr, c30); _mm512_store_pd(acc + 3 * nr + lanes, c31);
        _mm512_store_pd(acc + 4 * nr, c40); _mm512_store_pd(acc + 4 * nr + lanes, c41);
        _mm512_store_pd(acc + 5 * nr, c50); _mm512_store_pd(acc + 5 * nr + lanes, c51);
    }
}
#endif

template <typename T>
void micro_kernel(std::int64_t kc, const T* __restrict ap, const T* __restrict bp, T* c, std::int64_t ldc,
                  std::int64_t h, std::int64_t w, bool load_c) {
    constexpr auto mr = Blocking<T>::mr;
    constexpr auto nr = Blocking<T>::nr;
    alignas(64) T acc[mr * nr];
    for (std::int64_t i = 0; i < mr; ++i)
        for (std::int64_t j = 0; j < nr; ++j)
            acc[i * nr + j] = (load_c && i < h && j < w) ? c[i * ldc + j] : T(0);
#if defined(__AVX512F__)
    micro_kernel_avx512<T>(kc, ap, bp, acc);
#else
    micro_kernel_generic<T>(kc, ap, bp, acc);
#endif
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j) c[i * ldc + j] = acc[i * nr + j];
}

}  // namespace

template <typename T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, MatView<T> a, MatView<T> b, T* c,
          std::int64_t ldc, bool accumulate) {
    using B = Blocking<T>;
    if (m <= 0 || n <= 0) return;
    if (k <= 0) {
        if (!accumulate)
            for (std::int64_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T(0));
        return;
    }
    const std::int64_t n_panels = (n + B::nr - 1) / B::nr;
    std::vector<T> bpack(static_cast<std::size_t>(n_panels * B::nr * B::kc));
    std::vector<T> apack(static_cast<std::size_t>(((B::mc + B::mr - 1) / B::mr) * B::mr * B::kc));

    for (std::int64_t k0 = 0; k0 < k; k0 += B::kc) {
        const std::int64_t kc = std::min(B::kc, k - k0);
        const bool load_c = accumulate || k0 > 0;
        pack_b(b, k0, kc, n, bpack.data());
        for (std::int64_t i0 = 0; i0 < m; i0 += B::mc) {
            const std::int64_t mc = std::min(B::mc, m - i0);
            pack_a(a, i0, mc, k0, kc, apack.data());
            for (std::int64_t jp = 0; jp < n_panels; ++jp) {
                const std::int64_t j0 = jp * B::nr;
                const std::int64_t w = std::min(B::nr, n - j0);
                const T* bp = bpack.data() + jp * kc * B::nr;
                for (std::int64_t r0 = 0; r0 < mc; r0 += B::mr) {
                    const std::int64_t h = std::min(B::mr, mc - r0);
                    const T* ap = apack.data() + (r0 / B::mr) * kc * B::mr;
                    micro_kernel<T>(kc, ap, bp, c + (i0 + r0) * ldc + j0, ldc, h, w, load_c);
                }
            }
        }
    }
}

template void gemm<float>(std::int64_t, std::int64_t, std::int64_t, MatView<float>, MatView<float>, float*,
                          std::int64_t, bool);
template void gemm<double>(std::int64_t, std::int64_t, std::int64_t, MatView<double>, MatView<double>,
                           double*, std::int64_t, bool);

}  // namespace rforge::detail
