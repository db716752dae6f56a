// Built with -ffast-math -fopenmp-simd so the sine and cosine loops go to libmvec.
#include "spectral_sum.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace critfield::detail {

namespace {
constexpr int kChunk = 256;
}

void spectral_sum(int d, std::size_t n, const double* amp, const double* phase, const double* freq,
                  const double* t, double* value, double* grad, double* hess) {
  double ph[kChunk], c[kChunk], s[kChunk];
  double v = 0.0, g[8] = {}, h[64] = {};
  for (std::size_t i0 = 0; i0 < n; i0 += kChunk) {
    const int m = static_cast<int>(n - i0 < kChunk ? n - i0 : kChunk);
    const double* V = freq + i0 * d;
#pragma omp simd
    for (int i = 0; i < m; ++i) {
      double p = phase[i0 + i];
      for (int j = 0; j < d; ++j) p += t[j] * V[i * d + j];
      ph[i] = p;
    }
#pragma omp simd
    for (int i = 0; i < m; ++i) c[i] = amp[i0 + i] * std::cos(ph[i]);
    if (value)
      for (int i = 0; i < m; ++i) v += c[i];
    if (grad) {
#pragma omp simd
      for (int i = 0; i < m; ++i) s[i] = amp[i0 + i] * std::sin(ph[i]);
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (int i = 0; i < m; ++i) acc += s[i] * V[i * d + j];
        g[j] -= acc;
      }
    }
    if (hess)
      for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) {
          double acc = 0.0;
#pragma omp simd reduction(+ : acc)
          for (int i = 0; i < m; ++i) acc += c[i] * V[i * d + j] * V[i * d + k];
          h[j * d + k] -= acc;
        }
  }
  if (value) *value = v;
  if (grad)
    for (int j = 0; j < d; ++j) grad[j] = g[j];
  if (hess)
    for (int j = 0; j < d; ++j)
      for (int k = j; k < d; ++k) hess[j * d + k] = h[j * d + k];
}

// exp(i(U + t.V)) is advanced along the grid by one complex product per axis step,
// so the sines and cosines are only needed at the grid origin.
void spectral_grid(int d, std::size_t n, const double* amp, const double* phase, const double* freq,
                   const double* lower, const double* step, const int* counts, double* grad, double* hess) {
  long N = 1;
  for (int k = 0; k < d; ++k) N *= counts[k];
  std::vector<double> wr(d * kChunk), wi(d * kChunk), pr((d + 1) * kChunk), pi((d + 1) * kChunk);
  std::vector<double> av(d * kChunk), avv(d * d * kChunk);
  std::vector<double> tmp(kChunk);
  std::vector<int> j(d);
  for (std::size_t i0 = 0; i0 < n; i0 += kChunk) {
    const int m = static_cast<int>(n - i0 < kChunk ? n - i0 : kChunk);
    const double* V = freq + i0 * d;
    for (int i = 0; i < m; ++i) {
      double p = phase[i0 + i];
      for (int k = 0; k < d; ++k) {
        p += (lower[k] + 0.5 * step[k]) * V[i * d + k];
        wr[k * kChunk + i] = step[k] * V[i * d + k];
        av[k * kChunk + i] = amp[i0 + i] * V[i * d + k];
      }
      tmp[i] = p;
    }
    for (int k = 0; k < d; ++k)
      for (int l = k; l < d; ++l)
        for (int i = 0; i < m; ++i) avv[(k * d + l) * kChunk + i] = av[k * kChunk + i] * V[i * d + l];
#pragma omp simd
    for (int i = 0; i < m; ++i) {
      pr[d * kChunk + i] = std::cos(tmp[i]);
      pi[d * kChunk + i] = std::sin(tmp[i]);
    }
    for (int k = 0; k < d; ++k) {
      double* r = &wr[k * kChunk];
      double* s = &wi[k * kChunk];
#pragma omp simd
      for (int i = 0; i < m; ++i) {
        const double x = r[i];
        r[i] = std::cos(x);
        s[i] = std::sin(x);
      }
    }
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < m; ++i) {
        pr[k * kChunk + i] = pr[d * kChunk + i];
        pi[k * kChunk + i] = pi[d * kChunk + i];
      }
    std::fill(j.begin(), j.end(), 0);
    double* g = grad;
    double* h = hess;
    const double* cr = pr.data();
    const double* ci = pi.data();
    for (long p = 0; p < N; ++p, g += d) {
      for (int k = 0; k < d; ++k) {
        const double* a = &av[k * kChunk];
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (int i = 0; i < m; ++i) acc += a[i] * ci[i];
        g[k] -= acc;
      }
      if (h) {
        for (int k = 0; k < d; ++k)
          for (int l = k; l < d; ++l) {
            const double* a = &avv[(k * d + l) * kChunk];
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (int i = 0; i < m; ++i) acc += a[i] * cr[i];
            h[k * d + l] -= acc;
            if (l != k) h[l * d + k] -= acc;
          }
        h += d * d;
      }
      int k = 0;
      while (k < d && ++j[k] == counts[k]) j[k++] = 0;
      if (k == d) break;
      double* xr = &pr[k * kChunk];
      double* xi = &pi[k * kChunk];
      const double* yr = &wr[k * kChunk];
      const double* yi = &wi[k * kChunk];
#pragma omp simd
      for (int i = 0; i < m; ++i) {
        const double re = xr[i] * yr[i] - xi[i] * yi[i];
        xi[i] = xr[i] * yi[i] + xi[i] * yr[i];
        xr[i] = re;
      }
      for (int l = 0; l < k; ++l) {
        std::copy(xr, xr + m, &pr[l * kChunk]);
        std::copy(xi, xi + m, &pi[l * kChunk]);
      }
    }
  }
}

}  // namespace critfield::detail
