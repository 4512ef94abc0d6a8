#pragma once

// Arbitrary-length DFT: radix-2 Cooley-Tukey for powers of two, Bluestein's
// chirp-z reduction otherwise. Convention: X[j] = sum_x f[x] w^{jx},
// w = exp(-2 pi i / n); the inverse carries the 1/n factor.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace dcut {

using cplx = std::complex<double>;

namespace detail {

inline void fft_pow2(std::vector<cplx>& a, bool invert) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2 * std::numbers::pi / static_cast<double>(len) * (invert ? 1 : -1);
    const std::size_t half = len / 2;
    // Twiddles computed directly rather than by repeated multiplication to keep
    // rounding error at O(eps log n).
    std::vector<cplx> tw(half);
    for (std::size_t k = 0; k < half; ++k) tw[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
  if (invert) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

}  // namespace detail

class Dft {
 public:
  explicit Dft(std::size_t n) : n_(n) {
    pow2_ = n > 0 && (n & (n - 1)) == 0;
    if (pow2_ || n == 0) return;
    m_ = 1;
    while (m_ < 2 * n - 1) m_ <<= 1;
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small and exact.
      const auto k2 = static_cast<double>((static_cast<unsigned __int128>(k) * k) % (2 * n));
      chirp_[k] = std::polar(1.0, -std::numbers::pi * k2 / static_cast<double>(n));
    }
    kernel_.assign(m_, cplx{});
    kernel_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) kernel_[k] = kernel_[m_ - k] = std::conj(chirp_[k]);
    detail::fft_pow2(kernel_, false);
  }

  std::size_t size() const noexcept { return n_; }

  std::vector<cplx> forward(std::vector<cplx> x) const { return transform(std::move(x), false); }
  std::vector<cplx> inverse(std::vector<cplx> x) const { return transform(std::move(x), true); }

  std::vector<cplx> forward_real(const std::vector<double>& x) const {
    return forward(std::vector<cplx>(x.begin(), x.end()));
  }

 private:
  std::vector<cplx> transform(std::vector<cplx> x, bool invert) const {
    if (n_ <= 1) return x;
    if (pow2_) {
      detail::fft_pow2(x, invert);
      return x;
    }
    // The inverse is conj(forward(conj(x))) / n.
    if (invert)
      for (auto& v : x) v = std::conj(v);
    std::vector<cplx> a(m_, cplx{});
    for (std::size_t k = 0; k < n_; ++k) a[k] = x[k] * chirp_[k];
    detail::fft_pow2(a, false);
    for (std::size_t i = 0; i < m_; ++i) a[i] *= kernel_[i];
    detail::fft_pow2(a, true);
    for (std::size_t k = 0; k < n_; ++k) x[k] = a[k] * chirp_[k];
    if (invert) {
      for (auto& v : x) v = std::conj(v) / static_cast<double>(n_);
    }
    return x;
  }

  std::size_t n_;
  bool pow2_ = false;
  std::size_t m_ = 0;
  std::vector<cplx> chirp_;
  std::vector<cplx> kernel_;
};

}  // namespace dcut
