#pragma once

// Thin RAII layer over FFTW. Plans are created once per length under a lock;
// execution uses the new-array interface, which is thread-safe.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace thz::detail {

class FftBuffer {
 public:
  explicit FftBuffer(std::size_t n);
  ~FftBuffer();
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;
  FftBuffer(FftBuffer&& other) noexcept;
  FftBuffer& operator=(FftBuffer&& other) noexcept;

  std::size_t size() const { return n_; }
  fftw_complex* raw() { return data_; }
  std::span<std::complex<double>> view() {
    return {reinterpret_cast<std::complex<double>*>(data_), n_};
  }

 private:
  std::size_t n_ = 0;
  fftw_complex* data_ = nullptr;
};

/// Unnormalized forward DFT, X[z] = sum_k x[k] exp(-j 2 pi k z / n).
class ForwardFft {
 public:
  explicit ForwardFft(std::size_t n);
  std::size_t size() const { return n_; }
  /// in and out must come from FftBuffer of this length; they may alias.
  void execute(FftBuffer& in, FftBuffer& out) const;

 private:
  std::size_t n_;
  std::shared_ptr<void> plan_;
};

}  // namespace thz::detail
