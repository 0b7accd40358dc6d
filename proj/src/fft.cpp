#include "fft.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <new>
#include <utility>

namespace thz::detail {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::shared_ptr<void> plan_for(std::size_t n) {
  std::lock_guard lock(planner_mutex());
  static std::map<std::size_t, std::shared_ptr<void>> cache;
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  fftw_complex* in = fftw_alloc_complex(n);
  fftw_complex* out = fftw_alloc_complex(n);
  fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  if (!p) throw std::bad_alloc();
  std::shared_ptr<void> plan(p, [](void* q) {
    std::lock_guard inner(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(q));
  });
  cache.emplace(n, plan);
  return plan;
}

}  // namespace

FftBuffer::FftBuffer(std::size_t n) : n_(n), data_(fftw_alloc_complex(n)) {
  if (!data_) throw std::bad_alloc();
}

FftBuffer::~FftBuffer() {
  if (data_) fftw_free(data_);
}

FftBuffer::FftBuffer(FftBuffer&& other) noexcept
    : n_(std::exchange(other.n_, 0)), data_(std::exchange(other.data_, nullptr)) {}

FftBuffer& FftBuffer::operator=(FftBuffer&& other) noexcept {
  if (this != &other) {
    if (data_) fftw_free(data_);
    n_ = std::exchange(other.n_, 0);
    data_ = std::exchange(other.data_, nullptr);
  }
  return *this;
}

ForwardFft::ForwardFft(std::size_t n) : n_(n), plan_(plan_for(n)) {}

void ForwardFft::execute(FftBuffer& in, FftBuffer& out) const {
  // In-place and out-of-place plans differ in FFTW; route aliasing through a copy.
  if (in.raw() == out.raw()) {
    FftBuffer tmp(n_);
    fftw_execute_dft(static_cast<fftw_plan>(plan_.get()), in.raw(), tmp.raw());
    std::copy(tmp.view().begin(), tmp.view().end(), out.view().begin());
    return;
  }
  fftw_execute_dft(static_cast<fftw_plan>(plan_.get()), in.raw(), out.raw());
}

}  // namespace thz::detail
