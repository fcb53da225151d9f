#pragma once

// Minimal RAII layer over FFTW for in-place 2D complex transforms.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <span>

namespace mdcs::fft {

namespace detail {

// FFTW's planner is not reentrant; execution is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

}  // namespace detail

enum class Sign { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

/// Owns an aligned rows x cols complex buffer and an in-place plan for it.
/// FFTW_ESTIMATE keeps planning deterministic, so repeated transforms of
/// equal inputs are bit-identical.
class Transform2D {
 public:
  Transform2D(std::size_t rows, std::size_t cols, Sign sign) : rows_(rows), cols_(cols) {
    buf_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * rows * cols)));
    if (!buf_) throw std::bad_alloc();
    std::lock_guard lock(detail::planner_mutex());
    plan_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf_.get(), buf_.get(),
                             static_cast<int>(sign), FFTW_ESTIMATE);
  }
  ~Transform2D() {
    std::lock_guard lock(detail::planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Transform2D(const Transform2D&) = delete;
  Transform2D& operator=(const Transform2D&) = delete;

  std::span<std::complex<double>> data() {
    return {reinterpret_cast<std::complex<double>*>(buf_.get()), rows_ * cols_};
  }
  void execute() { fftw_execute(plan_); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::unique_ptr<fftw_complex, detail::FftwFree> buf_;
  fftw_plan plan_ = nullptr;
};

}  // namespace mdcs::fft
