#include "fft_convolver.hpp"

#include <mutex>

#include "kacchain/error.hpp"

namespace kac {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void FftConvolver::plan() {
  if (n_ < 1) throw InvalidArgument("convolution length must be positive");
  const int nc = n_ / 2 + 1;
  real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n_));
  spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc));
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(n_, real_, spec_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(n_, spec_, real_, FFTW_ESTIMATE);
  }
  if (fwd_ == nullptr || inv_ == nullptr) throw NumericalError("FFTW planning failed");
}

FftConvolver::FftConvolver(const std::vector<double>& kernel)
    : n_(static_cast<int>(kernel.size())) {
  plan();
  const int nc = n_ / 2 + 1;
  for (int i = 0; i < n_; ++i) real_[i] = kernel[i];
  fftw_execute(fwd_);
  kernel_hat_.resize(nc);
  for (int m = 0; m < nc; ++m) {
    kernel_hat_[m] = std::complex<double>(spec_[m][0], spec_[m][1]) / static_cast<double>(n_);
  }
}

FftConvolver::FftConvolver(int n, const std::vector<double>& multiplier) : n_(n) {
  plan();
  const int nc = n_ / 2 + 1;
  if (static_cast<int>(multiplier.size()) != nc) {
    throw InvalidArgument("Fourier multiplier must cover modes 0..n/2");
  }
  kernel_hat_.resize(nc);
  for (int m = 0; m < nc; ++m) kernel_hat_[m] = multiplier[m] / static_cast<double>(n_);
}

FftConvolver::~FftConvolver() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(inv_);
  fftw_free(real_);
  fftw_free(spec_);
}

void FftConvolver::apply(const double* in, int in_stride, double* out, int out_stride) {
  for (int i = 0; i < n_; ++i) real_[i] = in[static_cast<std::size_t>(i) * in_stride];
  fftw_execute(fwd_);
  const int nc = n_ / 2 + 1;
  for (int m = 0; m < nc; ++m) {
    const std::complex<double> z =
        std::complex<double>(spec_[m][0], spec_[m][1]) * kernel_hat_[m];
    spec_[m][0] = z.real();
    spec_[m][1] = z.imag();
  }
  fftw_execute(inv_);
  for (int i = 0; i < n_; ++i) out[static_cast<std::size_t>(i) * out_stride] = real_[i];
}

}  // namespace kac
