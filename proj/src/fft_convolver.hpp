#pragma once

#include <complex>
#include <vector>

#include <fftw3.h>

namespace kac {

// Circular convolution with a fixed real kernel on Z_n via FFTW.
class FftConvolver {
 public:
  FftConvolver(const std::vector<double>& kernel);
  // Real Fourier multiplier given for modes 0..n/2.
  FftConvolver(int n, const std::vector<double>& multiplier);
  ~FftConvolver();
  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;

  int size() const { return n_; }
  // out[i] = sum_m kernel[m] in[i - m mod n]; in/out are strided views.
  void apply(const double* in, int in_stride, double* out, int out_stride);

 private:
  void plan();

  int n_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan fwd_;
  fftw_plan inv_;
  std::vector<std::complex<double>> kernel_hat_;
};

}  // namespace kac
