#include "adaproj/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

#include "adaproj/error.hpp"

namespace adaproj {
namespace {

// FFTW planning is not thread safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// Real-to-complex transform of a fixed length.
class RealFft {
 public:
  explicit RealFft(int n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n_, in_.get(), out_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_.get(); }

  // Magnitudes of bins 0 .. n/2.
  template <typename Out>
  void magnitudes(Out&& out) {
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k) out(k) = std::hypot(out_.get()[k][0], out_.get()[k][1]);
  }

 private:
  int n_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  fftw_plan plan_ = nullptr;
};

}  // namespace

Vector hann_window(int n) {
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

Matrix magnitude_spectrogram(const Waveform& w, int frame, int hop) {
  if (frame < 2 || hop < 1) throw Error(ErrorKind::ConfigInvalid, "frame must be >= 2 and hop >= 1");
  if (!(w.sample_rate > 0.0)) throw Error(ErrorKind::DataError, "sample rate must be positive");
  const auto len = static_cast<long>(w.samples.size());
  if (len < frame) throw Error(ErrorKind::TooShort, "waveform shorter than one frame");

  const long frames = (len - frame) / hop + 1;
  const Vector window = hann_window(frame);
  Matrix out(frames, frame / 2 + 1);
  RealFft fft(frame);
  for (long t = 0; t < frames; ++t) {
    const double* src = w.samples.data() + t * hop;
    for (int i = 0; i < frame; ++i) fft.input()[i] = src[i] * window(i);
    fft.magnitudes([&](int k) -> double& { return out(t, k); });
  }
  return out;
}

Vector temporal_mean(const Matrix& spectrogram) {
  if (spectrogram.rows() < 1) throw Error(ErrorKind::TooShort, "spectrogram has no frames");
  return spectrogram.colwise().mean().transpose();
}

Matrix subtract_temporal_mean(const Matrix& spectrogram) {
  return spectrogram.rowwise() - temporal_mean(spectrogram).transpose();
}

int spectrum_band_of_bin(int bin, int n_bins, int out_bins) {
  return static_cast<int>(static_cast<long long>(bin) * out_bins / n_bins);
}

Vector magnitude_spectrum(const Waveform& w, int out_bins) {
  if (out_bins < 1) throw Error(ErrorKind::ConfigInvalid, "spectrum needs at least one band");
  if (w.samples.empty()) throw Error(ErrorKind::TooShort, "empty waveform");
  const int n = static_cast<int>(w.samples.size());
  const int n_bins = n / 2 + 1;

  Vector full(n_bins);
  RealFft fft(n);
  std::copy(w.samples.begin(), w.samples.end(), fft.input());
  fft.magnitudes([&](int k) -> double& { return full(k); });

  Vector bands = Vector::Zero(out_bins);
  if (n_bins >= out_bins) {
    Vector counts = Vector::Zero(out_bins);
    for (int k = 0; k < n_bins; ++k) {
      const int b = spectrum_band_of_bin(k, n_bins, out_bins);
      bands(b) += full(k);
      counts(b) += 1.0;
    }
    bands.array() /= counts.array();
  } else {
    for (int b = 0; b < out_bins; ++b) {
      bands(b) = full(static_cast<int>(static_cast<long long>(b) * n_bins / out_bins));
    }
  }
  return bands;
}

Vector summarize_spectrogram(const Matrix& spectrogram) {
  const Eigen::Index bins = spectrogram.cols();
  Vector out(2 * bins);
  const Vector mean = temporal_mean(spectrogram);
  for (Eigen::Index f = 0; f < bins; ++f) {
    const auto column = spectrogram.col(f).array();
    out(f) = std::sqrt((column - mean(f)).square().mean());
    out(bins + f) = column.maxCoeff();
  }
  return out;
}

BranchInputs extract_branch_inputs(const Waveform& w, const FeatureParams& params) {
  const Matrix spec = subtract_temporal_mean(magnitude_spectrogram(w, params.frame, params.hop));
  return {summarize_spectrogram(spec), magnitude_spectrum(w, params.spectrum_bins)};
}

}  // namespace adaproj
