#pragma once

#include <filesystem>
#include <vector>

#include "adaproj/geometry.hpp"

namespace adaproj {

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;
};

struct FeatureParams {
  int frame = 1024;
  int hop = 512;
  int spectrum_bins = 4096;
  double sample_rate = 16000.0;
};

/// The two views the embedding model consumes, already flattened to vectors.
struct BranchInputs {
  Vector spectrogram;  // per-bin statistics of the mean-free spectrogram
  Vector spectrum;     // band-averaged full-length magnitude spectrum
};

/// |DFT| of Hann-windowed frames. Rows are frames, columns are the
/// frame / 2 + 1 one-sided bins. T = floor((len - frame) / hop) + 1.
/// Throws TooShort when the waveform is shorter than one frame.
Matrix magnitude_spectrogram(const Waveform& w, int frame, int hop);

/// Periodic Hann window of length n.
Vector hann_window(int n);

/// Per-bin mean over time (one entry per column).
Vector temporal_mean(const Matrix& spectrogram);

/// Removes the per-bin temporal mean, so every column averages to zero.
Matrix subtract_temporal_mean(const Matrix& spectrogram);

/// Magnitude of the full-length DFT averaged into `out_bins` contiguous bands.
/// When there are fewer DFT bins than bands each band takes its nearest bin.
Vector magnitude_spectrum(const Waveform& w, int out_bins);

/// Band holding DFT bin `bin` out of `n_bins` when reduced to `out_bins` bands.
int spectrum_band_of_bin(int bin, int n_bins, int out_bins);

/// Clip-level summary of a (mean-free) spectrogram for the MLP branch:
/// per-bin standard deviation over time followed by per-bin maximum.
Vector summarize_spectrogram(const Matrix& spectrogram);

/// Spectrogram -> mean removal -> summary, plus the band-averaged spectrum.
BranchInputs extract_branch_inputs(const Waveform& w, const FeatureParams& params);

/// Single-channel RIFF/WAVE PCM-16. Samples are scaled to [-1, 1).
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace adaproj
