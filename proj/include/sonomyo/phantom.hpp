#pragma once

#include <cstdint>
#include <vector>

#include "sonomyo/frame.hpp"

namespace sonomyo {

// Synthetic stand-in for the imaged forearm. The texture is a field whose
// columns are first-order autoregressive along depth, so its vertical
// autocorrelation decays as exp(-d / correlation_length). Contraction shifts
// the texture down and compresses the upper half, which makes correlation
// with the relaxed image fall smoothly as activation rises.
struct PhantomParams {
  int width = 363;
  int height = 660;
  std::uint64_t texture_seed = 1;
  double max_shift = 40.0;           // pixels at activation 1
  double max_compression = 0.15;     // upper-half compression at activation 1
  double noise_sigma = 2.0;          // per-frame Gaussian pixel noise
  double correlation_length = 40.0;  // vertical texture correlation, pixels
  double mean_intensity = 100.0;
  double contrast = 35.0;            // intensity standard deviation

  void validate() const;
  bool operator==(const PhantomParams&) const = default;
};

class Phantom {
 public:
  explicit Phantom(PhantomParams params);

  // Deterministic in (activation, t): pixel noise is seeded from the texture
  // seed and the bit pattern of t. Throws ConfigError for activation outside
  // [0, 1].
  Frame render(double activation, double t) const;
  Frame render_noise_free(double activation, double t = 0.0) const;

  // Activation 0 without noise.
  Frame base_frame() const { return render_noise_free(0.0); }
  const PhantomParams& params() const { return params_; }

 private:
  Frame warp(double activation, double t, bool with_noise) const;

  PhantomParams params_;
  int pad_top_ = 0;
  std::vector<double> texture_;  // (pad_top_ + height) x width
};

Frame render_frame(double activation, const PhantomParams& params, double t);

}  // namespace sonomyo
