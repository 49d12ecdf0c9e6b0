#include "sonomyo/phantom.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "sonomyo/error.hpp"
#include "sonomyo/random.hpp"

#include <boost/math/distributions/normal.hpp>

namespace sonomyo {

namespace {

// Standard normal quantiles at the midpoints of 2^16 equal-probability
// bins, rescaled to unit variance. Indexing it with 16 random bits gives a
// Gaussian variate without transcendental calls, four per engine draw.
const std::vector<double>& normal_table() {
  static const std::vector<double> table = [] {
    constexpr std::size_t n = 1u << 16;
    const boost::math::normal_distribution<double> unit;
    std::vector<double> q(n);
    double ss = 0.0;
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double v = boost::math::quantile(unit, (static_cast<double>(k) + 0.5) / n);
      q[k] = v;
      q[n - 1 - k] = -v;
      ss += 2.0 * v * v;
    }
    const double scale = 1.0 / std::sqrt(ss / n);
    for (double& v : q) v *= scale;
    return q;
  }();
  return table;
}

}  // namespace

void PhantomParams::validate() const {
  if (width < 3 || height < 3) throw ConfigError("phantom must be at least 3x3");
  if (!(max_shift >= 0.0) || !(max_shift < height / 4.0)) throw ConfigError("max_shift must lie in [0, height/4)");
  if (!(max_compression >= 0.0 && max_compression < 1.0)) throw ConfigError("max_compression must lie in [0, 1)");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
  if (!(correlation_length > 0.0)) throw ConfigError("correlation_length must be positive");
  if (!(contrast > 0.0)) throw ConfigError("contrast must be positive");
}

Phantom::Phantom(PhantomParams params) : params_(params) {
  params_.validate();
  const int w = params_.width;
  const int h = params_.height;
  pad_top_ = static_cast<int>(std::ceil(params_.max_shift + 0.5 * h * params_.max_compression)) + 2;
  const int rows = pad_top_ + h;

  Rng noise(splitmix64(params_.texture_seed));
  std::vector<double> field(static_cast<std::size_t>(rows) * w);
  const double phi = std::exp(-1.0 / params_.correlation_length);
  const double innovation = std::sqrt(1.0 - phi * phi);
  for (int x = 0; x < w; ++x) field[x] = noise.normal();
  for (int y = 1; y < rows; ++y) {
    const double* prev = field.data() + static_cast<std::size_t>(y - 1) * w;
    double* cur = field.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) cur[x] = phi * prev[x] + innovation * noise.normal();
  }

  // Lateral blur (wrap-around) gives the texture a fibrous look without
  // touching its vertical correlation structure.
  constexpr int radius = 6;
  constexpr double lateral_sigma = 2.0;
  std::vector<double> k(2 * radius + 1);
  double ksum = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    k[d + radius] = std::exp(-(d * d) / (2.0 * lateral_sigma * lateral_sigma));
    ksum += k[d + radius];
  }
  for (double& v : k) v /= ksum;

  texture_.assign(field.size(), 0.0);
  for (int y = 0; y < rows; ++y) {
    const double* in = field.data() + static_cast<std::size_t>(y) * w;
    double* out = texture_.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) acc += k[d + radius] * in[((x + d) % w + w) % w];
      out[x] = acc;
    }
  }

  double mean = 0.0;
  for (double v : texture_) mean += v;
  mean /= static_cast<double>(texture_.size());
  double var = 0.0;
  for (double v : texture_) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(texture_.size()));
  for (double& v : texture_) v = params_.mean_intensity + params_.contrast * (v - mean) / sd;
}

Frame Phantom::warp(double activation, double t, bool with_noise) const {
  if (!(activation >= 0.0 && activation <= 1.0)) {
    throw ConfigError("phantom activation must lie in [0, 1], got " + std::to_string(activation));
  }
  const int w = params_.width;
  const int h = params_.height;
  Frame frame{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h), t};
  const double half = 0.5 * h;
  const double stretch = 1.0 + activation * params_.max_compression;
  const double shift = activation * params_.max_shift;
  const int last_row = pad_top_ + h - 1;
  const double sigma = with_noise ? params_.noise_sigma : 0.0;
  Rng noise(splitmix64(params_.texture_seed ^ splitmix64(std::bit_cast<std::uint64_t>(t))));
  const std::vector<double>& gauss = normal_table();
  std::uint64_t bits = 0;
  int left = 0;

  for (int y = 0; y < h; ++y) {
    double src = y < half ? half - (half - y) * stretch : static_cast<double>(y);
    src = src - shift + pad_top_;
    const double fl = std::floor(src);
    const int r0 = std::clamp(static_cast<int>(fl), 0, last_row);
    const int r1 = std::min(r0 + 1, last_row);
    const double frac = src - fl;
    const double* a = texture_.data() + static_cast<std::size_t>(r0) * w;
    const double* b = texture_.data() + static_cast<std::size_t>(r1) * w;
    std::uint8_t* out = frame.pixels.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double v = frac == 0.0 ? a[x] : a[x] + frac * (b[x] - a[x]);
      // Noise goes in before quantization.
      if (sigma > 0.0) {
        if (left == 0) {
          bits = noise.bits();
          left = 4;
        }
        v += sigma * gauss[bits & 0xffff];
        bits >>= 16;
        --left;
      }
      out[x] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
  }
  return frame;
}

Frame Phantom::render_noise_free(double activation, double t) const { return warp(activation, t, false); }

Frame Phantom::render(double activation, double t) const { return warp(activation, t, true); }

Frame render_frame(double activation, const PhantomParams& params, double t) {
  return Phantom(params).render(activation, t);
}

}  // namespace sonomyo
