#include "sonomyo/frame_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sonomyo/error.hpp"

namespace sonomyo {

void validate(const Frame& frame) {
  if (frame.width < 3 || frame.height < 3) {
    throw InvalidFrameError("frame must be at least 3x3, got " + std::to_string(frame.width) + "x" +
                            std::to_string(frame.height));
  }
  if (frame.pixels.size() != frame.size()) {
    throw InvalidFrameError("pixel buffer length " + std::to_string(frame.pixels.size()) +
                            " does not match " + std::to_string(frame.width) + "x" +
                            std::to_string(frame.height));
  }
}

namespace {

std::array<double, 3> kernel1d(double sigma) {
  // exp(-(d^2)/(2 sigma^2)) for d = -1, 0, 1; the 2-D kernel is the outer
  // product of this with itself.
  const double side = std::exp(-1.0 / (2.0 * sigma * sigma));
  const double norm = 1.0 + 2.0 * side;
  return {side / norm, 1.0 / norm, side / norm};
}

// Summed relative to the first value so a flat image has exactly zero
// deviations; a plain sum/n can miss the constant by an ulp.
double mean_of(std::span<const double> v) {
  const double origin = v.front();
  double sum = 0.0;
  for (double x : v) sum += x - origin;
  return origin + sum / static_cast<double>(v.size());
}

double clamp_unit(double r) { return std::clamp(r, -1.0, 1.0); }

}  // namespace

std::array<double, 9> gaussian_kernel3x3(double sigma) {
  if (!(sigma > 0.0)) throw InvalidFrameError("smoothing sigma must be positive");
  const auto k = kernel1d(sigma);
  std::array<double, 9> out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = k[r] * k[c];
  return out;
}

FilteredFrame gaussian_smooth(const Frame& frame, double sigma) {
  validate(frame);
  if (!(sigma > 0.0)) throw InvalidFrameError("smoothing sigma must be positive");
  const auto k = kernel1d(sigma);
  const int w = frame.width;
  const int h = frame.height;

  std::vector<double> tmp(frame.size());
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = frame.pixels.data() + static_cast<std::size_t>(y) * w;
    double* out = tmp.data() + static_cast<std::size_t>(y) * w;
    out[0] = k[0] * row[0] + k[1] * row[0] + k[2] * row[1];
    for (int x = 1; x < w - 1; ++x) out[x] = k[0] * row[x - 1] + k[1] * row[x] + k[2] * row[x + 1];
    out[w - 1] = k[0] * row[w - 2] + k[1] * row[w - 1] + k[2] * row[w - 1];
  }

  FilteredFrame result{w, h, std::vector<double>(frame.size()), frame.timestamp};
  for (int y = 0; y < h; ++y) {
    const double* up = tmp.data() + static_cast<std::size_t>(std::max(y - 1, 0)) * w;
    const double* mid = tmp.data() + static_cast<std::size_t>(y) * w;
    const double* down = tmp.data() + static_cast<std::size_t>(std::min(y + 1, h - 1)) * w;
    double* out = result.values.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) out[x] = k[0] * up[x] + k[1] * mid[x] + k[2] * down[x];
  }
  return result;
}

double pearson2d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidFrameError("pearson2d: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + " pixels)");
  }
  if (a.empty()) throw InvalidFrameError("pearson2d: empty images");
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 && sbb == 0.0) throw DegenerateCorrelationError("pearson2d: both images are constant");
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return clamp_unit(sab / std::sqrt(saa * sbb));
}

double pearson2d(const FilteredFrame& a, const FilteredFrame& b) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidFrameError("pearson2d: dimension mismatch " + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                            std::to_string(b.height));
  }
  return pearson2d(std::span<const double>(a.values), std::span<const double>(b.values));
}

ReferencePair::ReferencePair(FilteredFrame rest, FilteredFrame motion)
    : rest_(std::move(rest)), motion_(std::move(motion)) {
  if (rest_.width != motion_.width || rest_.height != motion_.height) {
    throw InvalidFrameError("reference images differ in size");
  }
  if (rest_.values.size() != rest_.size() || motion_.values.size() != motion_.size() || rest_.size() == 0) {
    throw InvalidFrameError("reference image buffers are malformed");
  }
  if (pearson2d(rest_, motion_) >= 1.0) {
    throw IndistinguishableReferencesError("rest and motion references are perfectly correlated");
  }
  const auto centre = [](const std::vector<double>& v, std::vector<double>& dev, double& ss) {
    const double m = mean_of(v);
    dev.resize(v.size());
    ss = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      dev[i] = v[i] - m;
      ss += dev[i] * dev[i];
    }
  };
  centre(rest_.values, rest_dev_, rest_ss_);
  centre(motion_.values, motion_dev_, motion_ss_);
}

Correlations ReferencePair::correlate(const FilteredFrame& frame) const {
  if (frame.width != rest_.width || frame.height != rest_.height) {
    throw InvalidFrameError("frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                            " does not match references " + std::to_string(rest_.width) + "x" +
                            std::to_string(rest_.height));
  }
  const double m = mean_of(frame.values);
  double sr = 0.0;
  double sm = 0.0;
  double ss = 0.0;
  const std::size_t n = frame.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = frame.values[i] - m;
    sr += d * rest_dev_[i];
    sm += d * motion_dev_[i];
    ss += d * d;
  }
  const auto finish = [ss](double cross, double ref_ss) {
    if (ss == 0.0 && ref_ss == 0.0) throw DegenerateCorrelationError("frame and reference are both constant");
    if (ss == 0.0 || ref_ss == 0.0) return 0.0;
    return clamp_unit(cross / std::sqrt(ss * ref_ss));
  };
  return {finish(sr, rest_ss_), finish(sm, motion_ss_)};
}

double sonomyography_signal(double c_rest, double c_motion) {
  const double num = 1.0 - c_motion;
  const double den = num + (1.0 - c_rest);
  if (den == 0.0) throw DegenerateSignalError("frame is identical to both references");
  return num / den;
}

SonomyoSample compute_signal(const FilteredFrame& frame, const ReferencePair& refs) {
  const Correlations c = refs.correlate(frame);
  return {sonomyography_signal(c.rest, c.motion), c.rest, c.motion, frame.timestamp};
}

SignalPipeline::SignalPipeline(ReferencePair refs, double sigma) : refs_(std::move(refs)), sigma_(sigma) {}

SonomyoSample SignalPipeline::process(const Frame& frame) {
  if (last_timestamp_ && !(frame.timestamp > *last_timestamp_)) {
    throw InvalidFrameError("frame timestamps must strictly increase");
  }
  const FilteredFrame smoothed = gaussian_smooth(frame, sigma_);
  SonomyoSample sample;
  try {
    sample = compute_signal(smoothed, refs_);
  } catch (const DegenerateSignalError&) {
    if (!last_) throw;
    sample = *last_;
    sample.timestamp = frame.timestamp;
    ++held_;
  } catch (const DegenerateCorrelationError&) {
    if (!last_) throw;
    sample = *last_;
    sample.timestamp = frame.timestamp;
    ++held_;
  }
  last_timestamp_ = frame.timestamp;
  last_ = sample;
  return sample;
}

}  // namespace sonomyo
