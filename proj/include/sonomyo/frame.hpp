#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sonomyo {

// Raw 8-bit grayscale image as delivered by a frame source. Pixels are
// row-major, timestamp is seconds since session start.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  double timestamp = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const Frame&) const = default;
};

// Real-valued image, the output of smoothing. Kept at full precision so that
// correlations are not affected by re-quantization.
struct FilteredFrame {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double timestamp = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const FilteredFrame&) const = default;
};

// Throws InvalidFrameError unless pixel count matches and both sides are >= 3.
void validate(const Frame& frame);

}  // namespace sonomyo
