#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sonomyo/frame.hpp"
#include "sonomyo/phantom.hpp"

namespace sonomyo {

inline constexpr double kNominalFrameRate = 20.0;

// Pull-based stream of frames with strictly increasing timestamps.
// std::nullopt marks the end of the stream.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<Frame> next() = 0;
  virtual std::string_view kind() const = 0;
};

// Phantom frames at a fixed rate; the activation for each frame comes from a
// callback evaluated at the frame timestamp. Timestamps are start + k / rate.
class SyntheticFrameSource : public FrameSource {
 public:
  using ActivationFn = std::function<double(double t)>;

  SyntheticFrameSource(std::shared_ptr<const Phantom> phantom, ActivationFn activation,
                       double rate = kNominalFrameRate, double start = 0.0,
                       std::optional<double> duration = std::nullopt);

  std::optional<Frame> next() override;
  std::string_view kind() const override { return "synthetic"; }

  double rate() const { return rate_; }
  double next_timestamp() const;
  const Phantom& phantom() const { return *phantom_; }

 private:
  std::shared_ptr<const Phantom> phantom_;
  ActivationFn activation_;
  double rate_;
  double start_;
  std::optional<double> duration_;
  long index_ = 0;
};

// Synthetic source whose activation is set from outside (a UI slider, keys,
// a test script). Safe to set from another thread.
class ManualFrameSource : public FrameSource {
 public:
  ManualFrameSource(std::shared_ptr<const Phantom> phantom, double rate = kNominalFrameRate, double start = 0.0);

  // Throws ConfigError for values outside [0, 1].
  void set_activation(double value);
  double activation() const { return activation_.load(); }

  std::optional<Frame> next() override { return inner_.next(); }
  std::string_view kind() const override { return "manual"; }

 private:
  std::atomic<double> activation_{0.0};
  SyntheticFrameSource inner_;
};

// Recording layout: a directory with index.jsonl (one {"t":..,"file":..}
// object per line) and one grayscale PNG per frame.
class FrameRecorder {
 public:
  explicit FrameRecorder(std::filesystem::path dir);
  void write(const Frame& frame);
  std::size_t count() const { return count_; }

 private:
  std::filesystem::path dir_;
  std::ofstream index_;
  std::size_t count_ = 0;
};

class ReplayFrameSource : public FrameSource {
 public:
  explicit ReplayFrameSource(std::filesystem::path dir);
  std::optional<Frame> next() override;
  std::string_view kind() const override { return "replay"; }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    double t;
    std::string file;
  };
  std::filesystem::path dir_;
  std::vector<Entry> entries_;
  std::size_t pos_ = 0;
};

// Placeholder for a video-capture device. Hardware capture is not part of
// this build; next() always throws IoError naming the device.
class CaptureStubSource : public FrameSource {
 public:
  explicit CaptureStubSource(std::string device) : device_(std::move(device)) {}
  std::optional<Frame> next() override;
  std::string_view kind() const override { return "capture_stub"; }

 private:
  std::string device_;
};

// Releases frames no earlier than their timestamp relative to the first
// frame, measured on the steady clock.
class PacedFrameSource : public FrameSource {
 public:
  explicit PacedFrameSource(FrameSource& inner) : inner_(inner) {}
  std::optional<Frame> next() override;
  std::string_view kind() const override { return inner_.kind(); }

  // Wall-clock time at which the most recent frame was released.
  std::chrono::steady_clock::time_point released_at() const { return released_at_; }

 private:
  FrameSource& inner_;
  std::optional<std::chrono::steady_clock::time_point> wall_start_;
  double stream_start_ = 0.0;
  std::chrono::steady_clock::time_point released_at_{};
};

}  // namespace sonomyo
