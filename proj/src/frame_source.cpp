#include "sonomyo/frame_source.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <thread>

#include "sonomyo/error.hpp"
#include "sonomyo/png_io.hpp"

namespace sonomyo {

SyntheticFrameSource::SyntheticFrameSource(std::shared_ptr<const Phantom> phantom, ActivationFn activation, double rate,
                                           double start, std::optional<double> duration)
    : phantom_(std::move(phantom)), activation_(std::move(activation)), rate_(rate), start_(start), duration_(duration) {
  if (!phantom_) throw ConfigError("synthetic source needs a phantom");
  if (!(rate_ > 0.0)) throw ConfigError("frame rate must be positive");
}

double SyntheticFrameSource::next_timestamp() const { return start_ + static_cast<double>(index_) / rate_; }

std::optional<Frame> SyntheticFrameSource::next() {
  const double t = next_timestamp();
  if (duration_ && t >= start_ + *duration_) return std::nullopt;
  ++index_;
  return phantom_->render(activation_(t), t);
}

ManualFrameSource::ManualFrameSource(std::shared_ptr<const Phantom> phantom, double rate, double start)
    : inner_(std::move(phantom), [this](double) { return activation_.load(); }, rate, start) {}

void ManualFrameSource::set_activation(double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError("manual activation must lie in [0, 1], got " + std::to_string(value));
  }
  activation_.store(value);
}

FrameRecorder::FrameRecorder(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  index_.open(dir_ / "index.jsonl", std::ios::trunc);
  if (!index_) throw IoError("cannot create recording index in " + dir_.string());
}

void FrameRecorder::write(const Frame& frame) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%06zu.png", count_);
  write_png(dir_ / name, frame);
  index_ << nlohmann::json{{"t", frame.timestamp}, {"file", name}}.dump() << '\n';
  index_.flush();
  ++count_;
}

ReplayFrameSource::ReplayFrameSource(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::ifstream in(dir_ / "index.jsonl");
  if (!in) throw IoError("no recording index in " + dir_.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      entries_.push_back({j.at("t").get<double>(), j.at("file").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed recording index line: " + std::string(e.what()));
    }
  }
}

std::optional<Frame> ReplayFrameSource::next() {
  if (pos_ >= entries_.size()) return std::nullopt;
  const Entry& e = entries_[pos_++];
  Frame f = read_png(dir_ / e.file);
  f.timestamp = e.t;
  return f;
}

std::optional<Frame> CaptureStubSource::next() {
  throw IoError("capture device '" + device_ + "' is not available in this build");
}

std::optional<Frame> PacedFrameSource::next() {
  std::optional<Frame> f = inner_.next();
  if (!f) return f;
  const auto now = std::chrono::steady_clock::now();
  if (!wall_start_) {
    wall_start_ = now;
    stream_start_ = f->timestamp;
  } else {
    const auto due = *wall_start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(f->timestamp - stream_start_));
    if (due > now) std::this_thread::sleep_until(due);
  }
  released_at_ = std::chrono::steady_clock::now();
  return f;
}

}  // namespace sonomyo
