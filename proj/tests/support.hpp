#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sonomyo/frame.hpp"
#include "sonomyo/task_engine.hpp"

namespace sonomyo::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            (name + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Frame random_frame(int w, int h, std::mt19937_64& rng, double t = 0.0) {
  Frame f{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h), t};
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  return f;
}

inline Frame constant_frame(int w, int h, std::uint8_t v, double t = 0.0) {
  return Frame{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, v), t};
}

// Trial record from positions sampled at `dt`, events filled in by a
// TrialMachine so scripted trials look like real ones.
inline TrialRecord scripted_trial(const Target& target, const std::vector<double>& positions, double dt = 0.05,
                                  double dwell = 1.5, double timeout = 10.0) {
  TrialMachine machine(target, dwell, timeout);
  TrialRecord r;
  r.target = target;
  for (std::size_t i = 0; i < positions.size() && !machine.finished(); ++i) {
    const CursorSample s{positions[i], 1.0 - positions[i], static_cast<double>(i) * dt};
    r.samples.push_back(s);
    for (const TrialEvent& e : machine.step(s)) r.events.push_back(e);
  }
  r.succeeded = machine.succeeded();
  r.aborted = !machine.finished();
  return r;
}

}  // namespace sonomyo::test
