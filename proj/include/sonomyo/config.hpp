#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

#include "sonomyo/calibration.hpp"
#include "sonomyo/normalization.hpp"
#include "sonomyo/phantom.hpp"
#include "sonomyo/task_engine.hpp"
#include "sonomyo/virtual_subject.hpp"

namespace sonomyo {

inline constexpr const char* kDataDirEnv = "SONOMYO_DATA_DIR";
inline constexpr const char* kPortEnv = "SONOMYO_PORT";
inline constexpr int kDefaultPort = 8765;

struct PipelineConfig {
  double sigma = kDefaultSmoothingSigma;
  Orientation orientation = Orientation::inverted;

  bool operator==(const PipelineConfig&) const = default;
};

// kind: synthetic (virtual subject drives the phantom), manual (activation
// set by an operator), replay (recorded frames), capture_stub.
struct SourceConfig {
  std::string kind = "synthetic";
  double rate = 20.0;
  PhantomParams phantom;
  SubjectProfile profile = SubjectProfile::able_bodied;
  std::uint64_t subject_seed = 1;
  std::string path;    // replay recording directory
  std::string device;  // capture device name
  bool realtime = false;

  bool operator==(const SourceConfig&) const = default;
};

struct OutputConfig {
  std::string data_dir;  // empty: $SONOMYO_DATA_DIR or ./data
  std::string log_path;

  bool operator==(const OutputConfig&) const = default;
};

struct SessionConfig {
  PipelineConfig pipeline;
  BoundTrackerParams bounds;
  TaskConfig task;
  CalibrationPlan calibration;
  SourceConfig source;
  OutputConfig output;

  void validate() const;
  std::filesystem::path data_dir() const;

  static SessionConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const SessionConfig&) const = default;
};

void to_json(nlohmann::json& j, const PhantomParams& p);
void from_json(const nlohmann::json& j, PhantomParams& p);
void to_json(nlohmann::json& j, const VirtualSubjectParams& p);
void from_json(const nlohmann::json& j, VirtualSubjectParams& p);
void to_json(nlohmann::json& j, const SessionConfig& c);
void from_json(const nlohmann::json& j, SessionConfig& c);

}  // namespace sonomyo
