#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sonomyo/calibration.hpp"
#include "sonomyo/config.hpp"
#include "sonomyo/error.hpp"
#include "sonomyo/normalization.hpp"
#include "sonomyo/task_engine.hpp"

namespace sonomyo {

inline constexpr int kLogVersion = 1;

// Stored calibration: the two raw frames plus enough metadata to rebuild
// the smoothed references exactly.
struct ReferenceSet {
  Frame rest;
  Frame motion;
  std::size_t flex_window_frames = 0;
  std::size_t rest_window_frames = 0;
  double created_at = 0.0;
  double sigma = kDefaultSmoothingSigma;

  static ReferenceSet from(const TrainingDatabase& db);
  TrainingDatabase database() const;

  bool operator==(const ReferenceSet&) const = default;
};

// Writes <stem>.rest.png and <stem>.motion.png into `dir` and returns the
// manifest naming them.
nlohmann::json save_references(const std::filesystem::path& dir, const std::string& stem, const ReferenceSet& refs);
ReferenceSet load_references(const std::filesystem::path& dir, const nlohmann::json& manifest);

// Stand-alone training database: manifest.json with rest.png and motion.png.
void save_training_database(const std::filesystem::path& dir, const TrainingDatabase& db);
TrainingDatabase load_training_database(const std::filesystem::path& dir);

struct FrameRecord {
  double timestamp = 0.0;
  double s_raw = 0.0;
  double c_rest = 0.0;
  double c_motion = 0.0;
  Bounds bounds;
  double s_norm = 0.0;
  double position = 0.0;
  std::size_t trial = 0;  // index into the plan's targets

  CursorSample cursor() const { return {position, s_norm, timestamp}; }
  bool operator==(const FrameRecord&) const = default;
};

struct SessionLog {
  int version = kLogVersion;
  SessionConfig config;
  SessionPlan plan;
  nlohmann::json metadata = nlohmann::json::object();
  std::optional<ReferenceSet> references;
  std::vector<FrameRecord> frames;
  std::vector<TrialRecord> trials;  // in plan order
  bool complete = true;             // the end record was present

  bool operator==(const SessionLog&) const = default;
};

class IncompleteLogError : public IoError {
 public:
  IncompleteLogError(const std::string& what, SessionLog salvaged) : IoError(what), salvaged_(std::move(salvaged)) {}
  // Every record read before the damage; trials are the complete ones.
  const SessionLog& salvaged() const { return salvaged_; }

 private:
  SessionLog salvaged_;
};

nlohmann::json to_json(const TrialRecord& trial, std::size_t index);
TrialRecord trial_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FrameRecord& frame);
FrameRecord frame_from_json(const nlohmann::json& j);

// Append-only JSON Lines writer. The header goes out on construction and
// every record is flushed as it is written, so a crash loses at most the
// record in flight. Reference images land next to the log as PNG sidecars.
class SessionLogWriter {
 public:
  SessionLogWriter(const std::filesystem::path& path, const SessionLog& header);
  ~SessionLogWriter();

  void write_frame(const FrameRecord& frame);
  void write_trial(std::size_t index, const TrialRecord& trial);
  void finish();

  const std::filesystem::path& path() const { return path_; }

 private:
  void write_line(const nlohmann::json& j);

  std::filesystem::path path_;
  std::ofstream out_;
  bool finished_ = false;
};

void write_log(const std::filesystem::path& path, const SessionLog& log);

// Throws IncompatibleVersionError on a schema mismatch and
// IncompleteLogError when the file is truncated or lacks its end record.
SessionLog read_log(const std::filesystem::path& path);

// Recorded cursor samples, in order.
std::vector<CursorSample> replay(const SessionLog& log);

// Emits the recorded samples; with `realtime` set, each sample is released
// at its original offset from the first one.
void replay(const SessionLog& log, const std::function<void(const CursorSample&)>& sink, bool realtime = false);

// Trial timeline obtained by running the logged plan over the replayed
// stream.
std::vector<TrialRecord> replay_trials(const SessionLog& log);

}  // namespace sonomyo
