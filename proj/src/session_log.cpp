#include "sonomyo/session_log.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "sonomyo/png_io.hpp"

namespace sonomyo {

using nlohmann::json;

namespace {

double finite(double v, const char* what) {
  if (!std::isfinite(v)) throw IoError(std::string("cannot log non-finite ") + what);
  return v;
}

json plan_to_json(const SessionPlan& plan) {
  json targets = json::array();
  for (const Target& t : plan.targets) targets.push_back({t.center, t.half_width});
  return {{"targets", targets},
          {"dwell_required", plan.dwell_required},
          {"trial_timeout", plan.trial_timeout},
          {"rng_seed", plan.rng_seed}};
}

SessionPlan plan_from_json(const json& j) {
  SessionPlan plan;
  for (const json& t : j.at("targets")) plan.targets.push_back({t.at(0).get<double>(), t.at(1).get<double>()});
  plan.dwell_required = j.at("dwell_required").get<double>();
  plan.trial_timeout = j.at("trial_timeout").get<double>();
  plan.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return plan;
}

}  // namespace

ReferenceSet ReferenceSet::from(const TrainingDatabase& db) {
  return {db.rest_frame, db.motion_frame, db.flex_window_frames, db.rest_window_frames, db.created_at, db.sigma};
}

TrainingDatabase ReferenceSet::database() const {
  return TrainingDatabase::from_frames(rest, motion, flex_window_frames, rest_window_frames, created_at, sigma);
}

json save_references(const std::filesystem::path& dir, const std::string& stem, const ReferenceSet& refs) {
  const std::string rest_file = stem + ".rest.png";
  const std::string motion_file = stem + ".motion.png";
  write_png(dir / rest_file, refs.rest);
  write_png(dir / motion_file, refs.motion);
  return {{"rest_file", rest_file},
          {"motion_file", motion_file},
          {"width", refs.rest.width},
          {"height", refs.rest.height},
          {"rest_timestamp", refs.rest.timestamp},
          {"motion_timestamp", refs.motion.timestamp},
          {"flex_window_frames", refs.flex_window_frames},
          {"rest_window_frames", refs.rest_window_frames},
          {"created_at", refs.created_at},
          {"sigma", refs.sigma}};
}

ReferenceSet load_references(const std::filesystem::path& dir, const json& manifest) {
  try {
    ReferenceSet refs;
    refs.rest = read_png(dir / manifest.at("rest_file").get<std::string>());
    refs.motion = read_png(dir / manifest.at("motion_file").get<std::string>());
    refs.rest.timestamp = manifest.at("rest_timestamp").get<double>();
    refs.motion.timestamp = manifest.at("motion_timestamp").get<double>();
    const int w = manifest.at("width").get<int>();
    const int h = manifest.at("height").get<int>();
    if (refs.rest.width != w || refs.rest.height != h || refs.motion.width != w || refs.motion.height != h) {
      throw IoError("reference images do not match the manifest dimensions");
    }
    refs.flex_window_frames = manifest.at("flex_window_frames").get<std::size_t>();
    refs.rest_window_frames = manifest.at("rest_window_frames").get<std::size_t>();
    refs.created_at = manifest.at("created_at").get<double>();
    refs.sigma = manifest.at("sigma").get<double>();
    return refs;
  } catch (const json::exception& e) {
    throw IoError(std::string("bad reference manifest: ") + e.what());
  }
}

void save_training_database(const std::filesystem::path& dir, const TrainingDatabase& db) {
  std::filesystem::create_directories(dir);
  json manifest = save_references(dir, "reference", ReferenceSet::from(db));
  manifest["version"] = kLogVersion;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

TrainingDatabase load_training_database(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no training database in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("bad manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("version", 0) != kLogVersion) {
    throw IncompatibleVersionError("training database version " + manifest.value("version", json()).dump() +
                                   " is not supported");
  }
  return load_references(dir, manifest).database();
}

json to_json(const TrialRecord& trial, std::size_t index) {
  json samples = json::array();
  for (const CursorSample& s : trial.samples) {
    samples.push_back({finite(s.timestamp, "timestamp"), finite(s.position, "position"), finite(s.s_norm, "s_norm")});
  }
  json events = json::array();
  for (const TrialEvent& e : trial.events) events.push_back({{"kind", std::string(to_string(e.kind))}, {"t", e.timestamp}});
  return {{"type", "trial"},
          {"index", index},
          {"target", {{"center", trial.target.center}, {"half_width", trial.target.half_width}}},
          {"succeeded", trial.succeeded},
          {"aborted", trial.aborted},
          {"samples", samples},
          {"events", events}};
}

TrialRecord trial_from_json(const json& j) {
  TrialRecord trial;
  trial.target.center = j.at("target").at("center").get<double>();
  trial.target.half_width = j.at("target").at("half_width").get<double>();
  trial.succeeded = j.at("succeeded").get<bool>();
  trial.aborted = j.at("aborted").get<bool>();
  for (const json& s : j.at("samples")) {
    trial.samples.push_back({s.at(1).get<double>(), s.at(2).get<double>(), s.at(0).get<double>()});
  }
  for (const json& e : j.at("events")) {
    trial.events.push_back({parse_event_kind(e.at("kind").get<std::string>()), e.at("t").get<double>()});
  }
  return trial;
}

json to_json(const FrameRecord& f) {
  return {{"type", "frame"},
          {"t", finite(f.timestamp, "timestamp")},
          {"s_raw", finite(f.s_raw, "s_raw")},
          {"c_rest", finite(f.c_rest, "c_rest")},
          {"c_motion", finite(f.c_motion, "c_motion")},
          {"lower", finite(f.bounds.lower, "lower bound")},
          {"upper", finite(f.bounds.upper, "upper bound")},
          {"s_norm", finite(f.s_norm, "s_norm")},
          {"position", finite(f.position, "position")},
          {"trial", f.trial}};
}

FrameRecord frame_from_json(const json& j) {
  FrameRecord f;
  f.timestamp = j.at("t").get<double>();
  f.s_raw = j.at("s_raw").get<double>();
  f.c_rest = j.at("c_rest").get<double>();
  f.c_motion = j.at("c_motion").get<double>();
  f.bounds.lower = j.at("lower").get<double>();
  f.bounds.upper = j.at("upper").get<double>();
  f.s_norm = j.at("s_norm").get<double>();
  f.position = j.at("position").get<double>();
  f.trial = j.at("trial").get<std::size_t>();
  return f;
}

SessionLogWriter::SessionLogWriter(const std::filesystem::path& path, const SessionLog& header) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  json references;
  if (header.references) {
    const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    references = save_references(dir, path.stem().string(), *header.references);
  }
  out_.open(path, std::ios::out | std::ios::trunc);
  if (!out_) throw IoError("cannot write session log " + path.string());
  write_line({{"type", "header"},
              {"version", header.version},
              {"config", header.config},
              {"plan", plan_to_json(header.plan)},
              {"metadata", header.metadata},
              {"references", references}});
}

SessionLogWriter::~SessionLogWriter() = default;

void SessionLogWriter::write_line(const json& j) {
  if (finished_) throw ProtocolError("session log already finished");
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("write to " + path_.string() + " failed");
}

void SessionLogWriter::write_frame(const FrameRecord& frame) { write_line(to_json(frame)); }

void SessionLogWriter::write_trial(std::size_t index, const TrialRecord& trial) { write_line(to_json(trial, index)); }

void SessionLogWriter::finish() {
  write_line({{"type", "end"}});
  finished_ = true;
  out_.close();
}

void write_log(const std::filesystem::path& path, const SessionLog& log) {
  SessionLogWriter writer(path, log);
  // Frames and trials are interleaved the way a live session writes them:
  // a trial record follows the frame that ended it.
  std::size_t next_trial = 0;
  for (const FrameRecord& f : log.frames) {
    while (next_trial < log.trials.size() && next_trial < f.trial) {
      writer.write_trial(next_trial, log.trials[next_trial]);
      ++next_trial;
    }
    writer.write_frame(f);
  }
  for (; next_trial < log.trials.size(); ++next_trial) writer.write_trial(next_trial, log.trials[next_trial]);
  if (log.complete) writer.finish();
}

SessionLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open session log " + path.string());

  SessionLog log;
  std::string line;
  if (!std::getline(in, line)) throw IoError("session log " + path.string() + " is empty");
  try {
    const json header = json::parse(line);
    if (header.value("type", "") != "header") throw IoError("session log " + path.string() + " has no header");
    log.version = header.at("version").get<int>();
    if (log.version != kLogVersion) {
      throw IncompatibleVersionError("session log version " + std::to_string(log.version) + " is not supported (expected " +
                                     std::to_string(kLogVersion) + ")");
    }
    log.config = header.at("config").get<SessionConfig>();
    log.plan = plan_from_json(header.at("plan"));
    log.metadata = header.value("metadata", json::object());
    if (const json& refs = header.at("references"); !refs.is_null()) {
      const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
      log.references = load_references(dir, refs);
    }
  } catch (const json::exception& e) {
    throw IoError("bad session log header in " + path.string() + ": " + e.what());
  }

  log.complete = false;
  std::string problem = "missing end record";
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "frame") {
        log.frames.push_back(frame_from_json(j));
      } else if (type == "trial") {
        if (j.at("index").get<std::size_t>() != log.trials.size()) throw IoError("trial records out of order");
        log.trials.push_back(trial_from_json(j));
      } else if (type == "end") {
        log.complete = true;
        break;
      } else {
        throw IoError("unknown record type '" + type + "'");
      }
    } catch (const std::exception& e) {
      problem = "damaged record at line " + std::to_string(line_no) + ": " + e.what();
      break;
    }
  }
  if (!log.complete) throw IncompleteLogError("session log " + path.string() + " is incomplete (" + problem + ")", log);
  return log;
}

std::vector<CursorSample> replay(const SessionLog& log) {
  std::vector<CursorSample> out;
  out.reserve(log.frames.size());
  for (const FrameRecord& f : log.frames) out.push_back(f.cursor());
  return out;
}

void replay(const SessionLog& log, const std::function<void(const CursorSample&)>& sink, bool realtime) {
  if (log.frames.empty()) return;
  const auto wall_start = std::chrono::steady_clock::now();
  const double t0 = log.frames.front().timestamp;
  for (const FrameRecord& f : log.frames) {
    if (realtime) {
      std::this_thread::sleep_until(wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                     std::chrono::duration<double>(f.timestamp - t0)));
    }
    sink(f.cursor());
  }
}

std::vector<TrialRecord> replay_trials(const SessionLog& log) {
  const std::vector<CursorSample> samples = replay(log);
  return run_plan(samples, log.plan, log.config.task.onset_threshold);
}

}  // namespace sonomyo
