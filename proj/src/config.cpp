#include "sonomyo/config.hpp"

#include <cstdlib>
#include <fstream>

#include "sonomyo/error.hpp"

namespace sonomyo {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->template get<T>();
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return empty;
  if (!it->is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return *it;
}

}  // namespace

void to_json(json& j, const PhantomParams& p) {
  j = json{{"width", p.width},
           {"height", p.height},
           {"texture_seed", p.texture_seed},
           {"max_shift", p.max_shift},
           {"max_compression", p.max_compression},
           {"noise_sigma", p.noise_sigma},
           {"correlation_length", p.correlation_length},
           {"mean_intensity", p.mean_intensity},
           {"contrast", p.contrast}};
}

void from_json(const json& j, PhantomParams& p) {
  read_opt(j, "width", p.width);
  read_opt(j, "height", p.height);
  read_opt(j, "texture_seed", p.texture_seed);
  read_opt(j, "max_shift", p.max_shift);
  read_opt(j, "max_compression", p.max_compression);
  read_opt(j, "noise_sigma", p.noise_sigma);
  read_opt(j, "correlation_length", p.correlation_length);
  read_opt(j, "mean_intensity", p.mean_intensity);
  read_opt(j, "contrast", p.contrast);
}

void to_json(json& j, const VirtualSubjectParams& p) {
  j = json{{"profile", to_string(p.profile)},
           {"reaction_mean", p.reaction_mean},
           {"reaction_sd", p.reaction_sd},
           {"movement_time_base", p.movement_time_base},
           {"movement_time_per_bit", p.movement_time_per_bit},
           {"tremor_sigma", p.tremor_sigma},
           {"tremor_time_constant", p.tremor_time_constant},
           {"submovement_gain", p.submovement_gain},
           {"peak_velocity_scale", p.peak_velocity_scale},
           {"endpoint_scatter", p.endpoint_scatter},
           {"correction_delay", p.correction_delay},
           {"correction_threshold", p.correction_threshold},
           {"correction_precision", p.correction_precision},
           {"capability", p.capability}};
}

void from_json(const json& j, VirtualSubjectParams& p) {
  if (auto it = j.find("profile"); it != j.end()) p = VirtualSubjectParams::for_profile(parse_profile(it->get<std::string>()));
  read_opt(j, "reaction_mean", p.reaction_mean);
  read_opt(j, "reaction_sd", p.reaction_sd);
  read_opt(j, "movement_time_base", p.movement_time_base);
  read_opt(j, "movement_time_per_bit", p.movement_time_per_bit);
  read_opt(j, "tremor_sigma", p.tremor_sigma);
  read_opt(j, "tremor_time_constant", p.tremor_time_constant);
  read_opt(j, "submovement_gain", p.submovement_gain);
  read_opt(j, "peak_velocity_scale", p.peak_velocity_scale);
  read_opt(j, "endpoint_scatter", p.endpoint_scatter);
  read_opt(j, "correction_delay", p.correction_delay);
  read_opt(j, "correction_threshold", p.correction_threshold);
  read_opt(j, "correction_precision", p.correction_precision);
  read_opt(j, "capability", p.capability);
}

void to_json(json& j, const SessionConfig& c) {
  json prompts = json::array();
  for (const auto& p : c.calibration.prompt_schedule) prompts.push_back({{"label", p.label}, {"start", p.start}});
  j = json{
      {"pipeline", {{"sigma", c.pipeline.sigma}, {"orientation", to_string(c.pipeline.orientation)}}},
      {"bounds",
       {{"window_seconds", c.bounds.window_seconds},
        {"nominal_rate", c.bounds.nominal_rate},
        {"shrink_rate", c.bounds.shrink_rate},
        {"margin", c.bounds.margin},
        {"frozen", c.bounds.frozen}}},
      {"task",
       {{"levels", c.task.levels},
        {"level_step", c.task.level_step},
        {"half_width", c.task.half_width},
        {"dwell_required", c.task.dwell_required},
        {"trial_timeout", c.task.trial_timeout},
        {"onset_threshold", c.task.onset_threshold},
        {"seed", c.task.seed}}},
      {"calibration",
       {{"flex_duration", c.calibration.flex_duration},
        {"rest_duration", c.calibration.rest_duration},
        {"prompt_schedule", prompts},
        {"guard_fraction", c.calibration.guard_fraction}}},
      {"source",
       {{"kind", c.source.kind},
        {"rate", c.source.rate},
        {"phantom", c.source.phantom},
        {"profile", to_string(c.source.profile)},
        {"subject_seed", c.source.subject_seed},
        {"path", c.source.path},
        {"device", c.source.device},
        {"realtime", c.source.realtime}}},
      {"output", {{"data_dir", c.output.data_dir}, {"log_path", c.output.log_path}}},
  };
}

void from_json(const json& j, SessionConfig& c) {
  if (!j.is_object()) throw ConfigError("session config must be a JSON object");
  try {
    const json& pl = section(j, "pipeline");
    read_opt(pl, "sigma", c.pipeline.sigma);
    if (auto it = pl.find("orientation"); it != pl.end()) c.pipeline.orientation = parse_orientation(it->get<std::string>());

    const json& b = section(j, "bounds");
    read_opt(b, "window_seconds", c.bounds.window_seconds);
    read_opt(b, "nominal_rate", c.bounds.nominal_rate);
    read_opt(b, "shrink_rate", c.bounds.shrink_rate);
    read_opt(b, "margin", c.bounds.margin);
    read_opt(b, "frozen", c.bounds.frozen);

    const json& t = section(j, "task");
    read_opt(t, "levels", c.task.levels);
    read_opt(t, "level_step", c.task.level_step);
    read_opt(t, "half_width", c.task.half_width);
    read_opt(t, "dwell_required", c.task.dwell_required);
    read_opt(t, "trial_timeout", c.task.trial_timeout);
    read_opt(t, "onset_threshold", c.task.onset_threshold);
    read_opt(t, "seed", c.task.seed);

    const json& cal = section(j, "calibration");
    const bool has_durations = cal.contains("flex_duration") || cal.contains("rest_duration");
    read_opt(cal, "flex_duration", c.calibration.flex_duration);
    read_opt(cal, "rest_duration", c.calibration.rest_duration);
    read_opt(cal, "guard_fraction", c.calibration.guard_fraction);
    if (auto it = cal.find("prompt_schedule"); it != cal.end()) {
      c.calibration.prompt_schedule.clear();
      for (const auto& p : *it) c.calibration.prompt_schedule.push_back({p.at("label").get<std::string>(), p.at("start").get<double>()});
    } else if (has_durations) {
      const double guard = c.calibration.guard_fraction;
      c.calibration = CalibrationPlan::standard(c.calibration.flex_duration, c.calibration.rest_duration);
      c.calibration.guard_fraction = guard;
    }

    const json& s = section(j, "source");
    read_opt(s, "kind", c.source.kind);
    read_opt(s, "rate", c.source.rate);
    read_opt(s, "phantom", c.source.phantom);
    if (auto it = s.find("profile"); it != s.end()) c.source.profile = parse_profile(it->get<std::string>());
    read_opt(s, "subject_seed", c.source.subject_seed);
    read_opt(s, "path", c.source.path);
    read_opt(s, "device", c.source.device);
    read_opt(s, "realtime", c.source.realtime);

    const json& o = section(j, "output");
    read_opt(o, "data_dir", c.output.data_dir);
    read_opt(o, "log_path", c.output.log_path);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid session config: ") + e.what());
  }
}

void SessionConfig::validate() const {
  if (!(pipeline.sigma > 0.0)) throw ConfigError("pipeline.sigma must be positive");
  bounds.validate();
  task.validate();
  calibration.validate();
  source.phantom.validate();
  if (!(source.rate > 0.0)) throw ConfigError("source.rate must be positive");
  static const char* kinds[] = {"synthetic", "manual", "replay", "capture_stub"};
  bool known = false;
  for (const char* k : kinds) known = known || source.kind == k;
  if (!known) throw ConfigError("unknown source kind '" + source.kind + "'");
  if (source.kind == "replay" && source.path.empty()) throw ConfigError("replay source needs source.path");
}

std::filesystem::path SessionConfig::data_dir() const {
  if (!output.data_dir.empty()) return output.data_dir;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
  return "data";
}

SessionConfig SessionConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  SessionConfig c = j.get<SessionConfig>();
  c.validate();
  return c;
}

void SessionConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << json(*this).dump(2) << '\n';
}

}  // namespace sonomyo
