#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include "sonomyo/analysis.hpp"
#include "sonomyo/calibration.hpp"
#include "sonomyo/config.hpp"
#include "sonomyo/gateway.hpp"
#include "sonomyo/gateway_server.hpp"
#include "sonomyo/session.hpp"
#include "sonomyo/session_log.hpp"
#include "sonomyo/simulation.hpp"

using namespace sonomyo;
namespace fs = std::filesystem;

namespace {

SessionConfig load_config(const std::string& path) {
  if (path.empty()) return SessionConfig{};
  return SessionConfig::load(path);
}

std::uint64_t parse_seed(const std::string& text) { return std::stoull(text, nullptr, 0); }

int cmd_calibrate(const std::string& config_path, const std::string& out, const std::string& profile,
                  std::uint64_t seed) {
  SessionConfig config = load_config(config_path);
  if (!profile.empty()) config.source.profile = parse_profile(profile);
  TrainingDatabase db = [&] {
    if (config.source.kind == "synthetic") {
      auto phantom = std::make_shared<const Phantom>(config.source.phantom);
      return calibrate_virtual_subject(phantom, VirtualSubjectParams::for_profile(config.source.profile),
                                       config.calibration, seed, config.source.rate, config.pipeline.sigma);
    }
    if (config.source.kind == "replay") {
      ReplayFrameSource source(config.source.path);
      return run_calibration(source, config.calibration, config.pipeline.sigma, 0.0,
                             [](const PromptEntry& p, double t) { std::cerr << t << "  prompt: " << p.label << '\n'; });
    }
    if (config.source.kind == "capture_stub") {
      CaptureStubSource source(config.source.device);
      return run_calibration(source, config.calibration, config.pipeline.sigma);
    }
    throw ConfigError("the manual source needs an operator; calibrate through `serve`");
  }();
  const fs::path dir = out.empty() ? config.data_dir() / "calibration" : fs::path(out);
  save_training_database(dir, db);
  std::cout << "references written to " << dir.string() << " (" << db.flex_window_frames << " flex, "
            << db.rest_window_frames << " rest frames)\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& refs_dir, const std::string& log_path,
            std::uint64_t seed, bool realtime) {
  SessionConfig config = load_config(config_path);
  const TrainingDatabase db = load_training_database(refs_dir);
  const SessionPlan plan = build_session_plan(seed, config.task);
  const fs::path path = log_path.empty() ? config.data_dir() / ("session-" + std::to_string(seed) + ".jsonl")
                                         : fs::path(log_path);
  SessionLog header;
  header.config = config;
  header.plan = plan;
  header.metadata = {{"group", std::string(to_string(config.source.profile))}, {"seed", seed}};
  header.references = ReferenceSet::from(db);
  SessionLogWriter writer(path, header);
  LogWriterObserver log_observer(writer);

  SessionRunner runner(db, config, plan);
  runner.add_observer(&log_observer);

  std::unique_ptr<FrameSource> source;
  std::unique_ptr<VirtualSubject> subject;
  std::shared_ptr<SubjectFrameSource> subject_source;
  if (config.source.kind == "synthetic") {
    auto phantom = std::make_shared<const Phantom>(config.source.phantom);
    subject = std::make_unique<VirtualSubject>(VirtualSubjectParams::for_profile(config.source.profile),
                                               splitmix64(config.source.subject_seed ^ seed),
                                               familiarize(*phantom, db, config), config.task.onset_threshold);
    subject_source = std::make_shared<SubjectFrameSource>(phantom, *subject, config.source.rate);
    runner.add_observer(subject_source.get());
  } else if (config.source.kind == "replay") {
    source = std::make_unique<ReplayFrameSource>(config.source.path);
  } else if (config.source.kind == "capture_stub") {
    source = std::make_unique<CaptureStubSource>(config.source.device);
  } else {
    throw ConfigError("the manual source needs an operator; run sessions through `serve`");
  }
  FrameSource& raw = subject_source ? static_cast<FrameSource&>(*subject_source) : *source;
  std::unique_ptr<PacedFrameSource> paced;
  if (realtime || config.source.realtime) paced = std::make_unique<PacedFrameSource>(raw);
  runner.run(paced ? static_cast<FrameSource&>(*paced) : raw);
  writer.finish();

  double rate = 0.0;
  try {
    rate = success_rate(runner.trials());
  } catch (const Error&) {
  }
  std::cout << "session log " << path.string() << ": " << runner.trials().size() << " trials, success rate " << rate
            << " %\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& profiles, std::uint64_t first_seed,
                 int sessions, int trials, const std::string& phantom_kind, const std::string& out) {
  SessionConfig config = load_config(config_path);
  std::vector<SubjectProfile> which;
  if (profiles == "both") {
    which = {SubjectProfile::able_bodied, SubjectProfile::sci};
  } else {
    which = {parse_profile(profiles)};
  }
  PhantomParams phantom = config.source.phantom;
  if (phantom_kind == "reduced") {
    phantom = reduced_phantom(phantom.texture_seed);
  } else if (phantom_kind != "full" && phantom_kind != "config") {
    throw ConfigError("--phantom must be reduced, full or config");
  }
  if (phantom_kind == "full") phantom = PhantomParams{};
  const fs::path dir = out.empty() ? config.data_dir() / "simulations" : fs::path(out);
  fs::create_directories(dir);

  for (SubjectProfile profile : which) {
    const VirtualSubjectParams params = VirtualSubjectParams::for_profile(profile);
    for (int i = 0; i < sessions; ++i) {
      const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
      SessionPlan plan = build_session_plan(seed, config.task);
      if (trials > 0 && static_cast<std::size_t>(2 * trials) < plan.targets.size()) plan.targets.resize(2 * trials);
      const SessionLog log = closed_loop_run(params, phantom, plan, config, seed);
      const fs::path path = dir / (std::string(to_string(profile)) + "-" + std::to_string(seed) + ".jsonl");
      write_log(path, log);
      std::cout << path.string() << "  success " << success_rate(log.trials) << " %\n";
    }
  }
  return 0;
}

int cmd_analyze(const std::vector<std::string>& inputs, const std::string& out, const std::string& fitts,
                double timeout) {
  std::vector<fs::path> files;
  for (const std::string& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in))
        if (e.path().extension() == ".jsonl") files.push_back(e.path());
    } else {
      files.emplace_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no session logs given");

  std::vector<SessionData> sessions;
  for (const fs::path& f : files) {
    try {
      sessions.push_back(session_data(read_log(f), f.stem().string()));
    } catch (const IncompleteLogError& e) {
      std::cerr << "warning: " << e.what() << "; using " << e.salvaged().trials.size() << " complete trials\n";
      sessions.push_back(session_data(e.salvaged(), f.stem().string()));
    }
  }

  const fs::path dir = out.empty() ? fs::path("analysis") : fs::path(out);
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "trials.csv");
    write_trial_csv(csv, trial_rows(sessions));
  }
  {
    std::ofstream js(dir / "summary.json");
    js << group_summary(sessions, parse_fitts_form(fitts), timeout).dump(2) << '\n';
  }
  {
    std::ofstream plot(dir / "trajectories.csv");
    write_plot_series(plot, mean_trajectories(sessions, timeout));
  }
  std::cout << "analyzed " << sessions.size() << " sessions into " << dir.string() << '\n';
  return 0;
}

GatewayServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& config_path, int port, const std::string& address, bool fast) {
  SessionConfig config = load_config(config_path);
  if (port < 0) {
    const char* env = std::getenv(kPortEnv);
    port = env && *env ? std::atoi(env) : kDefaultPort;
  }
  SessionController controller(config, ControllerOptions{!fast, 64});
  GatewayServer server(controller, ServerOptions{address, static_cast<unsigned short>(port)});
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << address << ":" << server.port() << " (WebSocket at /stream)" << std::endl;
  server.run();
  g_server = nullptr;
  controller.handle({{"kind", "abort"}});
  return 0;
}

int cmd_record(const std::string& config_path, const std::string& out, std::uint64_t seed, double extra) {
  SessionConfig config = load_config(config_path);
  auto phantom = std::make_shared<const Phantom>(config.source.phantom);
  auto behaviour = std::make_shared<CalibrationBehaviour>(
      config.calibration, VirtualSubjectParams::for_profile(config.source.profile), seed);
  const double calib_end = config.calibration.end();
  // Calibration protocol, then a slow sweep through the range.
  SyntheticFrameSource source(
      phantom,
      [behaviour, calib_end](double t) {
        if (t < calib_end) return (*behaviour)(t);
        return 0.5 - 0.5 * std::cos((t - calib_end) * 0.5);
      },
      config.source.rate, 0.0, calib_end + extra);
  FrameRecorder recorder(out);
  while (auto f = source.next()) recorder.write(*f);
  std::cout << recorder.count() << " frames written to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sonomyography cursor control: calibration, sessions, simulation, analysis and the live gateway"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "Session config (JSON)")->check(CLI::ExistingFile);

  auto* calibrate = app.add_subcommand("calibrate", "Record rest and flexion references");
  std::string calib_out;
  std::string calib_profile;
  std::string calib_seed = "1";
  calibrate->add_option("-o,--out", calib_out, "Directory for the training database");
  calibrate->add_option("--profile", calib_profile, "Virtual subject profile for the synthetic source");
  calibrate->add_option("--seed", calib_seed, "Seed of the virtual subject");

  auto* run = app.add_subcommand("run", "Run one target-achievement session");
  std::string run_refs;
  std::string run_log;
  std::string run_seed = "1";
  bool run_realtime = false;
  run->add_option("-r,--references", run_refs, "Training database directory")->required();
  run->add_option("-l,--log", run_log, "Session log path");
  run->add_option("--seed", run_seed, "Plan seed");
  run->add_flag("--realtime", run_realtime, "Release frames at their nominal rate");

  auto* simulate = app.add_subcommand("simulate", "Closed-loop sessions with virtual subjects");
  std::string sim_profile = "both";
  std::string sim_seed = "1";
  int sim_sessions = 1;
  int sim_trials = 0;
  std::string sim_phantom = "reduced";
  std::string sim_out;
  simulate->add_option("--profile", sim_profile, "able_bodied, sci or both")
      ->check(CLI::IsMember({"able_bodied", "sci", "both"}));
  simulate->add_option("--seed", sim_seed, "First seed");
  simulate->add_option("-n,--sessions", sim_sessions, "Sessions per profile")->check(CLI::PositiveNumber);
  simulate->add_option("--trials", sim_trials, "Targets per session (default: all levels)");
  simulate->add_option("--phantom", sim_phantom, "reduced, full or config")
      ->check(CLI::IsMember({"reduced", "full", "config"}));
  simulate->add_option("-o,--out", sim_out, "Output directory for session logs");

  auto* analyze = app.add_subcommand("analyze", "Metrics, statistics and plot series from session logs");
  std::vector<std::string> an_inputs;
  std::string an_out;
  std::string an_fitts = "ratio";
  double an_timeout = 10.0;
  analyze->add_option("logs", an_inputs, "Session logs or directories of logs")->required();
  analyze->add_option("-o,--out", an_out, "Output directory");
  analyze->add_option("--fitts", an_fitts, "Index of difficulty form")->check(CLI::IsMember({"ratio", "shannon"}));
  analyze->add_option("--timeout", an_timeout, "Trial timeout used for the trajectory grid");

  auto* serve = app.add_subcommand("serve", "HTTP control and WebSocket stream for the operator UI");
  int serve_port = -1;
  std::string serve_address = "127.0.0.1";
  bool serve_fast = false;
  serve->add_option("-p,--port", serve_port, std::string("Port (default $") + kPortEnv + " or " +
                                                 std::to_string(kDefaultPort) + ")");
  serve->add_option("--address", serve_address, "Listen address");
  serve->add_flag("--fast", serve_fast, "Process synthetic and replay frames as fast as possible");

  auto* record = app.add_subcommand("record", "Write a synthetic frame recording for the replay source");
  std::string rec_out;
  std::string rec_seed = "1";
  double rec_extra = 30.0;
  record->add_option("-o,--out", rec_out, "Recording directory")->required();
  record->add_option("--seed", rec_seed, "Seed of the virtual subject");
  record->add_option("--extra", rec_extra, "Seconds of sweep after the calibration protocol");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*calibrate) return cmd_calibrate(config_path, calib_out, calib_profile, parse_seed(calib_seed));
    if (*run) return cmd_run(config_path, run_refs, run_log, parse_seed(run_seed), run_realtime);
    if (*simulate) {
      return cmd_simulate(config_path, sim_profile, parse_seed(sim_seed), sim_sessions, sim_trials, sim_phantom,
                          sim_out);
    }
    if (*analyze) return cmd_analyze(an_inputs, an_out, an_fitts, an_timeout);
    if (*serve) return cmd_serve(config_path, serve_port, serve_address, serve_fast);
    if (*record) return cmd_record(config_path, rec_out, parse_seed(rec_seed), rec_extra);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
