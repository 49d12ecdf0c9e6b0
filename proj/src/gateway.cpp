#include "sonomyo/gateway.hpp"

#include <chrono>
#include <cmath>

#include "sonomyo/analysis.hpp"
#include "sonomyo/simulation.hpp"

namespace sonomyo {

using nlohmann::json;

std::string_view to_string(StreamKind kind) {
  switch (kind) {
    case StreamKind::cursor: return "cursor";
    case StreamKind::target: return "target";
    case StreamKind::prompt: return "prompt";
    case StreamKind::trial_event: return "trial_event";
    case StreamKind::status: return "status";
  }
  return "status";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::idle: return "idle";
    case Phase::calibrating: return "calibrating";
    case Phase::running: return "running";
  }
  return "idle";
}

json StreamMessage::to_json() const {
  return {{"kind", std::string(sonomyo::to_string(kind))}, {"timestamp", timestamp}, {"payload", payload}};
}

void ClientQueue::push(StreamMessage message) {
  std::function<void()> notify;
  {
    std::lock_guard lock(mu_);
    const bool droppable = !message.reliable();
    if (droppable && droppable_ >= capacity_) {
      for (auto it = items_.begin(); it != items_.end(); ++it) {
        if (!it->reliable()) {
          items_.erase(it);
          --droppable_;
          ++dropped_;
          break;
        }
      }
    }
    if (droppable) ++droppable_;
    items_.push_back(std::move(message));
    notify = notify_;
  }
  cv_.notify_one();
  if (notify) notify();
}

std::optional<StreamMessage> ClientQueue::try_pop() {
  std::lock_guard lock(mu_);
  if (items_.empty()) return std::nullopt;
  StreamMessage m = std::move(items_.front());
  items_.pop_front();
  if (!m.reliable()) --droppable_;
  return m;
}

std::optional<StreamMessage> ClientQueue::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return !items_.empty(); })) return std::nullopt;
  StreamMessage m = std::move(items_.front());
  items_.pop_front();
  if (!m.reliable()) --droppable_;
  return m;
}

std::vector<StreamMessage> ClientQueue::drain() {
  std::lock_guard lock(mu_);
  std::vector<StreamMessage> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
  items_.clear();
  droppable_ = 0;
  return out;
}

void ClientQueue::set_notify(std::function<void()> notify) {
  std::lock_guard lock(mu_);
  notify_ = std::move(notify);
}

std::size_t ClientQueue::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

namespace {

// Owns a source and releases its frames in real time.
class OwnedPacedSource : public FrameSource {
 public:
  explicit OwnedPacedSource(std::unique_ptr<FrameSource> inner) : inner_(std::move(inner)), paced_(*inner_) {}
  std::optional<Frame> next() override { return paced_.next(); }
  std::string_view kind() const override { return inner_->kind(); }

 private:
  std::unique_ptr<FrameSource> inner_;
  PacedFrameSource paced_;
};

// Ends the stream when the stop flag goes up and remembers the last
// timestamp it passed on.
class StoppableSource : public FrameSource {
 public:
  StoppableSource(FrameSource& inner, const std::atomic<bool>& stop, std::atomic<double>& last)
      : inner_(inner), stop_(stop), last_(last) {}
  std::optional<Frame> next() override {
    if (stop_.load()) return std::nullopt;
    std::optional<Frame> f = inner_.next();
    if (f) last_ = f->timestamp;
    return f;
  }
  std::string_view kind() const override { return inner_.kind(); }

 private:
  FrameSource& inner_;
  const std::atomic<bool>& stop_;
  std::atomic<double>& last_;
};

// Forwards to a source owned elsewhere.
class BorrowedSource : public FrameSource {
 public:
  explicit BorrowedSource(FrameSource& inner) : inner_(inner) {}
  std::optional<Frame> next() override { return inner_.next(); }
  std::string_view kind() const override { return inner_.kind(); }

 private:
  FrameSource& inner_;
};

std::string prompt_text(const std::string& label) {
  if (label == kFlexPhase) return "Flex your wrist as far as you can and hold";
  if (label == kRestPhase) return "Relax your wrist and hold";
  return label;
}

double unix_now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

const json& payload_of(const json& command) {
  static const json empty = json::object();
  auto it = command.find("payload");
  if (it == command.end() || it->is_null()) return empty;
  if (!it->is_object()) throw CommandError("malformed", "payload must be an object");
  return *it;
}

}  // namespace

class SessionController::StreamObserver : public SessionObserver {
 public:
  explicit StreamObserver(SessionController& owner) : owner_(owner) {}

  void on_presented(std::size_t index, const Target& target, double t) override {
    owner_.broadcast({StreamKind::target, t,
                      {{"center", target.center},
                       {"half_width", target.half_width},
                       {"trial", index},
                       {"reset", target.is_reset()}}});
  }
  void on_frame(const FrameRecord& f) override {
    {
      std::lock_guard lock(owner_.state_mu_);
      owner_.trial_index_ = f.trial;
      owner_.bounds_ = f.bounds;
    }
    owner_.broadcast({StreamKind::cursor, f.timestamp,
                      {{"position", f.position}, {"s_norm", f.s_norm}, {"trial", f.trial}}});
  }
  void on_event(std::size_t index, const TrialEvent& e) override {
    owner_.broadcast({StreamKind::trial_event, e.timestamp,
                      {{"kind", std::string(to_string(e.kind))}, {"timestamp", e.timestamp}, {"trial", index}}});
  }
  void on_trial(std::size_t index, const TrialRecord& trial) override {
    if (!trial.aborted) return;
    const double t = trial.samples.empty() ? 0.0 : trial.samples.back().timestamp;
    owner_.broadcast({StreamKind::trial_event, t,
                      {{"kind", "aborted"}, {"timestamp", t}, {"trial", index}}});
  }

 private:
  SessionController& owner_;
};

SessionController::SessionController(SessionConfig config, ControllerOptions options)
    : config_(std::move(config)), options_(options) {
  config_.validate();
}

SessionController::~SessionController() {
  stop_ = true;
  join_lane();
}

void SessionController::broadcast(StreamMessage message) {
  std::lock_guard lock(clients_mu_);
  for (const auto& c : clients_) c->push(message);
}

std::shared_ptr<ClientQueue> SessionController::subscribe() {
  auto q = std::make_shared<ClientQueue>(options_.client_queue_capacity);
  q->push(status_message());
  std::lock_guard lock(clients_mu_);
  clients_.push_back(q);
  return q;
}

void SessionController::unsubscribe(const std::shared_ptr<ClientQueue>& client) {
  std::lock_guard lock(clients_mu_);
  std::erase(clients_, client);
}

json SessionController::status() const {
  std::lock_guard lock(state_mu_);
  json s{{"phase", std::string(to_string(phase_))},
         {"calibrated", db_.has_value()},
         {"source", config_.source.kind},
         {"profile", std::string(to_string(config_.source.profile))},
         {"sessions_run", sessions_run_},
         {"trial", trial_index_ ? json(*trial_index_) : json(nullptr)},
         {"last_error", last_error_ ? json(*last_error_) : json(nullptr)},
         {"log", logs_.empty() ? json(nullptr) : json(logs_.back().string())}};
  if (bounds_) s["bounds"] = {{"lower", bounds_->lower}, {"upper", bounds_->upper}};
  return s;
}

StreamMessage SessionController::status_message() const {
  static const auto origin = std::chrono::steady_clock::now();
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - origin).count();
  return {StreamKind::status, t, status()};
}

Phase SessionController::phase() const {
  std::lock_guard lock(state_mu_);
  return phase_;
}

void SessionController::wait_idle() {
  std::unique_lock lock(state_mu_);
  idle_cv_.wait(lock, [&] { return phase_ == Phase::idle && !announcing_; });
}

json SessionController::handle_text(const std::string& body) {
  json command;
  try {
    command = json::parse(body);
  } catch (const json::parse_error& e) {
    return {{"ok", false}, {"error", {{"code", "malformed"}, {"reason", std::string("invalid JSON: ") + e.what()}}}};
  }
  return handle(command);
}

json SessionController::handle(const json& command) {
  std::lock_guard lock(command_mu_);
  try {
    if (!command.is_object()) throw CommandError("malformed", "command must be a JSON object");
    auto kind_it = command.find("kind");
    if (kind_it == command.end() || !kind_it->is_string()) throw CommandError("malformed", "command needs a string 'kind'");
    const std::string kind = kind_it->get<std::string>();
    const json& payload = payload_of(command);
    json result;
    if (kind == "start_calibration") {
      result = start_calibration(payload);
    } else if (kind == "start_session") {
      result = start_session(payload);
    } else if (kind == "abort") {
      result = abort();
    } else if (kind == "set_source") {
      result = set_source(payload);
    } else if (kind == "get_status") {
      result = status();
    } else {
      throw CommandError("unknown_command", "unknown command kind '" + kind + "'");
    }
    return {{"ok", true}, {"status", result}};
  } catch (const CommandError& e) {
    return {{"ok", false}, {"error", {{"code", e.code()}, {"reason", e.what()}}}};
  } catch (const json::exception& e) {
    return {{"ok", false}, {"error", {{"code", "malformed"}, {"reason", e.what()}}}};
  } catch (const Error& e) {
    return {{"ok", false}, {"error", {{"code", "invalid_config"}, {"reason", e.what()}}}};
  }
}

void SessionController::set_activation(double value) {
  std::shared_ptr<ManualFrameSource> manual;
  {
    std::lock_guard lock(state_mu_);
    manual = manual_;
    if (config_.source.kind != "manual") {
      throw CommandError("wrong_source", "manual activation needs the manual source, current source is '" +
                                             config_.source.kind + "'");
    }
  }
  if (!(value >= 0.0 && value <= 1.0)) {
    throw CommandError("out_of_range", "activation must lie in [0, 1], got " + format_number(value));
  }
  if (!manual) throw CommandError("illegal_transition", "no calibration or session is running");
  manual->set_activation(value);
}

json SessionController::set_source(const json& payload) {
  if (phase() != Phase::idle) throw CommandError("illegal_transition", "set_source is only allowed while idle");
  SourceConfig next = config_.source;
  if (payload.contains("kind")) next.kind = payload.at("kind").get<std::string>();
  if (payload.contains("profile")) next.profile = parse_profile(payload.at("profile").get<std::string>());
  if (payload.contains("seed")) next.subject_seed = payload.at("seed").get<std::uint64_t>();
  if (payload.contains("path")) next.path = payload.at("path").get<std::string>();
  if (payload.contains("device")) next.device = payload.at("device").get<std::string>();
  if (payload.contains("rate")) next.rate = payload.at("rate").get<double>();
  if (payload.contains("phantom")) next.phantom = payload.at("phantom").get<PhantomParams>();
  SessionConfig candidate = config_;
  candidate.source = next;
  try {
    candidate.validate();
  } catch (const Error& e) {
    throw CommandError("invalid_config", e.what());
  }
  if (next.kind == "replay" && !std::filesystem::exists(std::filesystem::path(next.path) / "index.jsonl")) {
    throw CommandError("invalid_config", "no recording at '" + next.path + "'");
  }
  // References stay valid only while the phantom underneath is the same.
  const auto phantom_based = [](const SourceConfig& s) { return s.kind == "synthetic" || s.kind == "manual"; };
  const bool keep = phantom_based(config_.source) && phantom_based(next) && config_.source.phantom == next.phantom;
  std::lock_guard lock(state_mu_);
  config_ = candidate;
  if (!keep) db_.reset();
  manual_.reset();
  return json{{"phase", std::string(to_string(phase_))}, {"calibrated", db_.has_value()}, {"source", next.kind}};
}

std::unique_ptr<FrameSource> SessionController::make_source(bool for_calibration, std::uint64_t seed) {
  const SourceConfig& src = config_.source;
  std::unique_ptr<FrameSource> source;
  bool paced = options_.realtime;
  if (src.kind == "synthetic") {
    auto phantom = std::make_shared<const Phantom>(src.phantom);
    if (!for_calibration) throw Error("synthetic sessions use the virtual subject source");
    auto behaviour = std::make_shared<CalibrationBehaviour>(config_.calibration,
                                                            VirtualSubjectParams::for_profile(src.profile), seed);
    source = std::make_unique<SyntheticFrameSource>(
        phantom, [behaviour](double t) { return (*behaviour)(t); }, src.rate, next_start(), config_.calibration.end());
  } else if (src.kind == "manual") {
    auto phantom = std::make_shared<const Phantom>(src.phantom);
    auto manual = std::make_shared<ManualFrameSource>(phantom, src.rate, next_start());
    {
      std::lock_guard lock(state_mu_);
      manual_ = manual;
    }
    // The controller keeps the manual source alive for set_activation.
    struct Holder : FrameSource {
      std::shared_ptr<ManualFrameSource> m;
      std::optional<Frame> next() override { return m->next(); }
      std::string_view kind() const override { return "manual"; }
    };
    auto holder = std::make_unique<Holder>();
    holder->m = manual;
    source = std::move(holder);
    paced = true;
  } else if (src.kind == "replay") {
    source = std::make_unique<ReplayFrameSource>(src.path);
  } else {
    source = std::make_unique<CaptureStubSource>(src.device.empty() ? std::string("default") : src.device);
  }
  if (paced) source = std::make_unique<OwnedPacedSource>(std::move(source));
  return source;
}

// Synthetic stream time continues across jobs so that the cursor
// timestamps a subscriber sees never go backwards.
double SessionController::next_start() const {
  const double last = last_timestamp_.load();
  if (last < 0.0) return 0.0;
  const double rate = config_.source.rate;
  return static_cast<double>(std::llround(last * rate) + 1) / rate;
}

void SessionController::join_lane() {
  if (lane_.joinable()) lane_.join();
}

void SessionController::launch(std::function<void()> job) {
  join_lane();
  stop_ = false;
  lane_ = std::thread(std::move(job));
}

void SessionController::finish_job(const std::optional<std::string>& error) {
  {
    std::lock_guard lock(state_mu_);
    phase_ = Phase::idle;
    last_error_ = error;
    manual_.reset();
    announcing_ = true;
  }
  // wait_idle() returns only once subscribers hold the final status.
  broadcast(status_message());
  {
    std::lock_guard lock(state_mu_);
    announcing_ = false;
  }
  idle_cv_.notify_all();
}

json SessionController::start_calibration(const json& payload) {
  if (phase() != Phase::idle) throw CommandError("illegal_transition", "start_calibration is only allowed while idle");
  const std::uint64_t seed = payload.value("seed", config_.source.subject_seed);
  std::shared_ptr<FrameSource> source;
  try {
    source = make_source(true, seed);
  } catch (const Error& e) {
    throw CommandError("invalid_config", e.what());
  }
  {
    std::lock_guard lock(state_mu_);
    phase_ = Phase::calibrating;
    last_error_.reset();
    db_.reset();
    trial_index_.reset();
    bounds_.reset();
  }
  broadcast(status_message());
  launch([this, source] {
    std::optional<std::string> error;
    try {
      StoppableSource stoppable(*source, stop_, last_timestamp_);
      const auto on_prompt = [this](const PromptEntry& p, double t) {
        broadcast({StreamKind::prompt, t, {{"text", prompt_text(p.label)}, {"cue", p.label}, {"phase", p.label}}});
      };
      TrainingDatabase db =
          run_calibration(stoppable, config_.calibration, config_.pipeline.sigma, unix_now(), on_prompt);
      if (stop_) {
        error = "calibration aborted";
      } else {
        std::lock_guard lock(state_mu_);
        db_ = std::move(db);
      }
    } catch (const std::exception& e) {
      error = stop_ ? std::string("calibration aborted") : std::string(e.what());
    }
    finish_job(error);
  });
  return status();
}

json SessionController::start_session(const json& payload) {
  if (phase() != Phase::idle) throw CommandError("illegal_transition", "start_session is only allowed while idle");
  std::optional<TrainingDatabase> db;
  {
    std::lock_guard lock(state_mu_);
    db = db_;
  }
  if (!db) throw CommandError("illegal_transition", "start_session needs a completed calibration");

  const std::uint64_t seed = payload.value("seed", config_.task.seed);
  const SessionPlan plan = build_session_plan(seed, config_.task);
  std::filesystem::path log_path;
  if (payload.contains("log_path")) {
    log_path = payload.at("log_path").get<std::string>();
  } else {
    log_path = config_.data_dir() / ("session-" + std::to_string(static_cast<long long>(unix_now())) + "-" +
                                     std::to_string(sessions_run_ + 1) + ".jsonl");
  }

  SessionLog header;
  header.config = config_;
  header.plan = plan;
  header.metadata = {{"group", config_.source.kind == "synthetic" ? std::string(to_string(config_.source.profile))
                                                                  : std::string("operator")},
                     {"seed", seed},
                     {"source", config_.source.kind}};
  header.references = ReferenceSet::from(*db);

  std::shared_ptr<SessionLogWriter> writer;
  try {
    writer = std::make_shared<SessionLogWriter>(log_path, header);
  } catch (const Error& e) {
    throw CommandError("invalid_config", e.what());
  }

  std::shared_ptr<FrameSource> source;
  std::shared_ptr<VirtualSubject> subject;
  std::shared_ptr<SubjectFrameSource> subject_source;
  if (config_.source.kind == "synthetic") {
    auto phantom = std::make_shared<const Phantom>(config_.source.phantom);
    const VirtualSubjectParams params = VirtualSubjectParams::for_profile(config_.source.profile);
    subject = std::make_shared<VirtualSubject>(params, splitmix64(config_.source.subject_seed ^ seed),
                                               familiarize(*phantom, *db, config_), config_.task.onset_threshold);
    subject_source = std::make_shared<SubjectFrameSource>(phantom, *subject, config_.source.rate, next_start());
    if (options_.realtime) {
      source = std::make_shared<OwnedPacedSource>(std::make_unique<BorrowedSource>(*subject_source));
    } else {
      source = subject_source;
    }
  } else {
    try {
      source = make_source(false, seed);
    } catch (const Error& e) {
      throw CommandError("invalid_config", e.what());
    }
  }

  {
    std::lock_guard lock(state_mu_);
    phase_ = Phase::running;
    last_error_.reset();
    trial_index_.reset();
    bounds_.reset();
    ++sessions_run_;
    logs_.push_back(log_path);
  }
  broadcast(status_message());
  launch([this, db = std::move(*db), plan, writer, source, subject, subject_source] {
    std::optional<std::string> error;
    try {
      SessionRunner runner(db, config_, plan);
      LogWriterObserver log_observer(*writer);
      StreamObserver stream(*this);
      if (subject_source) runner.add_observer(subject_source.get());
      runner.add_observer(&log_observer);
      runner.add_observer(&stream);
      try {
        StoppableSource stoppable(*source, stop_, last_timestamp_);
        runner.run(stoppable, &stop_);
      } catch (...) {
        runner.abort();
        throw;
      }
      writer->finish();
    } catch (const std::exception& e) {
      error = e.what();
      try {
        writer->finish();
      } catch (const std::exception&) {
      }
    }
    finish_job(error);
  });
  return status();
}

json SessionController::abort() {
  if (phase() != Phase::idle) {
    stop_ = true;
    join_lane();
    stop_ = false;
  }
  return status();
}

}  // namespace sonomyo
