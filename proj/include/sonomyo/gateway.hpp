#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sonomyo/calibration.hpp"
#include "sonomyo/config.hpp"
#include "sonomyo/frame_source.hpp"
#include "sonomyo/session.hpp"

namespace sonomyo {

enum class StreamKind { cursor, target, prompt, trial_event, status };

std::string_view to_string(StreamKind kind);

struct StreamMessage {
  StreamKind kind = StreamKind::status;
  double timestamp = 0.0;
  nlohmann::json payload = nlohmann::json::object();

  // cursor and target refreshes may be dropped; the rest may not.
  bool reliable() const { return kind != StreamKind::cursor && kind != StreamKind::target; }
  nlohmann::json to_json() const;
};

// Per-subscriber outbox. Pushing never blocks: when more than `capacity`
// droppable messages are waiting, the oldest droppable one is discarded.
// Reliable messages are always kept.
class ClientQueue {
 public:
  explicit ClientQueue(std::size_t capacity = 64) : capacity_(capacity) {}

  void push(StreamMessage message);
  std::optional<StreamMessage> try_pop();
  // Waits up to `timeout` for a message.
  std::optional<StreamMessage> pop(std::chrono::milliseconds timeout);
  std::vector<StreamMessage> drain();

  // Called after every push, from the pushing thread.
  void set_notify(std::function<void()> notify);

  std::size_t size() const;
  std::size_t dropped() const { return dropped_.load(); }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<StreamMessage> items_;
  std::size_t droppable_ = 0;
  std::atomic<std::size_t> dropped_{0};
  std::function<void()> notify_;
};

enum class Phase { idle, calibrating, running };

std::string_view to_string(Phase phase);

struct ControllerOptions {
  // Pace synthetic and replay sources at their frame rate. Manual sources
  // are always paced.
  bool realtime = true;
  std::size_t client_queue_capacity = 64;
};

// Error raised for a command the controller refuses. `code` is one of
// malformed, unknown_command, illegal_transition, wrong_source,
// out_of_range, invalid_config.
class CommandError : public Error {
 public:
  CommandError(std::string code, const std::string& reason) : Error(reason), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// One session at a time. Commands are handled strictly in arrival order;
// calibration and sessions run on a processing lane thread that only ever
// hands messages to non-blocking client queues.
class SessionController {
 public:
  explicit SessionController(SessionConfig config, ControllerOptions options = {});
  ~SessionController();

  SessionController(const SessionController&) = delete;
  SessionController& operator=(const SessionController&) = delete;

  // ControlCommand {"kind": ..., "payload": {...}}. Returns
  // {"ok": true, "status": ...} or {"ok": false, "error": {"code", "reason"}}.
  nlohmann::json handle(const nlohmann::json& command);
  nlohmann::json handle_text(const std::string& body);

  // Manual activation input. Throws CommandError.
  void set_activation(double value);

  nlohmann::json status() const;
  Phase phase() const;

  std::shared_ptr<ClientQueue> subscribe();
  void unsubscribe(const std::shared_ptr<ClientQueue>& client);

  // Blocks until the processing lane is idle.
  void wait_idle();

  const std::vector<std::filesystem::path>& logs() const { return logs_; }

 private:
  class StreamObserver;

  nlohmann::json start_calibration(const nlohmann::json& payload);
  nlohmann::json start_session(const nlohmann::json& payload);
  nlohmann::json set_source(const nlohmann::json& payload);
  nlohmann::json abort();

  std::unique_ptr<FrameSource> make_source(bool for_calibration, std::uint64_t seed);
  void launch(std::function<void()> job);
  void join_lane();
  double next_start() const;
  void finish_job(const std::optional<std::string>& error);
  void broadcast(StreamMessage message);
  StreamMessage status_message() const;

  SessionConfig config_;
  ControllerOptions options_;

  std::mutex command_mu_;  // serializes commands
  mutable std::mutex state_mu_;
  Phase phase_ = Phase::idle;
  bool announcing_ = false;
  std::optional<TrainingDatabase> db_;
  std::optional<std::string> last_error_;
  std::optional<std::size_t> trial_index_;
  std::optional<Bounds> bounds_;
  std::size_t sessions_run_ = 0;
  std::vector<std::filesystem::path> logs_;
  std::shared_ptr<ManualFrameSource> manual_;

  std::atomic<bool> stop_{false};
  std::atomic<double> last_timestamp_{-1.0};
  std::thread lane_;
  std::condition_variable idle_cv_;

  std::mutex clients_mu_;
  std::vector<std::shared_ptr<ClientQueue>> clients_;
};

}  // namespace sonomyo
