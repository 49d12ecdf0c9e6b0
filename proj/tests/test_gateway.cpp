#include <gtest/gtest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <thread>

#include "sonomyo/gateway.hpp"
#include "sonomyo/gateway_server.hpp"
#include "sonomyo/session_log.hpp"
#include "sonomyo/simulation.hpp"
#include "support.hpp"

using namespace sonomyo;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

SessionConfig fast_config() {
  SessionConfig c;
  c.calibration = CalibrationPlan::standard(3.0, 3.0);
  c.source.kind = "synthetic";
  c.source.phantom = reduced_phantom(11);
  c.source.subject_seed = 5;
  return c;
}

ControllerOptions offline() {
  ControllerOptions o;
  o.realtime = false;
  o.client_queue_capacity = 100000;
  return o;
}

std::string error_code(const json& reply) { return reply.at("error").at("code").get<std::string>(); }

std::vector<StreamMessage> collect_until_idle(SessionController& c, ClientQueue& q) {
  c.wait_idle();
  return q.drain();
}

std::size_t count_events(const std::vector<StreamMessage>& messages, const std::string& kind) {
  std::size_t n = 0;
  for (const StreamMessage& m : messages) {
    if (m.kind == StreamKind::trial_event && m.payload.at("kind") == kind) ++n;
  }
  return n;
}

StreamMessage message(StreamKind kind) { return {kind, 0.0, json::object()}; }

}  // namespace

TEST(ClientQueue, DropsOldestDroppableMessageFirst) {
  ClientQueue q(3);
  q.push({StreamKind::cursor, 1.0, {}});
  q.push(message(StreamKind::status));
  q.push({StreamKind::cursor, 2.0, {}});
  q.push(message(StreamKind::trial_event));
  q.push({StreamKind::cursor, 3.0, {}});
  q.push({StreamKind::cursor, 4.0, {}});
  q.push({StreamKind::target, 5.0, {}});
  EXPECT_EQ(q.dropped(), 2u);
  const std::vector<StreamMessage> out = q.drain();
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[0].kind, StreamKind::status);
  EXPECT_EQ(out[1].kind, StreamKind::trial_event);
  EXPECT_DOUBLE_EQ(out[2].timestamp, 3.0);
  EXPECT_DOUBLE_EQ(out[3].timestamp, 4.0);
  EXPECT_EQ(out[4].kind, StreamKind::target);
}

TEST(ClientQueue, NeverDropsReliableMessages) {
  ClientQueue q(1);
  for (int i = 0; i < 500; ++i) {
    q.push(message(i % 2 ? StreamKind::prompt : StreamKind::status));
    q.push({StreamKind::cursor, static_cast<double>(i), {}});
  }
  EXPECT_EQ(q.size(), 501u);
  EXPECT_EQ(q.dropped(), 499u);
}

TEST(ClientQueue, PopTimesOutWhenEmpty) {
  ClientQueue q;
  EXPECT_FALSE(q.pop(10ms).has_value());
  q.push(message(StreamKind::status));
  EXPECT_TRUE(q.pop(10ms).has_value());
}

TEST(Controller, StartsIdleAndAnswersStatus) {
  SessionController c(fast_config(), offline());
  const json reply = c.handle({{"kind", "get_status"}});
  ASSERT_TRUE(reply.at("ok").get<bool>());
  EXPECT_EQ(reply["status"]["phase"], "idle");
  EXPECT_FALSE(reply["status"]["calibrated"].get<bool>());
  EXPECT_EQ(reply["status"]["source"], "synthetic");
}

TEST(Controller, RejectsMalformedAndUnknownCommands) {
  SessionController c(fast_config(), offline());
  EXPECT_EQ(error_code(c.handle_text("{not json")), "malformed");
  EXPECT_EQ(error_code(c.handle(json::array())), "malformed");
  EXPECT_EQ(error_code(c.handle({{"payload", json::object()}})), "malformed");
  EXPECT_EQ(error_code(c.handle({{"kind", "start_session"}, {"payload", 3}})), "malformed");
  EXPECT_EQ(error_code(c.handle({{"kind", "launch_rockets"}})), "unknown_command");
}

TEST(Controller, SessionNeedsCalibration) {
  SessionController c(fast_config(), offline());
  const json reply = c.handle({{"kind", "start_session"}});
  EXPECT_EQ(error_code(reply), "illegal_transition");
  EXPECT_EQ(c.phase(), Phase::idle);
}

TEST(Controller, SetSourceValidates) {
  SessionController c(fast_config(), offline());
  EXPECT_EQ(error_code(c.handle({{"kind", "set_source"}, {"payload", {{"kind", "carrier_pigeon"}}}})),
            "invalid_config");
  EXPECT_EQ(error_code(c.handle({{"kind", "set_source"}, {"payload", {{"kind", "replay"}, {"path", "/nonexistent"}}}})),
            "invalid_config");
  EXPECT_EQ(error_code(c.handle({{"kind", "set_source"}, {"payload", {{"profile", "astronaut"}}}})), "invalid_config");
  const json ok = c.handle({{"kind", "set_source"}, {"payload", {{"kind", "manual"}}}});
  ASSERT_TRUE(ok.at("ok").get<bool>());
  EXPECT_EQ(c.status()["source"], "manual");
}

TEST(Controller, ActivationNeedsManualSourceAndRange) {
  SessionController c(fast_config(), offline());
  try {
    c.set_activation(0.5);
    FAIL() << "expected wrong_source";
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), "wrong_source");
  }
  ASSERT_TRUE(c.handle({{"kind", "set_source"}, {"payload", {{"kind", "manual"}}}})["ok"].get<bool>());
  try {
    c.set_activation(1.2);
    FAIL() << "expected out_of_range";
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), "out_of_range");
  }
  try {
    c.set_activation(0.5);
    FAIL() << "expected illegal_transition";
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), "illegal_transition");
  }
}

TEST(Controller, SyntheticCalibrationThenSession) {
  test::TempDir dir("gw-session");
  SessionController c(fast_config(), offline());
  auto q = c.subscribe();
  ASSERT_EQ(q->drain().size(), 1u);

  ASSERT_TRUE(c.handle({{"kind", "start_calibration"}})["ok"].get<bool>());
  std::vector<StreamMessage> cal = collect_until_idle(c, *q);
  std::vector<std::string> cues;
  for (const StreamMessage& m : cal) {
    if (m.kind == StreamKind::prompt) cues.push_back(m.payload.at("cue").get<std::string>());
    EXPECT_NE(m.kind, StreamKind::cursor);
  }
  EXPECT_EQ(cues, (std::vector<std::string>{kFlexPhase, kRestPhase}));
  ASSERT_FALSE(cal.empty());
  EXPECT_EQ(cal.back().kind, StreamKind::status);
  EXPECT_EQ(cal.back().payload["phase"], "idle");
  EXPECT_TRUE(cal.back().payload["calibrated"].get<bool>());
  EXPECT_TRUE(cal.back().payload["last_error"].is_null());

  const std::filesystem::path log_path = dir / "s1.jsonl";
  const json reply =
      c.handle({{"kind", "start_session"}, {"payload", {{"seed", 3}, {"log_path", log_path.string()}}}});
  ASSERT_TRUE(reply["ok"].get<bool>()) << reply.dump();
  EXPECT_EQ(reply["status"]["phase"], "running");
  const std::vector<StreamMessage> run = collect_until_idle(c, *q);
  const SessionPlan plan = build_session_plan(3, fast_config().task);

  std::size_t targets = 0;
  double last_t = -1.0;
  for (const StreamMessage& m : run) {
    if (m.kind == StreamKind::target) ++targets;
    if (m.kind == StreamKind::cursor) {
      EXPECT_GT(m.timestamp, last_t);
      last_t = m.timestamp;
    }
  }
  EXPECT_EQ(targets, plan.targets.size());
  EXPECT_EQ(count_events(run, "presented"), plan.targets.size());
  EXPECT_EQ(count_events(run, "success") + count_events(run, "timeout"), plan.targets.size());
  EXPECT_EQ(count_events(run, "aborted"), 0u);
  EXPECT_TRUE(run.back().payload["last_error"].is_null());

  const SessionLog log = read_log(log_path);
  EXPECT_EQ(log.trials.size(), plan.targets.size());
  EXPECT_EQ(log.plan.targets, plan.targets);
  EXPECT_TRUE(log.references.has_value());
  EXPECT_EQ(log.metadata["group"], "able_bodied");
  ASSERT_EQ(c.logs().size(), 1u);
  EXPECT_EQ(c.logs().front(), log_path);
}

TEST(Controller, StreamTimeStaysMonotoneAcrossSessions) {
  test::TempDir dir("gw-monotone");
  SessionController c(fast_config(), offline());
  ASSERT_TRUE(c.handle({{"kind", "start_calibration"}})["ok"].get<bool>());
  c.wait_idle();
  auto q = c.subscribe();
  for (int i = 0; i < 2; ++i) {
    const std::string path = (dir / ("s" + std::to_string(i) + ".jsonl")).string();
    ASSERT_TRUE(c.handle({{"kind", "start_session"}, {"payload", {{"seed", 1 + i}, {"log_path", path}}}})["ok"]);
    c.wait_idle();
  }
  double last = -1.0;
  std::size_t cursors = 0;
  for (const StreamMessage& m : q->drain()) {
    if (m.kind != StreamKind::cursor) continue;
    ++cursors;
    EXPECT_GT(m.timestamp, last);
    last = m.timestamp;
  }
  EXPECT_GT(cursors, 100u);
  const SessionLog first = read_log(dir / "s0.jsonl");
  const SessionLog second = read_log(dir / "s1.jsonl");
  EXPECT_GT(second.frames.front().timestamp, first.frames.back().timestamp);
}

TEST(Controller, CommandsWhileBusyAreRefused) {
  SessionConfig config = fast_config();
  config.source.kind = "manual";
  config.calibration = CalibrationPlan::standard(0.5, 0.5);
  SessionController c(config, offline());
  ASSERT_TRUE(c.handle({{"kind", "start_calibration"}})["ok"].get<bool>());
  EXPECT_EQ(c.phase(), Phase::calibrating);
  EXPECT_EQ(error_code(c.handle({{"kind", "start_calibration"}})), "illegal_transition");
  EXPECT_EQ(error_code(c.handle({{"kind", "set_source"}, {"payload", {{"kind", "synthetic"}}}})),
            "illegal_transition");
  const json aborted = c.handle({{"kind", "abort"}});
  ASSERT_TRUE(aborted["ok"].get<bool>());
  EXPECT_EQ(aborted["status"]["phase"], "idle");
  EXPECT_FALSE(aborted["status"]["calibrated"].get<bool>());
  EXPECT_EQ(aborted["status"]["last_error"], "calibration aborted");
}

// Manual input through the whole chain: a slow ramp from rest to full
// flexion must move the cursor monotonically across the full range when
// the images are noise free and the bounds stay at their calibration
// values. Aborting afterwards logs the open trial as aborted.
TEST(Controller, ManualRampDrivesCursorMonotonically) {
  test::TempDir dir("gw-manual");
  SessionConfig config = fast_config();
  config.source.kind = "manual";
  config.source.phantom.noise_sigma = 0.0;
  config.calibration = CalibrationPlan::standard(1.0, 1.0);
  config.bounds.frozen = true;
  SessionController c(config, offline());
  auto q = c.subscribe();

  ASSERT_TRUE(c.handle({{"kind", "start_calibration"}})["ok"].get<bool>());
  c.set_activation(1.0);
  bool rest_seen = false;
  const auto deadline = std::chrono::steady_clock::now() + 10s;
  while (!rest_seen && std::chrono::steady_clock::now() < deadline) {
    const auto m = q->pop(100ms);
    if (m && m->kind == StreamKind::prompt && m->payload["cue"] == kRestPhase) rest_seen = true;
  }
  ASSERT_TRUE(rest_seen);
  c.set_activation(0.0);
  c.wait_idle();
  ASSERT_TRUE(c.status()["calibrated"].get<bool>()) << c.status().dump();
  q->drain();

  const std::filesystem::path log_path = dir / "manual.jsonl";
  ASSERT_TRUE(c.handle({{"kind", "start_session"}, {"payload", {{"log_path", log_path.string()}}}})["ok"]);
  std::this_thread::sleep_for(300ms);
  for (int k = 0; k <= 40; ++k) {
    c.set_activation(k / 40.0);
    std::this_thread::sleep_for(50ms);
  }
  std::this_thread::sleep_for(300ms);
  const json stopped = c.handle({{"kind", "abort"}});
  EXPECT_EQ(stopped["status"]["phase"], "idle");
  EXPECT_TRUE(stopped["status"]["last_error"].is_null());

  std::vector<double> positions;
  for (const StreamMessage& m : q->drain()) {
    if (m.kind == StreamKind::cursor) positions.push_back(m.payload["position"].get<double>());
  }
  ASSERT_GT(positions.size(), 40u);
  for (std::size_t i = 1; i < positions.size(); ++i) EXPECT_GE(positions[i], positions[i - 1]) << "frame " << i;
  EXPECT_LE(positions.front(), 0.01);
  EXPECT_GE(positions.back(), 0.99);

  const SessionLog log = read_log(log_path);
  ASSERT_FALSE(log.trials.empty());
  EXPECT_TRUE(log.trials.back().aborted);
  EXPECT_EQ(log.metadata["group"], "operator");
}

namespace {

struct HttpReply {
  unsigned status = 0;
  json body;
};

HttpReply http_call(unsigned short port, http::verb verb, const std::string& target, const std::string& body = "") {
  net::io_context io;
  tcp::resolver resolver(io);
  beast::tcp_stream stream(io);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  req.set(http::field::content_type, "application/json");
  req.body() = body;
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {res.result_int(), res.body().empty() ? json() : json::parse(res.body())};
}

json ws_read(websocket::stream<tcp::socket>& ws) {
  beast::flat_buffer buffer;
  ws.read(buffer);
  return json::parse(beast::buffers_to_string(buffer.data()));
}

}  // namespace

TEST(Server, ServesControlStatusAndActivation) {
  SessionController c(fast_config(), offline());
  GatewayServer server(c, {"127.0.0.1", 0});
  server.start();
  const unsigned short port = server.port();
  ASSERT_NE(port, 0);

  HttpReply r = http_call(port, http::verb::get, "/status");
  EXPECT_EQ(r.status, 200u);
  EXPECT_EQ(r.body["status"]["phase"], "idle");

  r = http_call(port, http::verb::get, "/");
  EXPECT_EQ(r.status, 200u);
  EXPECT_TRUE(r.body["endpoints"].is_array());

  r = http_call(port, http::verb::post, "/control", "{\"kind\": \"get_status\"}");
  EXPECT_EQ(r.status, 200u);
  EXPECT_TRUE(r.body["ok"].get<bool>());

  r = http_call(port, http::verb::post, "/control", "{oops");
  EXPECT_EQ(r.status, 400u);
  EXPECT_EQ(error_code(r.body), "malformed");

  r = http_call(port, http::verb::post, "/control", "{\"kind\": \"dance\"}");
  EXPECT_EQ(r.status, 400u);
  EXPECT_EQ(error_code(r.body), "unknown_command");

  r = http_call(port, http::verb::post, "/control", "{\"kind\": \"start_session\"}");
  EXPECT_EQ(r.status, 409u);
  EXPECT_EQ(error_code(r.body), "illegal_transition");

  r = http_call(port, http::verb::post, "/activation", "{\"value\": 0.3}");
  EXPECT_EQ(r.status, 409u);
  EXPECT_EQ(error_code(r.body), "wrong_source");

  r = http_call(port, http::verb::post, "/activation", "{\"level\": 0.3}");
  EXPECT_EQ(r.status, 400u);

  r = http_call(port, http::verb::post, "/control", "{\"kind\": \"set_source\", \"payload\": {\"kind\": \"manual\"}}");
  EXPECT_EQ(r.status, 200u);
  r = http_call(port, http::verb::post, "/activation", "{\"value\": 3}");
  EXPECT_EQ(r.status, 422u);
  EXPECT_EQ(error_code(r.body), "out_of_range");

  r = http_call(port, http::verb::get, "/nowhere");
  EXPECT_EQ(r.status, 404u);
  server.stop();
}

TEST(Server, StreamsOverWebSocket) {
  SessionController c(fast_config(), offline());
  GatewayServer server(c, {"127.0.0.1", 0});
  server.start();

  net::io_context io;
  tcp::resolver resolver(io);
  websocket::stream<tcp::socket> ws(io);
  net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/stream");

  json first = ws_read(ws);
  EXPECT_EQ(first["kind"], "status");
  EXPECT_EQ(first["payload"]["phase"], "idle");

  // Activation over the socket is refused for a synthetic source, and
  // the refusal comes back as a status message carrying the error.
  ws.write(net::buffer(std::string("{\"kind\": \"activation\", \"value\": 0.4}")));
  json refusal = ws_read(ws);
  EXPECT_EQ(refusal["kind"], "status");
  EXPECT_EQ(refusal["payload"]["error"]["code"], "wrong_source");

  ws.write(net::buffer(std::string("hello")));
  EXPECT_EQ(ws_read(ws)["payload"]["error"]["code"], "malformed");

  const HttpReply r = http_call(server.port(), http::verb::post, "/control", "{\"kind\": \"start_calibration\"}");
  ASSERT_EQ(r.status, 200u);
  std::vector<std::string> kinds;
  for (;;) {
    const json m = ws_read(ws);
    kinds.push_back(m["kind"].get<std::string>());
    if (m["kind"] == "status" && m["payload"]["phase"] == "idle") {
      EXPECT_TRUE(m["payload"]["calibrated"].get<bool>());
      break;
    }
  }
  EXPECT_EQ(std::count(kinds.begin(), kinds.end(), "prompt"), 2);
  EXPECT_EQ(kinds.front(), "status");

  ws.close(websocket::close_code::normal);
  server.stop();
}

TEST(Server, BusyPortRaisesIoError) {
  SessionController c(fast_config(), offline());
  GatewayServer first(c, {"127.0.0.1", 0});
  EXPECT_THROW(GatewayServer(c, {"127.0.0.1", first.port()}), IoError);
  EXPECT_THROW(GatewayServer(c, {"not-an-address", 0}), IoError);
}
