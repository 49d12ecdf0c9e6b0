#pragma once

#include <memory>
#include <string>

#include "sonomyo/gateway.hpp"

namespace sonomyo {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = kDefaultPort;  // 0 picks a free port
};

// HTTP and WebSocket front end for a SessionController, on one port:
//   POST /control     ControlCommand JSON, answered with the controller reply
//   GET  /status      current status
//   POST /activation  {"value": v} manual activation input
//   GET  /stream      WebSocket upgrade; StreamMessage JSON text frames out,
//                     {"kind": "activation", "value": v} frames accepted in
class GatewayServer {
 public:
  // Binds immediately; throws IoError when the address is unavailable.
  GatewayServer(SessionController& controller, ServerOptions options = {});
  ~GatewayServer();

  unsigned short port() const;

  // Serves on a background thread until stop().
  void start();
  // Serves on the calling thread until stop() is called from elsewhere.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sonomyo
