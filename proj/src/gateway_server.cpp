#include "sonomyo/gateway_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <thread>

namespace sonomyo {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

http::status status_for(const json& reply) {
  if (reply.value("ok", false)) return http::status::ok;
  const std::string code = reply["error"].value("code", "");
  if (code == "malformed" || code == "unknown_command") return http::status::bad_request;
  if (code == "illegal_transition" || code == "wrong_source") return http::status::conflict;
  return http::status::unprocessable_entity;
}

json error_reply(const std::string& code, const std::string& reason) {
  return {{"ok", false}, {"error", {{"code", code}, {"reason", reason}}}};
}

json activation_reply(SessionController& controller, const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    return error_reply("malformed", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("value") || !j["value"].is_number()) {
    return error_reply("malformed", "activation needs a numeric 'value'");
  }
  try {
    controller.set_activation(j["value"].get<double>());
  } catch (const CommandError& e) {
    return error_reply(e.code(), e.what());
  }
  return {{"ok", true}};
}

class WebSocketSession : public std::enable_shared_from_this<WebSocketSession> {
 public:
  WebSocketSession(tcp::socket socket, SessionController& controller)
      : ws_(std::move(socket)), controller_(controller) {}
  ~WebSocketSession() { close(); }

  void run(http::request<http::string_body> request) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(request, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    queue_ = controller_.subscribe();
    std::weak_ptr<WebSocketSession> weak = shared_from_this();
    auto executor = ws_.get_executor();
    queue_->set_notify([weak, executor] {
      net::post(executor, [weak] {
        if (auto self = weak.lock()) self->pump();
      });
    });
    pump();
    read();
  }

  void pump() {
    if (writing_ || closed_) return;
    std::optional<StreamMessage> next = queue_->try_pop();
    if (!next) return;
    out_ = next->to_json().dump();
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->close();
        return;
      }
      self->pump();
    });
  }

  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->in_.data());
      self->in_.consume(self->in_.size());
      self->on_message(text);
      self->read();
    });
  }

  void on_message(const std::string& text) {
    json reply;
    json j = json::parse(text, nullptr, false);
    if (j.is_object() && j.value("kind", "") == "activation") {
      reply = activation_reply(controller_, text);
    } else {
      reply = error_reply("malformed", "stream accepts {\"kind\": \"activation\", \"value\": v} only");
    }
    if (!reply.value("ok", false)) {
      json payload = controller_.status();
      payload["error"] = reply["error"];
      queue_->push({StreamKind::status, 0.0, payload});
    }
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    if (queue_) {
      queue_->set_notify({});
      controller_.unsubscribe(queue_);
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionController& controller_;
  std::shared_ptr<ClientQueue> queue_;
  beast::flat_buffer in_;
  std::string out_;
  bool writing_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, SessionController& controller)
      : stream_(std::move(socket)), controller_(controller) {}

  void run() { read(); }

 private:
  void read() {
    request_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (websocket::is_upgrade(request_)) {
      if (request_.target() == "/stream") {
        stream_.expires_never();
        std::make_shared<WebSocketSession>(stream_.release_socket(), controller_)->run(std::move(request_));
        return;
      }
    }
    respond(route());
  }

  http::response<http::string_body> route() {
    const std::string target(request_.target());
    const auto method = request_.method();
    json reply;
    http::status status = http::status::ok;
    if (method == http::verb::options) {
      return make(http::status::no_content, "");
    }
    if (target == "/control" && method == http::verb::post) {
      reply = controller_.handle_text(request_.body());
      status = status_for(reply);
    } else if (target == "/status" && method == http::verb::get) {
      reply = {{"ok", true}, {"status", controller_.status()}};
    } else if (target == "/activation" && method == http::verb::post) {
      reply = activation_reply(controller_, request_.body());
      status = status_for(reply);
    } else if (target == "/" && method == http::verb::get) {
      reply = {{"ok", true},
               {"endpoints", {"POST /control", "GET /status", "POST /activation", "GET /stream (WebSocket)"}}};
    } else {
      reply = error_reply("not_found", "no route for " + std::string(request_.method_string()) + " " + target);
      status = http::status::not_found;
    }
    return make(status, reply.dump());
  }

  http::response<http::string_body> make(http::status status, std::string body) {
    http::response<http::string_body> res{status, request_.version()};
    res.set(http::field::server, "sonomyo-gateway");
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    res.keep_alive(request_.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  }

  void respond(http::response<http::string_body> response) {
    auto res = std::make_shared<http::response<http::string_body>>(std::move(response));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  SessionController& controller_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
};

}  // namespace

struct GatewayServer::Impl {
  Impl(SessionController& c, const ServerOptions& options) : controller(c), acceptor(io) {
    beast::error_code ec;
    const auto address = net::ip::make_address(options.address, ec);
    if (ec) throw IoError("bad listen address '" + options.address + "': " + ec.message());
    const tcp::endpoint endpoint(address, options.port);
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
      throw IoError("cannot listen on " + options.address + ":" + std::to_string(options.port) + ": " + ec.message());
    }
  }

  void accept() {
    acceptor.async_accept(net::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpSession>(std::move(socket), controller)->run();
      accept();
    });
  }

  SessionController& controller;
  net::io_context io{1};
  tcp::acceptor acceptor;
  std::thread thread;
};

GatewayServer::GatewayServer(SessionController& controller, ServerOptions options)
    : impl_(std::make_unique<Impl>(controller, options)) {}

GatewayServer::~GatewayServer() { stop(); }

unsigned short GatewayServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void GatewayServer::start() {
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

void GatewayServer::run() {
  impl_->accept();
  impl_->io.run();
}

void GatewayServer::stop() {
  if (!impl_) return;
  impl_->io.stop();
  if (impl_->thread.joinable() && impl_->thread.get_id() != std::this_thread::get_id()) impl_->thread.join();
}

}  // namespace sonomyo
