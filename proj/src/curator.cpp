#include "rfms/curator.hpp"

#include <charconv>
#include <cmath>

#include <boost/asio.hpp>
#include <boost/beast/core/detail/base64.hpp>
#include "json.hpp"
#include <spdlog/spdlog.h>

#include "rfms/error.hpp"

namespace rfms {

namespace asio = boost::asio;
using asio::ip::tcp;
using json = nlohmann::json;

namespace {

constexpr std::size_t kMaxLineBytes = 64u << 20;

std::string error_response(std::uint64_t id, std::string_view code, std::string_view message) {
  return json{{"type", "ERROR"}, {"id", id}, {"code", code}, {"message", message}}.dump();
}

}  // namespace

std::string_view to_string(CuratorStrategy::Kind kind) {
  return kind == CuratorStrategy::Kind::honest ? "honest" : "thresholdout";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  namespace b64 = boost::beast::detail::base64;
  if (text.size() % 4 != 0) throw ProtocolError("bad_model", "model_b64: length is not a multiple of 4");
  std::size_t body = text.size();
  for (int i = 0; i < 2 && body > 0 && text[body - 1] == '='; ++i) --body;
  std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
  auto [written, read] = b64::decode(out.data(), text.data(), body);
  if (read != body) throw ProtocolError("bad_model", "model_b64: invalid base64 character");
  out.resize(written);
  return out;
}

// ---------------------------------------------------------------------------

CuratorEngine::CuratorEngine(Dataset inbag, CuratorStrategy strategy)
    : inbag_(std::move(inbag)), strategy_(strategy) {
  if (inbag_.empty()) throw InvalidInput("curator: empty inbag");
  if (strategy_.kind == CuratorStrategy::Kind::thresholdout)
    thresholdout_.emplace(strategy_.params, strategy_.seed);
}

std::size_t CuratorEngine::refresh_count() const {
  std::lock_guard lock(mutex_);
  return thresholdout_ ? thresholdout_->refresh_count() : 0;
}

double CuratorEngine::answer(const TrainedModel& model, std::optional<double> aux_openbox_loss) {
  if (model.input_dim() != inbag_.cols())
    throw ProtocolError("dimension_mismatch", "model expects " + std::to_string(model.input_dim()) +
                                                  " features, site has " + std::to_string(inbag_.cols()));
  if (thresholdout_ && !aux_openbox_loss)
    throw ProtocolError("missing_aux", "thresholdout curator requires aux_openbox_loss");
  if (aux_openbox_loss && !(*aux_openbox_loss >= 0.0 && *aux_openbox_loss <= 1.0))
    throw ProtocolError("bad_request", "aux_openbox_loss must lie in [0,1]");
  const double loss = evaluate(model, inbag_);
  ++queries_;
  if (!thresholdout_) return loss;
  std::lock_guard lock(mutex_);
  return thresholdout_->answer(*aux_openbox_loss, loss);
}

std::string CuratorEngine::handle_line(std::string_view line) {
  std::uint64_t id = 0;
  try {
    const json request = json::parse(line);
    if (!request.is_object()) return error_response(0, "bad_request", "request must be a JSON object");
    if (auto it = request.find("id"); it != request.end()) {
      if (!it->is_number_unsigned()) return error_response(0, "bad_request", "id must be an unsigned integer");
      id = it->get<std::uint64_t>();
    } else {
      return error_response(0, "bad_request", "missing id");
    }
    const auto type = request.value("type", std::string{});
    if (type == "INFO") {
      return json{{"type", "INFO"},
                  {"id", id},
                  {"n", inbag_.rows()},
                  {"strategy", to_string(strategy_.kind)}}
          .dump();
    }
    if (type != "EVAL") return error_response(id, "bad_request", "unknown request type '" + type + "'");
    if (!request.contains("model_b64") || !request["model_b64"].is_string())
      return error_response(id, "bad_request", "missing model_b64");
    if (request.value("measure", std::string{"mmce"}) != "mmce")
      return error_response(id, "unsupported_measure", "only mmce is supported");

    std::optional<double> aux;
    if (auto it = request.find("aux_openbox_loss"); it != request.end() && !it->is_null()) {
      if (!it->is_number()) return error_response(id, "bad_request", "aux_openbox_loss must be a number");
      aux = it->get<double>();
    }

    const auto bytes = base64_decode(request["model_b64"].get_ref<const std::string&>());
    TrainedModel model = [&] {
      try {
        return deserialize_model(bytes);
      } catch (const DecodeError& e) {
        throw ProtocolError("bad_model", e.what());
      }
    }();
    if (auto it = request.find("learner"); it != request.end() && it->is_string()) {
      if (it->get<std::string>() != to_string(model.learner()))
        return error_response(id, "bad_request", "learner does not match model payload");
    }
    const double value = answer(model, aux);
    return json{{"type", "RESULT"}, {"id", id}, {"value", value}}.dump();
  } catch (const json::exception& e) {
    return error_response(id, "bad_request", e.what());
  } catch (const ProtocolError& e) {
    return error_response(id, e.code(), e.what());
  } catch (const std::exception& e) {
    return error_response(id, "internal", e.what());
  }
}

double LocalCurator::evaluate(const TrainedModel& model, std::optional<double> aux_openbox_loss) {
  const double v = engine_->answer(model, aux_openbox_loss);
  ++answered_;
  return v;
}

// ---------------------------------------------------------------------------

Endpoint Endpoint::parse(std::string_view address) {
  Endpoint ep;
  auto colon = address.rfind(':');
  std::string_view port_text = address;
  if (colon != std::string_view::npos) {
    if (colon > 0) ep.host = std::string(address.substr(0, colon));
    port_text = address.substr(colon + 1);
  }
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || value > 65535)
    throw InvalidInput("bad address '" + std::string(address) + "', expected host:port");
  ep.port = static_cast<unsigned short>(value);
  return ep;
}

struct RemoteCurator::Connection {
  asio::io_context io;
  tcp::socket socket{io};
  asio::streambuf buffer{kMaxLineBytes};
};

RemoteCurator::RemoteCurator(Endpoint endpoint) : endpoint_(std::move(endpoint)) {
  const json info = json::parse(round_trip(json{{"type", "INFO"}, {"id", 0}}.dump()));
  if (info.value("type", "") != "INFO") throw TransportError("curator did not answer INFO");
  weight_ = info.at("n").get<double>();
  needs_aux_ = info.value("strategy", "honest") == "thresholdout";
}

RemoteCurator::~RemoteCurator() = default;

std::string RemoteCurator::round_trip(const std::string& line) {
  std::lock_guard lock(mutex_);
  try {
    if (!connection_) {
      auto conn = std::make_unique<Connection>();
      tcp::resolver resolver(conn->io);
      asio::connect(conn->socket, resolver.resolve(endpoint_.host, std::to_string(endpoint_.port)));
      conn->socket.set_option(tcp::no_delay(true));
      connection_ = std::move(conn);
    }
    std::string out = line;
    out.push_back('\n');
    asio::write(connection_->socket, asio::buffer(out));
    const auto n = asio::read_until(connection_->socket, connection_->buffer, '\n');
    std::string response(asio::buffers_begin(connection_->buffer.data()),
                         asio::buffers_begin(connection_->buffer.data()) + static_cast<std::ptrdiff_t>(n - 1));
    connection_->buffer.consume(n);
    return response;
  } catch (const boost::system::system_error& e) {
    connection_.reset();
    throw TransportError("curator " + endpoint_.to_string() + ": " + e.what());
  }
}

double RemoteCurator::evaluate(const TrainedModel& model, std::optional<double> aux_openbox_loss) {
  std::uint64_t id = 0;
  {
    std::lock_guard lock(mutex_);
    id = next_id_++;
  }
  json request{{"type", "EVAL"},
               {"id", id},
               {"learner", to_string(model.learner())},
               {"model_b64", base64_encode(serialize_model(model))},
               {"measure", "mmce"},
               {"aux_openbox_loss", nullptr}};
  if (aux_openbox_loss) request["aux_openbox_loss"] = *aux_openbox_loss;
  json response;
  try {
    response = json::parse(round_trip(request.dump()));
  } catch (const json::exception& e) {
    throw ProtocolError("bad_response", e.what());
  }
  const auto type = response.value("type", "");
  if (response.value("id", std::uint64_t{0}) != id) throw ProtocolError("bad_response", "response id mismatch");
  if (type == "ERROR")
    throw ProtocolError(response.value("code", "unknown"), response.value("message", "curator error"));
  if (type != "RESULT" || !response.contains("value") || !response["value"].is_number())
    throw ProtocolError("bad_response", "malformed RESULT");
  ++answered_;
  return response["value"].get<double>();
}

// ---------------------------------------------------------------------------

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, std::shared_ptr<CuratorEngine> engine)
      : socket_(std::move(socket)), engine_(std::move(engine)), buffer_(kMaxLineBytes) {}

  void start() { read(); }

 private:
  void read() {
    asio::async_read_until(socket_, buffer_, '\n',
                           [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
                             if (ec) return;  // closed, or line too long
                             std::string line(asio::buffers_begin(self->buffer_.data()),
                                              asio::buffers_begin(self->buffer_.data()) +
                                                  static_cast<std::ptrdiff_t>(n - 1));
                             self->buffer_.consume(n);
                             if (!line.empty() && line.back() == '\r') line.pop_back();
                             self->reply_ = self->engine_->handle_line(line);
                             self->reply_.push_back('\n');
                             self->write();
                           });
  }

  void write() {
    asio::async_write(socket_, asio::buffer(reply_),
                      [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                        if (!ec) self->read();
                      });
  }

  tcp::socket socket_;
  std::shared_ptr<CuratorEngine> engine_;
  asio::streambuf buffer_;
  std::string reply_;
};

}  // namespace

struct CuratorServer::Impl {
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::shared_ptr<CuratorEngine> engine;

  void accept() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec) return;
      socket.set_option(tcp::no_delay(true));
      std::make_shared<Session>(std::move(socket), engine)->start();
      accept();
    });
  }
};

CuratorServer::CuratorServer(std::shared_ptr<CuratorEngine> engine, const Endpoint& bind)
    : engine_(std::move(engine)), impl_(std::make_unique<Impl>()), host_(bind.host) {
  impl_->engine = engine_;
  try {
    tcp::resolver resolver(impl_->io);
    const auto endpoint = resolver.resolve(bind.host, std::to_string(bind.port))->endpoint();
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
    port_ = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw TransportError("curator server: cannot bind " + bind.to_string() + ": " + e.what());
  }
  impl_->accept();
}

CuratorServer::~CuratorServer() { stop(); }

void CuratorServer::start() {
  thread_ = std::thread([this] { run(); });
}

void CuratorServer::run() {
  spdlog::debug("curator listening on {}:{}", host_, port_);
  impl_->io.run();
  spdlog::debug("curator on port {} stopped after {} queries", port_, engine_->query_count());
}

void CuratorServer::stop() {
  impl_->io.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace rfms
