#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rfms/datamodel.hpp"
#include "rfms/learners.hpp"
#include "rfms/thresholdout.hpp"

namespace rfms {

struct CuratorStrategy {
  enum class Kind { honest, thresholdout };

  Kind kind = Kind::honest;
  ThresholdoutParams params;
  std::uint64_t seed = 0;

  static CuratorStrategy honest() { return {}; }
  static CuratorStrategy thresholdout(ThresholdoutParams params, std::uint64_t seed) {
    return {Kind::thresholdout, params, seed};
  }
};

std::string_view to_string(CuratorStrategy::Kind kind);

/// Client-side view of a curator: it accepts a model and answers with one
/// scalar loss. Nothing on this interface returns site rows.
class Curator {
 public:
  virtual ~Curator() = default;

  /// Loss of `model` on the curator's inbag. `aux_openbox_loss` is the
  /// model's own loss on the openbox inbag; thresholdout curators need it.
  virtual double evaluate(const TrainedModel& model, std::optional<double> aux_openbox_loss) = 0;
  /// Weight of this curator when aggregating losses (its inbag size).
  virtual double weight() const = 0;
  virtual bool needs_openbox_loss() const = 0;
  /// Queries answered through this handle.
  virtual std::size_t query_count() const = 0;
};

/// Server-side state of one curator site: its inbag rows, its answer strategy
/// and the request handling shared by both transports.
class CuratorEngine {
 public:
  CuratorEngine(Dataset inbag, CuratorStrategy strategy);

  double answer(const TrainedModel& model, std::optional<double> aux_openbox_loss);

  /// Handles one protocol line and returns the response line (without the
  /// trailing newline). Never throws.
  std::string handle_line(std::string_view line);

  std::size_t inbag_size() const noexcept { return inbag_.rows(); }
  const CuratorStrategy& strategy() const noexcept { return strategy_; }
  std::size_t query_count() const noexcept { return queries_.load(); }
  /// Thresholdout refreshes so far (0 for honest curators).
  std::size_t refresh_count() const;

 private:
  Dataset inbag_;
  CuratorStrategy strategy_;
  mutable std::mutex mutex_;
  std::optional<ThresholdoutState> thresholdout_;
  std::atomic<std::size_t> queries_{0};
};

/// In-process transport.
class LocalCurator final : public Curator {
 public:
  explicit LocalCurator(std::shared_ptr<CuratorEngine> engine) : engine_(std::move(engine)) {}
  LocalCurator(Dataset inbag, CuratorStrategy strategy)
      : engine_(std::make_shared<CuratorEngine>(std::move(inbag), strategy)) {}

  double evaluate(const TrainedModel& model, std::optional<double> aux_openbox_loss) override;
  double weight() const override { return static_cast<double>(engine_->inbag_size()); }
  bool needs_openbox_loss() const override {
    return engine_->strategy().kind == CuratorStrategy::Kind::thresholdout;
  }
  std::size_t query_count() const override { return answered_.load(); }

 private:
  std::shared_ptr<CuratorEngine> engine_;
  std::atomic<std::size_t> answered_{0};
};

struct Endpoint {
  std::string host = "127.0.0.1";
  unsigned short port = 0;

  /// Parses "host:port" (or a bare port).
  static Endpoint parse(std::string_view address);
  std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// TCP transport speaking line-delimited JSON. Reconnects lazily after a
/// transport failure; safe to share between threads.
class RemoteCurator final : public Curator {
 public:
  /// Connects and asks the server for its inbag size and strategy.
  explicit RemoteCurator(Endpoint endpoint);
  ~RemoteCurator() override;

  double evaluate(const TrainedModel& model, std::optional<double> aux_openbox_loss) override;
  double weight() const override { return weight_; }
  bool needs_openbox_loss() const override { return needs_aux_; }
  std::size_t query_count() const override { return answered_.load(); }

  /// Sends one raw request line and returns the raw response line.
  std::string round_trip(const std::string& line);

 private:
  struct Connection;

  Endpoint endpoint_;
  std::mutex mutex_;
  std::unique_ptr<Connection> connection_;
  std::uint64_t next_id_ = 1;
  double weight_ = 0.0;
  bool needs_aux_ = false;
  std::atomic<std::size_t> answered_{0};
};

/// Line-delimited JSON TCP server in front of one CuratorEngine.
class CuratorServer {
 public:
  CuratorServer(std::shared_ptr<CuratorEngine> engine, const Endpoint& bind);
  ~CuratorServer();
  CuratorServer(const CuratorServer&) = delete;
  CuratorServer& operator=(const CuratorServer&) = delete;

  /// Port actually bound (useful with port 0).
  unsigned short port() const noexcept { return port_; }
  Endpoint endpoint() const { return {host_, port_}; }

  /// Serves on a background thread until stop().
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();

  const CuratorEngine& engine() const noexcept { return *engine_; }

 private:
  struct Impl;

  std::shared_ptr<CuratorEngine> engine_;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  unsigned short port_ = 0;
  std::thread thread_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ProtocolError("bad_model") on characters outside the alphabet.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace rfms
