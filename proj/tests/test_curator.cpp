#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "json.hpp"
#include "rfms/curator.hpp"
#include "rfms/error.hpp"
#include "rfms/thresholdout.hpp"
#include "support.hpp"

using namespace rfms;
using nlohmann::json;

namespace {

ThresholdoutParams silent() {
  ThresholdoutParams p;
  p.sigma = 0.0;
  p.gamma = 0.0;
  return p;
}

TrainedModel constant_model(std::size_t p, double intercept) {
  Standardizer s{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p))};
  return TrainedModel(s, ElasticNetModel{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), intercept});
}

TrainedModel linear_model(const Eigen::VectorXd& coef, double intercept) {
  Standardizer s{Eigen::VectorXd::Zero(coef.size()), Eigen::VectorXd::Ones(coef.size())};
  return TrainedModel(s, ElasticNetModel{coef, intercept});
}

std::string eval_request(std::uint64_t id, const TrainedModel& m, std::optional<double> aux = std::nullopt) {
  json r{{"type", "EVAL"}, {"id", id}, {"learner", std::string(to_string(m.learner()))},
         {"model_b64", base64_encode(serialize_model(m))}, {"measure", "mmce"}};
  r["aux_openbox_loss"] = aux ? json(*aux) : json(nullptr);
  return r.dump();
}

/// 20 rows: 17 positive, 3 negative.
Dataset seventeen_three() { return testing::two_class_gaussians(3, 17, 2, 1.0, 44); }

}  // namespace

TEST_CASE("thresholdout branches with silent noise") {
  ThresholdoutState st(silent(), 1);
  CHECK(st.current_threshold() == 0.02);
  CHECK(thresholdout_answer(st, 0.80, 0.81) == 0.80);
  CHECK(st.refresh_count() == 0);
  CHECK(thresholdout_answer(st, 0.80, 0.90) == 0.90);
  CHECK(st.refresh_count() == 1);
  CHECK(st.current_threshold() == 0.02);
  CHECK(thresholdout_answer(st, 0.50, 0.49) == 0.50);
  CHECK(st.refresh_count() == 1);
  CHECK(thresholdout_answer(st, 0.10, 0.00) == 0.00);
  CHECK(st.refresh_count() == 2);
  CHECK(st.query_count() == 4);
}

TEST_CASE("thresholdout refresh counter tracks over-threshold answers under noise") {
  for (auto family : {NoiseFamily::gaussian, NoiseFamily::laplace}) {
    ThresholdoutParams p;
    p.family = family;
    ThresholdoutState st(p, 9);
    Rng rng(2);
    std::size_t returned_curator_side = 0;
    for (int i = 0; i < 2000; ++i) {
      const double a = uniform01(rng), b = uniform01(rng);
      const auto before = st.refresh_count();
      const double v = st.answer(a, b);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      const bool refreshed = st.refresh_count() == before + 1;
      CHECK((refreshed || st.refresh_count() == before));
      if (!refreshed) CHECK(v == std::clamp(a, 0.0, 1.0));
      returned_curator_side += refreshed;
      CHECK(st.current_threshold() == p.threshold);  // gamma = 0
    }
    CHECK(returned_curator_side > 1000);
  }
}

TEST_CASE("honest curator answers the inbag mmce") {
  LocalCurator c(seventeen_three(), CuratorStrategy::honest());
  CHECK(c.evaluate(constant_model(2, 1.0), std::nullopt) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(c.evaluate(constant_model(2, 1.0), 0.3) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(c.weight() == 20.0);
  CHECK_FALSE(c.needs_openbox_loss());
  CHECK(c.query_count() == 2);
}

TEST_CASE("thresholdout curator returns the openbox loss inside the threshold") {
  LocalCurator c(seventeen_three(), CuratorStrategy::thresholdout(silent(), 3));
  CHECK(c.needs_openbox_loss());
  CHECK(c.evaluate(constant_model(2, 1.0), 0.16) == 0.16);
  CHECK(c.evaluate(constant_model(2, 1.0), 0.40) == doctest::Approx(0.15).epsilon(1e-15));
  try {
    c.evaluate(constant_model(2, 1.0), std::nullopt);
    FAIL("missing aux accepted");
  } catch (const ProtocolError& e) {
    CHECK(e.code() == "missing_aux");
  }
}

TEST_CASE("engine rejects a model of the wrong dimension") {
  CuratorEngine e(seventeen_three(), CuratorStrategy::honest());
  try {
    e.answer(constant_model(3, 1.0), std::nullopt);
    FAIL("dimension mismatch accepted");
  } catch (const ProtocolError& err) {
    CHECK(err.code() == "dimension_mismatch");
  }
}

TEST_CASE("protocol lines") {
  CuratorEngine e(seventeen_three(), CuratorStrategy::honest());
  auto reply = [&](std::string_view line) { return json::parse(e.handle_line(line)); };

  auto r = reply(eval_request(7, constant_model(2, 1.0)));
  CHECK(r["type"] == "RESULT");
  CHECK(r["id"] == 7);
  CHECK(r["value"].get<double>() == doctest::Approx(0.15).epsilon(1e-15));

  CHECK(reply("this is not json")["code"] == "bad_request");
  CHECK(reply("[1,2]")["code"] == "bad_request");
  CHECK(reply(R"({"type":"EVAL"})")["code"] == "bad_request");
  CHECK(reply(R"({"type":"NOPE","id":3})")["id"] == 3);

  auto info = reply(R"({"type":"INFO","id":1})");
  CHECK(info["n"] == 20);
  CHECK(info["strategy"] == "honest");

  auto req = json::parse(eval_request(8, constant_model(2, 1.0)));
  req["future_field"] = {1, 2, 3};
  CHECK(reply(req.dump())["type"] == "RESULT");

  req["measure"] = "auc";
  CHECK(reply(req.dump())["code"] == "unsupported_measure");

  req = json::parse(eval_request(9, constant_model(2, 1.0)));
  req["model_b64"] = base64_encode(std::vector<std::uint8_t>{'R', 'F', 'M', 'S', 'M', '1', 0});
  CHECK(reply(req.dump())["code"] == "bad_model");
  req["model_b64"] = "!!!!";
  CHECK(reply(req.dump())["code"] == "bad_model");

  req = json::parse(eval_request(10, constant_model(2, 1.0)));
  req["learner"] = "random_forest";
  CHECK(reply(req.dump())["code"] == "bad_request");

  CHECK(e.query_count() == 2);
}

TEST_CASE("base64 roundtrip") {
  Rng rng(5);
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a', 'n'}) == "TWFu");
  CHECK_THROWS_AS(base64_decode("T#Fu"), ProtocolError);
}

TEST_CASE("endpoint parsing") {
  CHECK(Endpoint::parse("10.0.0.2:8080").host == "10.0.0.2");
  CHECK(Endpoint::parse("10.0.0.2:8080").port == 8080);
  CHECK(Endpoint::parse("9000").port == 9000);
  CHECK(Endpoint::parse(":9000").host == "127.0.0.1");
  CHECK_THROWS_AS(Endpoint::parse("host:99999"), InvalidInput);
  CHECK_THROWS_AS(Endpoint::parse("host:http"), InvalidInput);
}

TEST_CASE("server answers sequential requests with matching ids") {
  auto engine = std::make_shared<CuratorEngine>(seventeen_three(), CuratorStrategy::honest());
  CuratorServer server(engine, {"127.0.0.1", 0});
  server.start();
  RemoteCurator client(server.endpoint());
  CHECK(client.weight() == 20.0);
  for (std::uint64_t id = 1; id <= 100; ++id) {
    const auto r = json::parse(client.round_trip(eval_request(id, constant_model(2, id % 2 ? 1.0 : -1.0))));
    CHECK(r["id"] == id);
    CHECK(r["value"].get<double>() == (id % 2 ? 0.15 : 0.85));
  }
  CHECK(engine->query_count() == 100);

  // Garbage does not kill the connection.
  CHECK(json::parse(client.round_trip("garbage"))["code"] == "bad_request");
  CHECK(client.evaluate(constant_model(2, 1.0), std::nullopt) == 0.15);
  CHECK(client.query_count() == 1);
}

TEST_CASE("concurrent clients get interleaving-independent answers") {
  const auto site = testing::two_class_gaussians(40, 40, 3, 0.5, 8);
  auto engine = std::make_shared<CuratorEngine>(site, CuratorStrategy::honest());
  CuratorServer server(engine, {"127.0.0.1", 0});
  server.start();

  std::vector<TrainedModel> models;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd coef(3);
    for (auto& c : coef) c = uniform01(rng) * 2 - 1;
    models.push_back(linear_model(coef, uniform01(rng) - 0.5));
  }
  std::vector<double> sequential;
  CuratorEngine replay(site, CuratorStrategy::honest());
  for (const auto& m : models) sequential.push_back(replay.answer(m, std::nullopt));

  std::vector<double> got(100);
  auto run = [&](int offset) {
    RemoteCurator client(server.endpoint());
    for (int i = offset; i < 100; i += 2) got[static_cast<std::size_t>(i)] = client.evaluate(models[static_cast<std::size_t>(i)], std::nullopt);
  };
  {
    std::jthread a(run, 0), b(run, 1);
  }
  CHECK(got == sequential);
  CHECK(engine->query_count() == 100);
}

TEST_CASE("remote transport matches in-process bit for bit, thresholdout included") {
  const auto site = testing::two_class_gaussians(25, 30, 4, 0.8, 10);
  for (auto strategy : {CuratorStrategy::honest(), CuratorStrategy::thresholdout(ThresholdoutParams{}, 77)}) {
    LocalCurator local(site, strategy);
    auto engine = std::make_shared<CuratorEngine>(site, strategy);
    CuratorServer server(engine, {"127.0.0.1", 0});
    server.start();
    RemoteCurator remote(server.endpoint());
    CHECK(remote.needs_openbox_loss() == local.needs_openbox_loss());
    CHECK(remote.weight() == local.weight());
    Rng rng(6);
    for (int i = 0; i < 30; ++i) {
      Eigen::VectorXd coef(4);
      for (auto& c : coef) c = uniform01(rng) * 4 - 2;
      const auto m = linear_model(coef, 0.0);
      const double aux = uniform01(rng);
      const double a = local.evaluate(m, aux), b = remote.evaluate(m, aux);
      CHECK(std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b));
    }
  }
}

TEST_CASE("unreachable curator raises a transport error") {
  unsigned short port = 0;
  {
    auto engine = std::make_shared<CuratorEngine>(seventeen_three(), CuratorStrategy::honest());
    CuratorServer server(engine, {"127.0.0.1", 0});
    port = server.port();
  }
  CHECK_THROWS_AS(RemoteCurator(Endpoint{"127.0.0.1", port}), TransportError);
}

TEST_CASE("client reconnects after the server restarts on the same port") {
  const auto site = seventeen_three();
  auto engine = std::make_shared<CuratorEngine>(site, CuratorStrategy::honest());
  auto server = std::make_unique<CuratorServer>(engine, Endpoint{"127.0.0.1", 0});
  const auto port = server->port();
  server->start();
  RemoteCurator client(server->endpoint());
  CHECK(client.evaluate(constant_model(2, 1.0), std::nullopt) == 0.15);
  server.reset();
  CHECK_THROWS_AS(client.evaluate(constant_model(2, 1.0), std::nullopt), TransportError);
  server = std::make_unique<CuratorServer>(engine, Endpoint{"127.0.0.1", port});
  server->start();
  CHECK(client.evaluate(constant_model(2, 1.0), std::nullopt) == 0.15);
}
