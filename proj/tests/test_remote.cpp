#include <doctest.h>

#include <atomic>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "xmodal/harness.hpp"
#include "xmodal/png_io.hpp"
#include "xmodal/remote.hpp"

using namespace xmodal;
using nlohmann::json;

namespace {

// Mock encoder service. `reply` builds the /score response from the request.
class MockServer {
 public:
  using Reply = std::function<void(const json& request, httplib::Response& res)>;

  MockServer(Reply reply, json range = json::array({0.0, 1.0})) : reply_(std::move(reply)) {
    server_.Get("/healthz", [range](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"}, {"model", "mock"}, {"score_range", range}}.dump(),
                      "application/json");
    });
    server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      ++score_calls;
      json body;
      try {
        body = json::parse(req.body);
      } catch (...) {
        res.status = 400;
        return;
      }
      last_request = body;
      reply_(body, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> score_calls{0};
  json last_request;

 private:
  httplib::Server server_;
  Reply reply_;
  int port_ = 0;
  std::thread thread_;
};

json constant_scores(const json& request, double value) {
  json scores = json::array();
  for (const auto& p : request.at("pairs")) scores.push_back({{"id", p.at("id")}, {"score", value}});
  return json{{"scores", scores}};
}

RemoteOptions quick() {
  RemoteOptions o;
  o.timeout = std::chrono::milliseconds(500);
  o.retries = 2;
  return o;
}

std::vector<ScoreRequest> requests(const std::vector<Raster>& images, const std::vector<std::string>& ids) {
  std::vector<ScoreRequest> out;
  for (std::size_t i = 0; i < images.size(); ++i) out.push_back({ids[i], &images[i], "A red circle at the center on a white background."});
  return out;
}

}  // namespace

TEST_CASE("base64") {
  const std::vector<std::uint8_t> bytes = {'M', 'a', 'n', 'y', 0, 255};
  CHECK(base64_encode(bytes) == "TWFueQD/");
  CHECK(base64_decode("TWFueQD/") == bytes);
  CHECK(base64_encode(std::vector<std::uint8_t>{'M'}) == "TQ==");
  CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a'}) == "TWE=");
  CHECK_THROWS(base64_decode("T!=="));
}

TEST_CASE("echo server scores everything 0.5") {
  MockServer server([](const json& req, httplib::Response& res) {
    res.set_content(constant_scores(req, 0.5).dump(), "application/json");
  });
  const auto h = remote_handshake(server.endpoint(), quick());
  CHECK(h.model == "mock");

  const std::vector<Raster> images = {render_scene(SceneSpec{}), render_noise_image(1)};
  const std::vector<std::string> ids = {"a", "b"};
  const auto reqs = requests(images, ids);
  const auto scores = remote_score_batch(reqs, server.endpoint(), quick());
  REQUIRE(scores.size() == 2);
  CHECK(scores[0].id == "a");
  CHECK(scores[1].id == "b");
  CHECK(scores[0].score == 0.5);
  CHECK(scores[1].score == 0.5);

  // Payload carries the exact raster as PNG, in request order.
  const auto& pairs = server.last_request.at("pairs");
  REQUIRE(pairs.size() == 2);
  const auto png = base64_decode(pairs[1].at("image_png_base64").get<std::string>());
  CHECK(decode_png(png) == images[1]);
}

TEST_CASE("declared score range is mapped onto [0, 1]") {
  MockServer server(
      [](const json& req, httplib::Response& res) {
        res.set_content(constant_scores(req, 0.0).dump(), "application/json");
      },
      json::array({-1.0, 1.0}));
  RemoteScorer scorer(server.endpoint(), quick());
  CHECK(scorer.score(render_scene(SceneSpec{}), "x", "p") == doctest::Approx(0.5));
}

TEST_CASE("short score list is a malformed response") {
  MockServer server([](const json& req, httplib::Response& res) {
    auto doc = constant_scores(req, 0.5);
    doc["scores"].erase(doc["scores"].size() - 1);
    res.set_content(doc.dump(), "application/json");
  });
  const std::vector<Raster> images = {render_scene(SceneSpec{}), render_scene(SceneSpec{})};
  const std::vector<std::string> ids = {"a", "b"};
  try {
    remote_score_batch(requests(images, ids), server.endpoint(), quick());
    FAIL("expected RemoteError");
  } catch (const RemoteError& e) {
    CHECK(e.kind() == RemoteErrorKind::malformed_response);
    CHECK(e.attempts() == 3);
  }
  CHECK(server.score_calls == 3);
}

TEST_CASE("reordered ids are rejected") {
  MockServer server([](const json& req, httplib::Response& res) {
    auto doc = constant_scores(req, 0.5);
    std::swap(doc["scores"][0], doc["scores"][1]);
    res.set_content(doc.dump(), "application/json");
  });
  const std::vector<Raster> images = {render_scene(SceneSpec{}), render_scene(SceneSpec{})};
  const std::vector<std::string> ids = {"a", "b"};
  CHECK_THROWS_AS(remote_score_batch(requests(images, ids), server.endpoint(), quick()), RemoteError);
}

TEST_CASE("unreachable endpoint fails after three attempts") {
  // Bind an ephemeral port and close it again so nothing listens there.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  ::close(fd);
  const std::vector<Raster> images = {render_scene(SceneSpec{})};
  const std::vector<std::string> ids = {"a"};
  try {
    remote_score_batch(requests(images, ids), "http://127.0.0.1:" + std::to_string(port), quick());
    FAIL("expected RemoteError");
  } catch (const RemoteError& e) {
    CHECK(e.kind() == RemoteErrorKind::connection);
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("transient failures are retried") {
  std::atomic<int> calls{0};
  MockServer server([&](const json& req, httplib::Response& res) {
    if (calls++ < 2) {
      res.status = 503;
      return;
    }
    res.set_content(constant_scores(req, 0.25).dump(), "application/json");
  });
  const std::vector<Raster> images = {render_scene(SceneSpec{})};
  const std::vector<std::string> ids = {"a"};
  const auto scores = remote_score_batch(requests(images, ids), server.endpoint(), quick());
  CHECK(scores[0].score == 0.25);
  CHECK(calls == 3);

  MockServer down([](const json&, httplib::Response& res) { res.status = 500; });
  try {
    remote_score_batch(requests(images, ids), down.endpoint(), quick());
    FAIL("expected RemoteError");
  } catch (const RemoteError& e) {
    CHECK(e.kind() == RemoteErrorKind::http_status);
  }
}

TEST_CASE("slow server times out") {
  MockServer server([](const json& req, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(constant_scores(req, 0.5).dump(), "application/json");
  });
  auto opts = quick();
  opts.timeout = std::chrono::milliseconds(150);
  opts.retries = 0;
  const std::vector<Raster> images = {render_scene(SceneSpec{})};
  const std::vector<std::string> ids = {"a"};
  try {
    remote_score_batch(requests(images, ids), server.endpoint(), opts);
    FAIL("expected RemoteError");
  } catch (const RemoteError& e) {
    CHECK(e.kind() == RemoteErrorKind::timeout);
    CHECK(e.attempts() == 1);
  }
}

TEST_CASE("remote scorer drives a full evaluation") {
  MockServer server([](const json& req, httplib::Response& res) {
    res.set_content(constant_scores(req, 0.5).dump(), "application/json");
  });
  const auto m = generate_dataset(30, 42);
  const auto v = generate_adversarial_set(m, 42);
  EvalConfig c;
  RemoteScorer remote(server.endpoint(), quick());
  ConstantScorer constant(0.5);
  const ImageSource images(m);
  const auto a = evaluate(remote, m, v, c, images);
  const auto b = evaluate(constant, m, v, c, images);
  CHECK(a.tau == b.tau);
  CHECK(a.avg_drop == b.avg_drop);
  CHECK(a.tdi.tdi == 0.0);
}
