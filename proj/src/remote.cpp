#include "xmodal/remote.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>

#include "xmodal/png_io.hpp"

namespace xmodal {
namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

httplib::Client make_client(const std::string& endpoint, const RemoteOptions& options) {
  httplib::Client client(endpoint);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  return client;
}

RemoteError transport_error(httplib::Error err, const std::string& endpoint) {
  const auto kind = (err == httplib::Error::Read || err == httplib::Error::Write ||
                     err == httplib::Error::ConnectionTimeout)
                        ? RemoteErrorKind::timeout
                        : RemoteErrorKind::connection;
  return RemoteError(kind, endpoint + ": " + httplib::to_string(err));
}

template <typename Fn>
auto with_retries(const RemoteOptions& options, Fn&& attempt) {
  const int attempts = std::max(0, options.retries) + 1;
  for (int i = 1;; ++i) {
    try {
      return attempt();
    } catch (const RemoteError& e) {
      if (i >= attempts) throw RemoteError(e.kind(), e.what(), i);
    }
  }
}

Handshake handshake_once(const std::string& endpoint, const RemoteOptions& options) {
  auto client = make_client(endpoint, options);
  auto res = client.Get("/healthz");
  if (!res) throw transport_error(res.error(), endpoint);
  if (res->status != 200) {
    throw RemoteError(RemoteErrorKind::http_status,
                      endpoint + "/healthz: HTTP " + std::to_string(res->status));
  }
  try {
    const auto doc = nlohmann::json::parse(res->body);
    Handshake h;
    if (doc.at("status").get<std::string>() != "ok") {
      throw RemoteError(RemoteErrorKind::malformed_response, endpoint + ": service not ok");
    }
    h.model = doc.value("model", std::string{});
    const auto& range = doc.at("score_range");
    h.range_lo = range.at(0).get<double>();
    h.range_hi = range.at(1).get<double>();
    if (!(h.range_hi > h.range_lo)) {
      throw RemoteError(RemoteErrorKind::malformed_response, endpoint + ": empty score_range");
    }
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(RemoteErrorKind::malformed_response,
                      endpoint + "/healthz: " + std::string(e.what()));
  }
}

std::vector<PairScore> score_once(const std::string& body, std::span<const ScoreRequest> batch,
                                  const std::string& endpoint, const RemoteOptions& options) {
  const Handshake h = handshake_once(endpoint, options);
  auto client = make_client(endpoint, options);
  auto res = client.Post("/score", body, "application/json");
  if (!res) throw transport_error(res.error(), endpoint);
  if (res->status != 200) {
    throw RemoteError(RemoteErrorKind::http_status,
                      endpoint + "/score: HTTP " + std::to_string(res->status));
  }
  std::vector<PairScore> out;
  try {
    const auto doc = nlohmann::json::parse(res->body);
    const auto& scores = doc.at("scores");
    if (!scores.is_array() || scores.size() != batch.size()) {
      throw RemoteError(RemoteErrorKind::malformed_response,
                        endpoint + "/score: expected " + std::to_string(batch.size()) +
                            " scores, got " + std::to_string(scores.size()));
    }
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto id = scores[i].at("id").get<std::string>();
      if (id != batch[i].pair_id) {
        throw RemoteError(RemoteErrorKind::malformed_response,
                          endpoint + "/score: id mismatch at position " + std::to_string(i));
      }
      const double raw = scores[i].at("score").get<double>();
      const double mapped = (raw - h.range_lo) / (h.range_hi - h.range_lo);
      out.push_back({id, std::clamp(mapped, 0.0, 1.0)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(RemoteErrorKind::malformed_response,
                      endpoint + "/score: " + std::string(e.what()));
  }
  return out;
}

}  // namespace

std::string_view name(RemoteErrorKind kind) {
  switch (kind) {
    case RemoteErrorKind::connection: return "connection";
    case RemoteErrorKind::timeout: return "timeout";
    case RemoteErrorKind::malformed_response: return "malformed_response";
    case RemoteErrorKind::http_status: return "http_status";
  }
  return "connection";
}

RemoteOptions remote_options_from_env() {
  RemoteOptions options;
  if (const char* env = std::getenv("XMODAL_REMOTE_TIMEOUT_MS")) {
    char* end = nullptr;
    const long ms = std::strtol(env, &end, 10);
    if (end != env && ms > 0) options.timeout = std::chrono::milliseconds(ms);
  }
  return options;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::array<int, 256> table;
  table.fill(-1);
  for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kAlphabet[i])] = i;
  std::vector<std::uint8_t> out;
  std::uint32_t buf = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = table[static_cast<unsigned char>(c)];
    if (v < 0) throw std::invalid_argument("base64: invalid character");
    buf = (buf << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
    }
  }
  return out;
}

Handshake remote_handshake(const std::string& endpoint, const RemoteOptions& options) {
  return with_retries(options, [&] { return handshake_once(endpoint, options); });
}

std::vector<PairScore> remote_score_batch(std::span<const ScoreRequest> batch,
                                          const std::string& endpoint,
                                          const RemoteOptions& options) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& req : batch) {
    pairs.push_back({{"id", std::string(req.pair_id)},
                     {"image_png_base64", base64_encode(encode_png(*req.image))},
                     {"text", std::string(req.text)}});
  }
  const std::string body = nlohmann::json{{"pairs", std::move(pairs)}}.dump();
  return with_retries(options, [&] { return score_once(body, batch, endpoint, options); });
}

RemoteScorer::RemoteScorer(std::string endpoint, RemoteOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {}

double RemoteScorer::score(const Raster& image, std::string_view text, std::string_view pair_id) {
  const ScoreRequest req{pair_id, &image, text};
  return score_batch(std::span(&req, 1)).front();
}

std::vector<double> RemoteScorer::score_batch(std::span<const ScoreRequest> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  const std::size_t step = std::max<std::size_t>(1, options_.max_batch);
  for (std::size_t i = 0; i < batch.size(); i += step) {
    const auto chunk = batch.subspan(i, std::min(step, batch.size() - i));
    for (const auto& ps : remote_score_batch(chunk, endpoint_, options_)) out.push_back(ps.score);
  }
  return out;
}

}  // namespace xmodal
