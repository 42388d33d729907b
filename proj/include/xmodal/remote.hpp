#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xmodal/scorers.hpp"

namespace xmodal {

enum class RemoteErrorKind { connection, timeout, malformed_response, http_status };

std::string_view name(RemoteErrorKind kind);

class RemoteError : public std::runtime_error {
 public:
  RemoteError(RemoteErrorKind kind, const std::string& message, int attempts = 1)
      : std::runtime_error(message), kind_(kind), attempts_(attempts) {}
  RemoteErrorKind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  RemoteErrorKind kind_;
  int attempts_;
};

struct RemoteOptions {
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
  std::size_t max_batch = 64;
};

/// Defaults, with the timeout taken from XMODAL_REMOTE_TIMEOUT_MS when set.
RemoteOptions remote_options_from_env();

struct Handshake {
  std::string model;
  double range_lo = 0.0;
  double range_hi = 1.0;
};

struct PairScore {
  std::string id;
  double score = 0.0;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// GET /healthz. Throws RemoteError.
Handshake remote_handshake(const std::string& endpoint, const RemoteOptions& options);

/// POST /score for one batch, all or nothing: each attempt either yields a
/// score for every pair (mapped affinely from the declared range to [0, 1])
/// or fails; failures are retried `retries` times before the last error is
/// rethrown.
std::vector<PairScore> remote_score_batch(std::span<const ScoreRequest> batch,
                                          const std::string& endpoint,
                                          const RemoteOptions& options);

/// Scorer backed by an external encoder service speaking the /healthz +
/// /score protocol.
class RemoteScorer : public Scorer {
 public:
  RemoteScorer(std::string endpoint, RemoteOptions options = remote_options_from_env());

  std::string name() const override { return "remote:" + endpoint_; }
  double score(const Raster& image, std::string_view text, std::string_view pair_id) override;
  std::vector<double> score_batch(std::span<const ScoreRequest> batch) override;

 private:
  std::string endpoint_;
  RemoteOptions options_;
};

}  // namespace xmodal
