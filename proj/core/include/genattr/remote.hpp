#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "genattr/models.hpp"

namespace genattr {

// Environment variable consulted when no endpoint is configured.
inline constexpr const char* kEndpointEnv = "GENATTR_ENDPOINT";

struct RemoteConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080; POSTs go to <endpoint>/generate
  std::size_t retries = 2;
  std::chrono::milliseconds timeout{30000};
  bool supports_logprobs = false;
  bool want_logprobs = false;

  // Fills an empty endpoint from the environment.
  static RemoteConfig from_env();
  static RemoteConfig from_env(RemoteConfig base);
};

struct RemoteRequest {
  std::string text;
  std::vector<int> mask;
  MaskMode mode = MaskMode::pad;
  bool want_logprobs = false;
};

// Wire encoding of one request (single JSON object).
std::string encode_request(const RemoteRequest& request);

/// Text-in/text-out HTTP client. Reentrant: every call opens its own
/// connection. Failed calls are retried at most `retries` times.
class RemoteGenerator : public Generator {
 public:
  RemoteGenerator(RemoteConfig config, std::shared_ptr<const Vocabulary> input_vocab);

  BackendDescriptor descriptor() const override;
  TokenId eos_token() const override { return Vocabulary::kEos; }
  std::string detokenize(std::span<const TokenId> tokens) const override;
  std::vector<TokenId> tokenize_answer(std::string_view text) const override;

  GenerationResult remote_generate(const RemoteRequest& request);

  const RemoteConfig& config() const noexcept { return config_; }

 protected:
  GenerationResult do_generate(const TokenSeq& x, const Mask& s, MaskMode mode) override;

 private:
  GenerationResult decode_response(const std::string& body, std::size_t attempts);

  RemoteConfig config_;
  std::shared_ptr<const Vocabulary> input_vocab_;
  mutable Vocabulary out_;
};

}  // namespace genattr
