#include "genattr/remote.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "genattr/errors.hpp"
#include "genattr/text.hpp"

namespace genattr {
namespace {

using nlohmann::json;

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ContractViolation("endpoint must look like http://host:port, got '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  std::string base = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  e.path = base + "/generate";
  return e;
}

}  // namespace

RemoteConfig RemoteConfig::from_env() { return from_env(RemoteConfig{}); }

RemoteConfig RemoteConfig::from_env(RemoteConfig base) {
  if (base.endpoint.empty()) {
    if (const char* env = std::getenv(kEndpointEnv)) base.endpoint = env;
  }
  return base;
}

std::string encode_request(const RemoteRequest& request) {
  json j;
  j["text"] = request.text;
  j["mask"] = request.mask;
  j["mode"] = std::string(to_string(request.mode));
  j["want_logprobs"] = request.want_logprobs;
  return j.dump();
}

RemoteGenerator::RemoteGenerator(RemoteConfig config, std::shared_ptr<const Vocabulary> input_vocab)
    : config_(RemoteConfig::from_env(std::move(config))), input_vocab_(std::move(input_vocab)) {
  if (config_.endpoint.empty()) {
    throw ContractViolation(std::string("no remote endpoint configured (set ") + kEndpointEnv + ")");
  }
  parse_endpoint(config_.endpoint);
  if (!input_vocab_) throw ContractViolation("remote backend needs the input vocabulary");
}

BackendDescriptor RemoteGenerator::descriptor() const {
  return {"remote", config_.supports_logprobs, false, false, true};
}

std::vector<TokenId> RemoteGenerator::tokenize_answer(std::string_view text) const {
  return out_.encode(text);
}

std::string RemoteGenerator::detokenize(std::span<const TokenId> tokens) const {
  return out_.decode(tokens);
}

GenerationResult RemoteGenerator::decode_response(const std::string& body, std::size_t attempts) {
  auto malformed = [&](const std::string& why) {
    return TransportError(TransportError::Kind::malformed, 200, attempts,
                          "malformed response: " + why);
  };
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw malformed(e.what());
  }
  if (!j.is_object() || !j.contains("answer") || !j["answer"].is_string()) {
    throw malformed("missing string field 'answer'");
  }
  GenerationResult r;
  r.answer = j["answer"].get<std::string>();
  const bool need_logprobs = config_.supports_logprobs && config_.want_logprobs;
  if (j.contains("steps") && !j["steps"].is_null()) {
    if (!j["steps"].is_array()) throw malformed("'steps' must be an array");
    for (const auto& step : j["steps"]) {
      if (!step.is_object() || !step.contains("token") || !step["token"].is_string()) {
        throw malformed("step without string 'token'");
      }
      DecodeStep d;
      d.token = out_.intern(step["token"].get<std::string>());
      if (step.contains("logprob") && step["logprob"].is_number()) {
        d.logprob = step["logprob"].get<double>();
        if (*d.logprob > 0.0) throw malformed("positive log-probability");
      } else if (need_logprobs) {
        throw malformed("step without 'logprob'");
      }
      r.steps.push_back(d);
    }
  } else if (need_logprobs) {
    throw malformed("missing 'steps' with log-probabilities");
  }
  r.decoder_calls = r.steps.empty() ? split_words(r.answer).size() : r.steps.size();
  return r;
}

GenerationResult RemoteGenerator::remote_generate(const RemoteRequest& request) {
  const Endpoint ep = parse_endpoint(config_.endpoint);
  const std::string body = encode_request(request);
  const std::size_t max_attempts = config_.retries + 1;

  for (std::size_t attempt = 1;; ++attempt) {
    httplib::Client client(ep.scheme_host_port);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto res = client.Post(ep.path, body, "application/json");

    if (!res) {
      const auto err = res.error();
      const auto kind = err == httplib::Error::Read || err == httplib::Error::Write
                            ? TransportError::Kind::timeout
                            : TransportError::Kind::connection;
      if (attempt < max_attempts) continue;
      throw TransportError(kind, 0, attempt,
                           "request to " + config_.endpoint + " failed: " + httplib::to_string(err));
    }
    if (res->status >= 500 && attempt < max_attempts) continue;
    if (res->status != 200) {
      throw TransportError(TransportError::Kind::http_status, res->status, attempt,
                           "HTTP " + std::to_string(res->status) + " from " + config_.endpoint +
                               " after " + std::to_string(attempt) + " attempt(s)");
    }
    return decode_response(res->body, attempt);
  }
}

GenerationResult RemoteGenerator::do_generate(const TokenSeq& x, const Mask& s, MaskMode mode) {
  RemoteRequest request;
  request.text = input_vocab_->decode(x.tokens());
  request.mask.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) request.mask.push_back(s.test(i) ? 1 : 0);
  request.mode = mode;
  request.want_logprobs = config_.want_logprobs;
  return remote_generate(request);
}

}  // namespace genattr
