#include "phasenas/llm_client.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "phasenas/dsl.hpp"

namespace phasenas {

namespace {

using nlohmann::json;

// Splits a base URL into the scheme://host[:port] part httplib wants and an
// optional path prefix (e.g. "/v1").
void split_base_url(const std::string& base_url, std::string& host_part,
                    std::string& path_prefix) {
  const std::size_t scheme = base_url.find("://");
  const std::size_t path_start =
      base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    host_part = base_url;
    path_prefix.clear();
  } else {
    host_part = base_url.substr(0, path_start);
    path_prefix = base_url.substr(path_start);
    while (!path_prefix.empty() && path_prefix.back() == '/') {
      path_prefix.pop_back();
    }
  }
}

}  // namespace

EndpointConfig endpoint_from_env(EndpointConfig config) {
  if (config.api_key.empty()) {
    if (const char* key = std::getenv(kApiKeyEnvVar)) config.api_key = key;
  }
  if (config.base_url.empty()) {
    if (const char* url = std::getenv(kBaseUrlEnvVar)) config.base_url = url;
  }
  return config;
}

Transport make_http_transport(const EndpointConfig& config) {
  // The key is captured here and only ever becomes an Authorization header;
  // HttpRequest objects stay key-free.
  const std::string api_key = config.api_key;
  const int timeout = config.timeout_seconds;
  return [api_key, timeout](const HttpRequest& request) -> HttpResponse {
    std::string host_part, path_prefix;
    split_base_url(request.url, host_part, path_prefix);
    // request.url arrives as host + path; recover the path portion.
    std::string path = path_prefix;
    if (path.empty()) path = "/";

    httplib::Client client(host_part);
    client.set_connection_timeout(timeout, 0);
    client.set_read_timeout(timeout, 0);
    httplib::Headers headers;
    if (!api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key);
    }
    const httplib::Result result =
        client.Post(path, headers, request.body, "application/json");
    if (!result) {
      return {0, "", "transport: " + httplib::to_string(result.error())};
    }
    return {result->status, result->body, ""};
  };
}

LlmGenerator::LlmGenerator(EndpointConfig config, Transport transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (!transport_) transport_ = make_http_transport(config_);
}

std::string LlmGenerator::name() const {
  return "llm(" + config_.model_explore + "->" + config_.model_refine + ")";
}

GeneratorResult LlmGenerator::generate(const GenerationContext& ctx) {
  const bool exploring = ctx.phase == PhaseTag::Exploration;
  const std::string& model =
      exploring ? config_.model_explore : config_.model_refine;
  const double temperature =
      exploring ? config_.temperature_explore : config_.temperature_refine;

  std::vector<ChatMessage> conversation = build_prompt(ctx);

  GeneratorResult failure_result;
  failure_result.failure = GenerationFailure::Transport;

  const int max_attempts = config_.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    json payload;
    payload["model"] = model;
    payload["temperature"] = temperature;
    json messages = json::array();
    for (const ChatMessage& message : conversation) {
      messages.push_back({{"role", message.role}, {"content", message.content}});
    }
    payload["messages"] = std::move(messages);

    HttpRequest request{config_.base_url + "/chat/completions", payload.dump()};
    const HttpResponse response = transport_(request);
    failure_result.attempts = attempt;

    if (!response.ok()) {
      failure_result.failure = GenerationFailure::Transport;
      failure_result.error = response.error.empty()
                                 ? "HTTP " + std::to_string(response.status)
                                 : response.error;
      continue;  // same prompt; the endpoint never saw a usable request
    }

    std::string content;
    try {
      const json parsed = json::parse(response.body);
      content = parsed.at("choices").at(0).at("message").at("content")
                    .get<std::string>();
    } catch (const json::exception& err) {
      failure_result.failure = GenerationFailure::Transport;
      failure_result.error = std::string("malformed response: ") + err.what();
      continue;
    }
    failure_result.raw_text = content;

    std::string problem;
    const std::optional<std::string> extracted =
        extract_architecture(content, &problem);
    if (extracted) {
      try {
        const ArchitectureSpec arch = parse_architecture(*extracted, ctx.mode);
        const std::vector<ValidationError> errors =
            validate(arch, ctx.constraints);
        if (errors.empty()) {
          const std::vector<ConstraintViolation> violations =
              check(estimate(arch), ctx.constraints);
          if (violations.empty()) {
            return {content, *extracted, GenerationFailure::None, "", attempt};
          }
          problem = format_violation(violations.front());
        } else {
          problem = format_error(errors.front());
        }
      } catch (const ParseError& err) {
        problem = err.what();
      }
    }

    failure_result.failure = GenerationFailure::Extraction;
    failure_result.error = problem;
    conversation.push_back(
        {"user", "Your previous output failed: " + problem +
                     ". Emit only a corrected architecture."});
  }

  return failure_result;
}

}  // namespace phasenas
