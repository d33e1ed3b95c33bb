#pragma once

#include <functional>
#include <string>

#include "phasenas/generation.hpp"

namespace phasenas {

// Remote endpoint settings. model_explore and model_refine may differ; the
// small-vs-large capability split is configuration, not code. The API key is
// read from the environment unless the config supplies one, and must never
// surface in prompts, logs or results.
struct EndpointConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string model_explore;
  std::string model_refine;
  double temperature_explore = 1.0;
  double temperature_refine = 0.2;
  int timeout_seconds = 60;
  int max_retries = 2;  // total requests <= max_retries + 1
  std::string api_key;
};

inline constexpr const char* kApiKeyEnvVar = "PHASENAS_API_KEY";
inline constexpr const char* kBaseUrlEnvVar = "PHASENAS_BASE_URL";

// Fills empty api_key / base_url fields from the environment; explicit
// config values win.
EndpointConfig endpoint_from_env(EndpointConfig config);

struct HttpRequest {
  std::string url;   // full request URL
  std::string body;  // JSON payload
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string error;  // non-empty on transport-level failure

  bool ok() const { return error.empty() && status >= 200 && status < 300; }
};

using Transport = std::function<HttpResponse(const HttpRequest&)>;

// Real HTTP transport (POST with bearer auth). The key stays inside the
// closure so requests handed to recorded transports never carry it.
Transport make_http_transport(const EndpointConfig& config);

// OpenAI-compatible chat-completions client. Each generate() call posts the
// built prompt, extracts the DSL from choices[0].message.content, then
// parses and validates it; on failure the prompt is re-issued with the error
// appended as corrective feedback, up to max_retries extra attempts.
class LlmGenerator : public ArchitectureGenerator {
 public:
  explicit LlmGenerator(EndpointConfig config, Transport transport = {});

  GeneratorResult generate(const GenerationContext& ctx) override;
  std::string name() const override;

 private:
  EndpointConfig config_;
  Transport transport_;
};

}  // namespace phasenas
