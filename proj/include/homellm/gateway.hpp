#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "homellm/context.hpp"
#include "homellm/prompt.hpp"

namespace homellm {

enum class BackendKind { remote, mock };
enum class ApiStyle { completions, chat };

std::string_view to_string(BackendKind kind) noexcept;

/// Backend settings. The credential itself is never part of the config: only
/// the name of the environment variable that holds it.
struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string endpoint = "https://api.openai.com/v1/completions";
    std::string model_name = "text-davinci-003";
    std::string credential_env_var = "OPENAI_API_KEY";
    std::string credential_header = "Authorization";
    std::string credential_prefix = "Bearer ";
    ApiStyle api_style = ApiStyle::completions;
    double timeout_seconds = 60.0;
    std::size_t max_response_length = 16384;
    int max_tokens = 1024;
    std::vector<std::string> stop;
    bool retry_on_transport_error = false;

    /// Throws InvalidArgument.
    void validate() const;
};

BackendConfig backend_config_from_json(const Json& doc);
Json to_json(const BackendConfig& config);

struct Completion {
    std::string text;
    double latency_seconds = 0.0;
    BackendKind backend_kind = BackendKind::mock;
};

/// Deterministic rule-based stand-in for the model. Reads the device and user
/// context back out of the assembled prompt and returns a full
/// {"devices": ...} document. Throws UnparseablePrompt.
std::string mock_rules(const Prompt& prompt);
std::string mock_rules(std::string_view assembled_prompt);

using TextGenerator = std::function<std::string(const Prompt&)>;

class Gateway {
public:
    explicit Gateway(BackendConfig config);
    /// In-process backend driven by an arbitrary generator; reported as mock.
    Gateway(BackendConfig config, TextGenerator generator);

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Throws Timeout, AuthError, TransportError or OversizeResponse.
    Completion complete(const Prompt& prompt);

    int in_flight() const noexcept { return in_flight_.load(); }
    const BackendConfig& config() const noexcept { return config_; }

private:
    std::string remote_complete(const Prompt& prompt) const;

    BackendConfig config_;
    TextGenerator generator_;
    std::atomic<int> in_flight_{0};
};

Completion complete(const Prompt& prompt, const BackendConfig& config);

} // namespace homellm
