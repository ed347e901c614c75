#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blindbench/error.hpp"
#include "blindbench/promptgen.hpp"
#include "blindbench/rng.hpp"

namespace blindbench {

enum class Provider { kOpenAICompatible, kOpenRouterCompatible, kSynthetic };

std::string_view to_string(Provider p);
std::optional<Provider> provider_from_string(std::string_view s);

enum class SyntheticKind { kMemorizer, kPriorModel, kIclRegressor, kSilent };

std::string_view to_string(SyntheticKind k);
std::optional<SyntheticKind> synthetic_kind_from_string(std::string_view s);

/// Offline stand-ins for the capabilities a live model might use:
///  - memorizer answers from a table of original SMILES -> recorded label and
///    ignores everything else in the prompt;
///  - prior-model answers intercept + slope * token_count(test input) plus
///    seeded Gaussian noise, ignoring in-context examples;
///  - icl-regressor fits least squares of value on token count over the
///    examples present in the prompt;
///  - silent always answers with empty text.
struct SyntheticBackendSpec {
  SyntheticKind kind = SyntheticKind::kSilent;
  std::uint64_t seed = 0;
  double noise_scale = 0.0;
  double prior_intercept = 0.0;
  double prior_slope = 0.0;
  /// Original SMILES -> label text; filled by the runner per dataset.
  std::shared_ptr<const std::unordered_map<std::string, std::string>> lookup;
  std::string fallback = "unknown";
};

struct ModelSpec {
  Provider provider = Provider::kSynthetic;
  std::string model_id;
  std::optional<double> temperature;
  std::optional<double> top_p;
  /// When false, temperature and top_p are left out of requests entirely.
  bool supports_sampling_params = true;
  std::optional<int> max_output_tokens;
  std::optional<std::string> reasoning_effort;
  /// Key into the provider table; empty selects the default for `provider`.
  std::string provider_name;
  std::string family;
  std::string size;
  std::optional<SyntheticBackendSpec> synthetic;
};

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct TokenUsage {
  long prompt = 0;
  long completion = 0;
};

struct ChatExchange {
  std::vector<ChatMessage> request;
  /// Raw provider text, unmodified.
  std::string response;
  std::chrono::milliseconds latency{0};
  std::optional<TokenUsage> usage;
  int attempt_count = 1;
};

nlohmann::json to_json(const ChatExchange& e);

// ---------------------------------------------------------------------------
// Time

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::chrono::nanoseconds now() = 0;
  virtual void sleep_for(std::chrono::nanoseconds d) = 0;
};

class SystemClock : public Clock {
 public:
  std::chrono::nanoseconds now() override;
  void sleep_for(std::chrono::nanoseconds d) override;
};

/// Time only moves when someone sleeps.
class VirtualClock : public Clock {
 public:
  std::chrono::nanoseconds now() override;
  void sleep_for(std::chrono::nanoseconds d) override;
  std::chrono::nanoseconds total_slept() const;

 private:
  mutable std::mutex mu_;
  std::chrono::nanoseconds now_{0};
  std::chrono::nanoseconds slept_{0};
};

/// Sliding one-minute window; at most `requests_per_minute` acquisitions in
/// any 60 s span. Zero disables limiting.
class RateLimiter {
 public:
  RateLimiter(int requests_per_minute, std::shared_ptr<Clock> clock);
  void acquire();

 private:
  int limit_;
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::deque<std::chrono::nanoseconds> window_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{1000};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_delay{60000};
  /// Delay is scaled by a uniform factor in [1 - jitter, 1 + jitter].
  double jitter = 0.2;

  std::chrono::milliseconds delay_for(int attempt, Prng& rng) const;
};

// ---------------------------------------------------------------------------
// Transport

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::seconds timeout{300};
};

struct HttpResponse {
  /// 0 when no HTTP response arrived (connection failure, timeout).
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
  std::string transport_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib backed transport (HTTP and HTTPS).
class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override;
};

struct ProviderConfig {
  std::string name;
  std::string base_url;
  /// Appended to base_url; may carry a query string.
  std::string endpoint_path = "/chat/completions";
  std::string api_key_env;
  /// Optional variable overriding base_url.
  std::string base_url_env;
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::map<std::string, std::string> extra_headers;
  int requests_per_minute = 0;
  std::chrono::seconds timeout{300};
  RetryPolicy retry;
};

/// "openai" and "openrouter" entries reading BLINDBENCH_OPENAI_API_KEY /
/// BLINDBENCH_OPENAI_BASE_URL and BLINDBENCH_OPENROUTER_API_KEY /
/// BLINDBENCH_OPENROUTER_BASE_URL.
std::map<std::string, ProviderConfig> default_providers();

/// Chat-completions request body. Sampling fields are omitted when unset or
/// when the model does not accept them.
nlohmann::json build_request_body(const ModelSpec& spec,
                                  std::span<const ChatMessage> messages);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_environment();

class ChatClient {
 public:
  explicit ChatClient(std::map<std::string, ProviderConfig> providers = default_providers(),
                      std::shared_ptr<HttpTransport> transport = nullptr,
                      std::shared_ptr<Clock> clock = nullptr,
                      EnvLookup env = process_environment(),
                      std::uint64_t jitter_seed = 0x5eed);

  /// One chat completion with retries. Throws CredentialError,
  /// TransientExhaustedError, RefusalError or ProviderError.
  ChatExchange complete(const ModelSpec& spec, std::span<const ChatMessage> messages);

  /// Completions dispatched so far (synthetic included).
  std::size_t request_count() const;

 private:
  ChatExchange complete_live(const ModelSpec& spec, std::span<const ChatMessage> messages);
  RateLimiter& limiter_for(const ProviderConfig& cfg);

  std::map<std::string, ProviderConfig> providers_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<Clock> clock_;
  EnvLookup env_;

  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<RateLimiter>> limiters_;
  Prng jitter_rng_;
  std::size_t requests_ = 0;
};

struct TwoPhaseResult {
  std::optional<ChatExchange> analysis;
  ChatExchange prediction;
};

/// Raised when the prediction turn fails after the analysis turn succeeded;
/// keeps the analysis transcript.
class PredictionPhaseError : public Error {
 public:
  PredictionPhaseError(ChatExchange analysis, std::exception_ptr cause,
                       const std::string& what)
      : Error(what), analysis_(std::move(analysis)), cause_(std::move(cause)) {}
  const ChatExchange& analysis() const noexcept { return analysis_; }
  const std::exception_ptr& cause() const noexcept { return cause_; }

 private:
  ChatExchange analysis_;
  std::exception_ptr cause_;
};

/// system [+ sample list] + analysis -> reply -> prediction -> reply; a
/// bundle without an analysis message is a single system + prediction turn.
TwoPhaseResult run_two_phase(ChatClient& client, const ModelSpec& spec,
                             const PromptBundle& bundle);

}  // namespace blindbench
