#include "blindbench/llmclient.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "blindbench/synthetic.hpp"
#include "blindbench/text.hpp"

namespace blindbench {

std::string_view to_string(Provider p) {
  switch (p) {
    case Provider::kOpenAICompatible: return "openai";
    case Provider::kOpenRouterCompatible: return "openrouter";
    case Provider::kSynthetic: return "synthetic";
  }
  return "synthetic";
}

std::optional<Provider> provider_from_string(std::string_view s) {
  if (s == "openai") return Provider::kOpenAICompatible;
  if (s == "openrouter") return Provider::kOpenRouterCompatible;
  if (s == "synthetic") return Provider::kSynthetic;
  return std::nullopt;
}

std::string_view to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kMemorizer: return "memorizer";
    case SyntheticKind::kPriorModel: return "prior-model";
    case SyntheticKind::kIclRegressor: return "icl-regressor";
    case SyntheticKind::kSilent: return "silent";
  }
  return "silent";
}

std::optional<SyntheticKind> synthetic_kind_from_string(std::string_view s) {
  if (s == "memorizer") return SyntheticKind::kMemorizer;
  if (s == "prior-model") return SyntheticKind::kPriorModel;
  if (s == "icl-regressor") return SyntheticKind::kIclRegressor;
  if (s == "silent") return SyntheticKind::kSilent;
  return std::nullopt;
}

nlohmann::json to_json(const ChatExchange& e) {
  nlohmann::json request = nlohmann::json::array();
  for (const auto& m : e.request) request.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json j = {{"request", std::move(request)},
                      {"response", e.response},
                      {"latency_ms", e.latency.count()},
                      {"attempts", e.attempt_count}};
  if (e.usage) {
    j["usage"] = {{"prompt_tokens", e.usage->prompt},
                  {"completion_tokens", e.usage->completion}};
  } else {
    j["usage"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------

std::chrono::nanoseconds SystemClock::now() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::steady_clock::now().time_since_epoch());
}

void SystemClock::sleep_for(std::chrono::nanoseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

std::chrono::nanoseconds VirtualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_for(std::chrono::nanoseconds d) {
  if (d.count() <= 0) return;
  std::lock_guard lock(mu_);
  now_ += d;
  slept_ += d;
}

std::chrono::nanoseconds VirtualClock::total_slept() const {
  std::lock_guard lock(mu_);
  return slept_;
}

RateLimiter::RateLimiter(int requests_per_minute, std::shared_ptr<Clock> clock)
    : limit_(requests_per_minute), clock_(std::move(clock)) {}

void RateLimiter::acquire() {
  if (limit_ <= 0) return;
  constexpr std::chrono::nanoseconds window = std::chrono::minutes(1);
  std::lock_guard lock(mu_);
  for (;;) {
    const auto now = clock_->now();
    while (!window_.empty() && now - window_.front() >= window) window_.pop_front();
    if (static_cast<int>(window_.size()) < limit_) {
      window_.push_back(now);
      return;
    }
    clock_->sleep_for(window_.front() + window - now);
  }
}

std::chrono::milliseconds RetryPolicy::delay_for(int attempt, Prng& rng) const {
  double d = static_cast<double>(initial_delay.count()) *
             std::pow(backoff_factor, std::max(0, attempt - 1));
  d = std::min(d, static_cast<double>(max_delay.count()));
  if (jitter > 0.0) d *= 1.0 + jitter * (2.0 * uniform_unit(rng) - 1.0);
  return std::chrono::milliseconds(static_cast<long long>(std::max(0.0, d)));
}

// ---------------------------------------------------------------------------

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ProviderError(0, "bad url: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

}  // namespace

HttpResponse HttplibTransport::post(const HttpRequest& request) {
  const auto parts = split_url(request.url);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(request.timeout);
  client.set_write_timeout(request.timeout);
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  HttpResponse out;
  auto res = client.Post(parts.path, headers, request.body, "application/json");
  if (!res) {
    out.transport_error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  for (const auto& [k, v] : res->headers) out.headers[to_lower(k)] = v;
  return out;
}

std::map<std::string, ProviderConfig> default_providers() {
  std::map<std::string, ProviderConfig> out;
  ProviderConfig openai;
  openai.name = "openai";
  openai.base_url = "https://api.openai.com/v1";
  openai.api_key_env = "BLINDBENCH_OPENAI_API_KEY";
  openai.base_url_env = "BLINDBENCH_OPENAI_BASE_URL";
  out[openai.name] = openai;

  ProviderConfig openrouter;
  openrouter.name = "openrouter";
  openrouter.base_url = "https://openrouter.ai/api/v1";
  openrouter.api_key_env = "BLINDBENCH_OPENROUTER_API_KEY";
  openrouter.base_url_env = "BLINDBENCH_OPENROUTER_BASE_URL";
  out[openrouter.name] = openrouter;
  return out;
}

nlohmann::json build_request_body(const ModelSpec& spec,
                                  std::span<const ChatMessage> messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body = {{"model", spec.model_id}, {"messages", std::move(msgs)}};
  if (spec.supports_sampling_params) {
    if (spec.temperature) body["temperature"] = *spec.temperature;
    if (spec.top_p) body["top_p"] = *spec.top_p;
  }
  if (spec.max_output_tokens) body["max_tokens"] = *spec.max_output_tokens;
  if (spec.reasoning_effort) body["reasoning_effort"] = *spec.reasoning_effort;
  return body;
}

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
}

// ---------------------------------------------------------------------------

ChatClient::ChatClient(std::map<std::string, ProviderConfig> providers,
                       std::shared_ptr<HttpTransport> transport,
                       std::shared_ptr<Clock> clock, EnvLookup env,
                       std::uint64_t jitter_seed)
    : providers_(std::move(providers)),
      transport_(transport ? std::move(transport) : std::make_shared<HttplibTransport>()),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
      env_(std::move(env)),
      jitter_rng_(jitter_seed) {}

std::size_t ChatClient::request_count() const {
  std::lock_guard lock(mu_);
  return requests_;
}

RateLimiter& ChatClient::limiter_for(const ProviderConfig& cfg) {
  std::lock_guard lock(mu_);
  auto& slot = limiters_[cfg.name];
  if (!slot) slot = std::make_unique<RateLimiter>(cfg.requests_per_minute, clock_);
  return *slot;
}

ChatExchange ChatClient::complete(const ModelSpec& spec,
                                  std::span<const ChatMessage> messages) {
  {
    std::lock_guard lock(mu_);
    ++requests_;
  }
  if (spec.provider == Provider::kSynthetic) {
    if (!spec.synthetic) throw ProviderError(0, "synthetic model without backend spec");
    ChatExchange ex;
    ex.request.assign(messages.begin(), messages.end());
    ex.response = synthetic_reply(*spec.synthetic, messages);
    return ex;
  }
  return complete_live(spec, messages);
}

namespace {

bool retryable(int status) {
  return status == 0 || status == 408 || status == 429 || (status >= 500 && status <= 599);
}

std::optional<std::chrono::milliseconds> retry_after(const HttpResponse& r) {
  const auto it = r.headers.find("retry-after");
  if (it == r.headers.end()) return std::nullopt;
  const auto v = parse_double(it->second);
  if (!v || *v < 0.0) return std::nullopt;
  return std::chrono::milliseconds(static_cast<long long>(*v * 1000.0));
}

std::string describe(const HttpResponse& r) {
  if (r.status == 0) return "transport failure: " + r.transport_error;
  std::string body = r.body.size() > 500 ? r.body.substr(0, 500) + "..." : r.body;
  return "HTTP " + std::to_string(r.status) + ": " + body;
}

}  // namespace

ChatExchange ChatClient::complete_live(const ModelSpec& spec,
                                       std::span<const ChatMessage> messages) {
  std::string name = spec.provider_name;
  if (name.empty()) name = std::string(to_string(spec.provider));
  const auto pit = providers_.find(name);
  if (pit == providers_.end()) throw ProviderError(0, "unknown provider '" + name + "'");
  const ProviderConfig& cfg = pit->second;

  std::optional<std::string> key;
  if (!cfg.api_key_env.empty()) key = env_(cfg.api_key_env);
  if (!key) throw CredentialError("missing API key in " + cfg.api_key_env);
  std::string base = cfg.base_url;
  if (!cfg.base_url_env.empty()) {
    if (auto b = env_(cfg.base_url_env)) base = *b;
  }
  while (!base.empty() && base.back() == '/') base.pop_back();

  HttpRequest req;
  req.url = base + cfg.endpoint_path;
  req.headers.emplace_back(cfg.auth_header, cfg.auth_prefix + *key);
  for (const auto& [k, v] : cfg.extra_headers) req.headers.emplace_back(k, v);
  req.body = build_request_body(spec, messages).dump();
  req.timeout = cfg.timeout;

  auto& limiter = limiter_for(cfg);
  const int max_attempts = std::max(1, cfg.retry.max_attempts);
  HttpResponse res;
  for (int attempt = 1;; ++attempt) {
    limiter.acquire();
    const auto start = clock_->now();
    res = transport_->post(req);
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(clock_->now() - start);

    if (res.status == 200) {
      const auto j = nlohmann::json::parse(res.body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
          j["choices"].empty()) {
        throw ProviderError(res.status, "malformed completion: " + describe(res));
      }
      const auto& choice = j["choices"][0];
      const auto& msg = choice.value("message", nlohmann::json::object());
      if (choice.value("finish_reason", nlohmann::json()) == "content_filter" ||
          (msg.contains("refusal") && !msg["refusal"].is_null())) {
        throw RefusalError(res.body);
      }
      ChatExchange ex;
      ex.request.assign(messages.begin(), messages.end());
      if (msg.contains("content") && msg["content"].is_string()) {
        ex.response = msg["content"].get<std::string>();
      }
      ex.latency = latency;
      ex.attempt_count = attempt;
      if (j.contains("usage") && j["usage"].is_object()) {
        TokenUsage u;
        u.prompt = j["usage"].value("prompt_tokens", 0L);
        u.completion = j["usage"].value("completion_tokens", 0L);
        ex.usage = u;
      }
      return ex;
    }
    if (res.status == 401 || res.status == 403) throw CredentialError(describe(res));
    if (!retryable(res.status)) throw ProviderError(res.status, describe(res));
    if (attempt >= max_attempts) {
      throw TransientExhaustedError(
          res.status, "gave up after " + std::to_string(attempt) + " attempts; " + describe(res));
    }
    std::chrono::milliseconds delay;
    {
      std::lock_guard lock(mu_);
      delay = cfg.retry.delay_for(attempt, jitter_rng_);
    }
    if (auto ra = retry_after(res)) delay = std::max(delay, *ra);
    clock_->sleep_for(delay);
  }
}

TwoPhaseResult run_two_phase(ChatClient& client, const ModelSpec& spec,
                             const PromptBundle& bundle) {
  std::vector<ChatMessage> history{{"system", bundle.system}};
  TwoPhaseResult out;
  if (bundle.analysis) {
    if (bundle.sample_list) history.push_back({"user", *bundle.sample_list});
    history.push_back({"user", *bundle.analysis});
    out.analysis = client.complete(spec, history);
    history.push_back({"assistant", out.analysis->response});
  }
  history.push_back({"user", bundle.prediction});
  try {
    out.prediction = client.complete(spec, history);
  } catch (const Error& e) {
    if (!out.analysis) throw;
    throw PredictionPhaseError(*out.analysis, std::current_exception(), e.what());
  }
  return out;
}

}  // namespace blindbench
