#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "visrank/errors.hpp"

namespace visrank {

enum class BackendKind { likelihood, embedding, generation };

const char* to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& name);  // ConfigError

// Immutable description of one inference service. Endpoints are either an
// http URL or "mock:<seed>" for the deterministic in-process backend.
struct BackendHandle {
  BackendKind kind = BackendKind::likelihood;
  std::string endpoint;
  std::string model_name;
  std::chrono::milliseconds timeout{30000};
  int max_concurrency = 4;
};

bool is_mock_endpoint(const std::string& endpoint);
std::uint64_t mock_seed_of(const std::string& endpoint);  // ConfigError

struct LikelihoodQuery {
  std::vector<std::string> media;  // frame refs; scorers pass exactly one
  std::string question;
  std::string answer;
};

// Raw transport. Implementations: MockBackend (deterministic) and
// HttpBackend. All calls are synchronous; transport failures throw
// BackendUnavailable/Timeout, application failures throw BackendError.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual double loglikelihood(const std::string& media_ref, const std::string& question,
                               const std::string& answer) = 0;
  virtual std::vector<double> embed_text(const std::string& text) = 0;
  virtual std::vector<double> embed_image(const std::string& media_ref) = 0;
  virtual std::string generate_text(const std::string& prompt) = 0;
  // One entry per requested candidate; an empty optional marks a failed index.
  virtual std::vector<std::optional<std::string>> generate_images(const std::string& prompt,
                                                                  int n) = 0;
};

// Per-index outcome of a batched call. Failures are reported in place,
// never dropped, so results stay aligned with queries.
template <typename T>
struct BatchResult {
  std::optional<T> value;
  std::string error;  // empty iff ok

  bool ok() const { return value.has_value(); }
};

// Validated client over a handle: kind checks, log-prob -> probability
// conversion, one retry on transport failure, bounded-concurrency batching.
class BackendClient {
 public:
  explicit BackendClient(BackendHandle handle);
  BackendClient(BackendHandle handle, std::shared_ptr<Backend> transport);

  const BackendHandle& handle() const { return handle_; }
  Backend& transport() const { return *transport_; }

  // P(answer | media, question) = exp(logprob), clamped against rounding
  // overshoot; a genuinely out-of-range value raises ProbabilityOutOfRange.
  double answer_probability(const LikelihoodQuery& query) const;
  std::vector<double> embedding_of_text(const std::string& text) const;
  std::vector<double> embedding_of_image(const std::string& media_ref) const;
  std::string text_generation(const std::string& prompt) const;
  std::vector<std::optional<std::string>> image_generation(const std::string& prompt,
                                                           int n) const;

  // Results aligned index-for-index with queries; at most
  // handle().max_concurrency requests in flight.
  std::vector<BatchResult<double>> batch_answer_probability(
      const std::vector<LikelihoodQuery>& queries) const;

 private:
  void require_kind(BackendKind kind, const char* operation) const;

  BackendHandle handle_;
  std::shared_ptr<Backend> transport_;
};

// Builds the transport matching handle.endpoint.
std::shared_ptr<Backend> make_backend(const BackendHandle& handle);

// Http transport with relative media refs resolved against media_root.
std::shared_ptr<Backend> make_http_backend(const BackendHandle& handle,
                                           const std::string& media_root);

}  // namespace visrank
