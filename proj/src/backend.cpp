#include "visrank/backend.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "visrank/mock_backend.hpp"

namespace visrank {

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::likelihood: return "likelihood";
    case BackendKind::embedding: return "embedding";
    case BackendKind::generation: return "generation";
  }
  return "?";
}

BackendKind backend_kind_from_string(const std::string& name) {
  if (name == "likelihood") return BackendKind::likelihood;
  if (name == "embedding") return BackendKind::embedding;
  if (name == "generation") return BackendKind::generation;
  raise(ErrorCode::ConfigError, "unknown backend kind '" + name + "'");
}

bool is_mock_endpoint(const std::string& endpoint) {
  return endpoint.rfind("mock:", 0) == 0;
}

std::uint64_t mock_seed_of(const std::string& endpoint) {
  if (!is_mock_endpoint(endpoint)) {
    raise(ErrorCode::ConfigError, "not a mock endpoint: '" + endpoint + "'");
  }
  const std::string digits = endpoint.substr(5);
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    raise(ErrorCode::ConfigError, "mock endpoint requires a numeric seed: '" + endpoint + "'");
  }
  return std::stoull(digits);
}

std::shared_ptr<Backend> make_http_backend(const BackendHandle& handle,
                                           const std::string& media_root);  // http_backend.cpp

std::shared_ptr<Backend> make_backend(const BackendHandle& handle) {
  if (handle.endpoint.empty()) {
    raise(ErrorCode::ConfigError, "backend endpoint not configured");
  }
  if (is_mock_endpoint(handle.endpoint)) {
    return std::make_shared<MockBackend>(mock_seed_of(handle.endpoint));
  }
  return make_http_backend(handle, "");
}

BackendClient::BackendClient(BackendHandle handle)
    : handle_(std::move(handle)), transport_(make_backend(handle_)) {
  if (handle_.max_concurrency < 1) {
    raise(ErrorCode::ConfigError, "max_concurrency must be >= 1");
  }
}

BackendClient::BackendClient(BackendHandle handle, std::shared_ptr<Backend> transport)
    : handle_(std::move(handle)), transport_(std::move(transport)) {
  if (handle_.max_concurrency < 1) {
    raise(ErrorCode::ConfigError, "max_concurrency must be >= 1");
  }
}

void BackendClient::require_kind(BackendKind kind, const char* operation) const {
  if (handle_.kind != kind) {
    raise(ErrorCode::ConfigError, std::string(operation) + " requires a " +
                                      to_string(kind) + " handle, got " +
                                      to_string(handle_.kind));
  }
}

namespace {

bool is_transport_failure(const Error& e) {
  return e.code() == ErrorCode::BackendUnavailable || e.code() == ErrorCode::Timeout;
}

// One retry on transport failure, none on application errors.
template <typename Fn>
auto with_retry(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!is_transport_failure(e)) throw;
  }
  return fn();
}

}  // namespace

double BackendClient::answer_probability(const LikelihoodQuery& query) const {
  require_kind(BackendKind::likelihood, "answer_probability");
  if (query.media.size() != 1) {
    raise(ErrorCode::InvalidArgument,
          "likelihood query takes exactly one frame, got " + std::to_string(query.media.size()));
  }
  if (query.question.empty() || query.answer.empty()) {
    raise(ErrorCode::InvalidArgument, "likelihood query needs a question and an answer");
  }
  const double logprob = with_retry(
      [&] { return transport_->loglikelihood(query.media[0], query.question, query.answer); });
  const double p = std::exp(logprob);
  if (std::isnan(p)) {
    raise(ErrorCode::ProbabilityOutOfRange, "backend returned NaN log-probability");
  }
  if (p > 1.0) {
    if (p <= 1.0 + 1e-9) return 1.0;  // rounding overshoot from logprob ~ 0
    raise(ErrorCode::ProbabilityOutOfRange,
          "exp(logprob) = " + std::to_string(p) + " exceeds 1");
  }
  return p;
}

std::vector<double> BackendClient::embedding_of_text(const std::string& text) const {
  require_kind(BackendKind::embedding, "embedding_of_text");
  auto v = with_retry([&] { return transport_->embed_text(text); });
  for (double x : v) {
    if (!std::isfinite(x)) raise(ErrorCode::BackendError, "non-finite embedding component");
  }
  return v;
}

std::vector<double> BackendClient::embedding_of_image(const std::string& media_ref) const {
  require_kind(BackendKind::embedding, "embedding_of_image");
  auto v = with_retry([&] { return transport_->embed_image(media_ref); });
  for (double x : v) {
    if (!std::isfinite(x)) raise(ErrorCode::BackendError, "non-finite embedding component");
  }
  return v;
}

std::string BackendClient::text_generation(const std::string& prompt) const {
  require_kind(BackendKind::generation, "text_generation");
  std::string text = with_retry([&] { return transport_->generate_text(prompt); });
  if (text.empty()) raise(ErrorCode::EmptyGeneration, "backend returned empty text");
  return text;
}

std::vector<std::optional<std::string>> BackendClient::image_generation(
    const std::string& prompt, int n) const {
  require_kind(BackendKind::generation, "image_generation");
  if (n < 1) raise(ErrorCode::InvalidArgument, "image_generation needs n >= 1");
  auto images = with_retry([&] { return transport_->generate_images(prompt, n); });
  if (images.size() != static_cast<std::size_t>(n)) {
    raise(ErrorCode::BackendError, "backend returned " + std::to_string(images.size()) +
                                       " candidates, requested " + std::to_string(n));
  }
  return images;
}

std::vector<BatchResult<double>> BackendClient::batch_answer_probability(
    const std::vector<LikelihoodQuery>& queries) const {
  std::vector<BatchResult<double>> results(queries.size());
  if (queries.empty()) return results;

  auto work = [&](std::size_t i) {
    try {
      results[i].value = answer_probability(queries[i]);
    } catch (const Error& e) {
      results[i].error = e.what();
    } catch (const std::exception& e) {
      results[i].error = std::string("unexpected: ") + e.what();
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(handle_.max_concurrency), queries.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) work(i);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < queries.size(); i = next.fetch_add(1)) {
        work(i);
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace visrank
