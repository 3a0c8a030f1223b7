#include "visrank/mock_backend.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "visrank/digest.hpp"

namespace visrank {

namespace {

std::string fixture_key(const std::string& media_ref, const std::string& question,
                        const std::string& answer) {
  return media_ref + "\x1f" + question + "\x1f" + answer;
}

}  // namespace

MockBackend::MockBackend(std::uint64_t seed) : seed_(seed) {}

void MockBackend::set_likelihood_fixture(const std::string& media_ref,
                                         const std::string& question,
                                         const std::string& answer, double probability) {
  likelihood_fixtures_[fixture_key(media_ref, question, answer)] = probability;
}

void MockBackend::set_generation_fixture(const std::string& prompt, const std::string& text) {
  generation_fixtures_[prompt] = text;
}

void MockBackend::set_image_failure(const std::string& prompt,
                                    const std::vector<int>& failed_indices) {
  image_failures_[prompt] = failed_indices;
}

void MockBackend::set_embedding_dim(std::size_t dim) {
  if (dim == 0) raise(ErrorCode::ConfigError, "embedding dim must be positive");
  embedding_dim_ = dim;
}

void MockBackend::load_fixtures_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) raise(ErrorCode::MissingFile, "cannot open fixtures file " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    raise(ErrorCode::ParseError, "fixtures file " + path + " is not a JSON object");
  }
  for (const auto& f : doc.value("likelihood", nlohmann::json::array())) {
    set_likelihood_fixture(f.at("media").get<std::string>(),
                           f.at("question").get<std::string>(),
                           f.at("answer").get<std::string>(),
                           f.at("probability").get<double>());
  }
  for (const auto& f : doc.value("generation", nlohmann::json::array())) {
    set_generation_fixture(f.at("prompt").get<std::string>(), f.at("text").get<std::string>());
  }
  for (const auto& f : doc.value("image_failures", nlohmann::json::array())) {
    set_image_failure(f.at("prompt").get<std::string>(),
                      f.at("failed_indices").get<std::vector<int>>());
  }
}

double MockBackend::loglikelihood(const std::string& media_ref, const std::string& question,
                                  const std::string& answer) {
  calls_.fetch_add(1);
  auto it = likelihood_fixtures_.find(fixture_key(media_ref, question, answer));
  if (it != likelihood_fixtures_.end()) {
    return std::log(it->second);
  }
  std::uint64_t h = digest::mix(seed_);
  h = digest::mix(h ^ digest::fnv1a(media_ref));
  h = digest::mix(h ^ digest::fnv1a(question));
  h = digest::mix(h ^ digest::fnv1a(answer));
  return std::log(digest::unit_interval(h));
}

std::vector<double> MockBackend::derive_embedding(const std::string& tag,
                                                  const std::string& input) {
  std::uint64_t state = digest::mix(seed_ ^ digest::fnv1a(tag));
  state = digest::mix(state ^ digest::fnv1a(input));
  std::vector<double> v(embedding_dim_);
  double norm_sq = 0.0;
  for (double& x : v) {
    state = digest::mix(state);
    x = 2.0 * digest::unit_interval(state) - 1.0;
    norm_sq += x * x;
  }
  double norm = std::sqrt(norm_sq);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<double> MockBackend::embed_text(const std::string& text) {
  calls_.fetch_add(1);
  return derive_embedding("text", text);
}

std::vector<double> MockBackend::embed_image(const std::string& media_ref) {
  calls_.fetch_add(1);
  return derive_embedding("image", media_ref);
}

std::string MockBackend::generate_text(const std::string& prompt) {
  calls_.fetch_add(1);
  auto it = generation_fixtures_.find(prompt);
  if (it == generation_fixtures_.end()) {
    raise(ErrorCode::EmptyGeneration, "no generation fixture for prompt digest " +
                                          digest::hex(digest::fnv1a(prompt)));
  }
  return it->second;
}

std::vector<std::optional<std::string>> MockBackend::generate_images(const std::string& prompt,
                                                                     int n) {
  calls_.fetch_add(1);
  std::vector<std::optional<std::string>> out;
  const auto failed = image_failures_.find(prompt);
  for (int i = 0; i < n; ++i) {
    if (failed != image_failures_.end()) {
      bool fails = false;
      for (int idx : failed->second) fails = fails || idx == i;
      if (fails) {
        out.emplace_back(std::nullopt);
        continue;
      }
    }
    std::uint64_t h = digest::mix(seed_ ^ digest::fnv1a(prompt));
    h = digest::mix(h + static_cast<std::uint64_t>(i));
    // Opaque deterministic payload standing in for image bytes.
    out.emplace_back("MOCKIMG:" + digest::hex(h) + ":" + std::to_string(i));
  }
  return out;
}

}  // namespace visrank
