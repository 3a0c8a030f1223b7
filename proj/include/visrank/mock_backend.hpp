#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "visrank/backend.hpp"

namespace visrank {

// Deterministic in-process backend. Without fixtures every operation is a
// pure function of (seed, inputs); fixtures override individual queries.
//
// Likelihood and embedding calls hash the media *reference* string, not the
// file contents, so mock runs need no image files on disk.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::uint64_t seed);

  // Fixture configuration (tests and replay files).
  void set_likelihood_fixture(const std::string& media_ref, const std::string& question,
                              const std::string& answer, double probability);
  void set_generation_fixture(const std::string& prompt, const std::string& text);
  void set_image_failure(const std::string& prompt, const std::vector<int>& failed_indices);
  void set_embedding_dim(std::size_t dim);
  void load_fixtures_file(const std::string& path);  // JSON, see README

  double loglikelihood(const std::string& media_ref, const std::string& question,
                       const std::string& answer) override;
  std::vector<double> embed_text(const std::string& text) override;
  std::vector<double> embed_image(const std::string& media_ref) override;
  std::string generate_text(const std::string& prompt) override;
  std::vector<std::optional<std::string>> generate_images(const std::string& prompt,
                                                          int n) override;

  std::uint64_t seed() const { return seed_; }
  // Total transport calls served; used by resume/idempotence tests.
  std::size_t call_count() const { return calls_.load(); }

 private:
  std::vector<double> derive_embedding(const std::string& tag, const std::string& input);

  std::uint64_t seed_;
  std::size_t embedding_dim_ = 16;
  std::map<std::string, double> likelihood_fixtures_;  // keyed media|question|answer
  std::map<std::string, std::string> generation_fixtures_;
  std::map<std::string, std::vector<int>> image_failures_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace visrank
