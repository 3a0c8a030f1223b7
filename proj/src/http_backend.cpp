#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "visrank/backend.hpp"

namespace visrank {

namespace {

std::string base64_encode(const std::string& data) {
  static const char* kAlphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < data.size()) {
    std::uint32_t v = (static_cast<unsigned char>(data[i]) << 16) |
                      (static_cast<unsigned char>(data[i + 1]) << 8) |
                      static_cast<unsigned char>(data[i + 2]);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
    i += 3;
  }
  if (i + 1 == data.size()) {
    std::uint32_t v = static_cast<unsigned char>(data[i]) << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == data.size()) {
    std::uint32_t v = (static_cast<unsigned char>(data[i]) << 16) |
                      (static_cast<unsigned char>(data[i + 1]) << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  int buffer = 0, bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    int v = value_of(c);
    if (v < 0) raise(ErrorCode::BackendError, "invalid base64 payload");
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xff));
    }
  }
  return out;
}

class HttpBackend : public Backend {
 public:
  HttpBackend(const BackendHandle& handle, std::string media_root)
      : handle_(handle), media_root_(std::move(media_root)), client_(handle.endpoint) {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(handle.timeout);
    const time_t s = std::max<time_t>(1, secs.count());
    client_.set_connection_timeout(s, 0);
    client_.set_read_timeout(s, 0);
    client_.set_write_timeout(s, 0);
    if (const char* key = std::getenv("VISRANK_API_KEY")) {
      client_.set_default_headers({{"Authorization", std::string("Bearer ") + key}});
    }
  }

  double loglikelihood(const std::string& media_ref, const std::string& question,
                       const std::string& answer) override {
    nlohmann::json body = {{"model", handle_.model_name},
                           {"image_b64", load_media_b64(media_ref)},
                           {"prompt", question},
                           {"continuation", answer}};
    nlohmann::json reply = post("/v1/loglikelihood", body);
    if (!reply.contains("logprob") || !reply["logprob"].is_number()) {
      raise(ErrorCode::BackendError, "loglikelihood reply missing numeric 'logprob'");
    }
    return reply["logprob"].get<double>();
  }

  std::vector<double> embed_text(const std::string& text) override {
    return parse_vector(post("/v1/embed", {{"model", handle_.model_name}, {"text", text}}));
  }

  std::vector<double> embed_image(const std::string& media_ref) override {
    return parse_vector(post(
        "/v1/embed", {{"model", handle_.model_name}, {"image_b64", load_media_b64(media_ref)}}));
  }

  std::string generate_text(const std::string& prompt) override {
    nlohmann::json reply =
        post("/v1/generate", {{"model", handle_.model_name}, {"prompt", prompt}});
    if (!reply.contains("text") || !reply["text"].is_string()) {
      raise(ErrorCode::BackendError, "generate reply missing string 'text'");
    }
    return reply["text"].get<std::string>();
  }

  std::vector<std::optional<std::string>> generate_images(const std::string& prompt,
                                                          int n) override {
    nlohmann::json reply = post("/v1/images", {{"prompt", prompt}, {"n", n}});
    if (!reply.contains("images_b64") || !reply["images_b64"].is_array()) {
      raise(ErrorCode::BackendError, "images reply missing 'images_b64' array");
    }
    std::vector<std::optional<std::string>> out;
    for (const auto& entry : reply["images_b64"]) {
      if (entry.is_null()) {
        out.emplace_back(std::nullopt);
      } else if (entry.is_string()) {
        out.emplace_back(base64_decode(entry.get<std::string>()));
      } else {
        raise(ErrorCode::BackendError, "images_b64 entries must be base64 strings or null");
      }
    }
    return out;
  }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    auto result = client_.Post(path, body.dump(), "application/json");
    if (!result) {
      switch (result.error()) {
        case httplib::Error::ConnectionTimeout:
        case httplib::Error::Read:
        case httplib::Error::Write:
          raise(ErrorCode::Timeout, handle_.endpoint + path);
        default:
          raise(ErrorCode::BackendUnavailable,
                handle_.endpoint + path + ": " + httplib::to_string(result.error()));
      }
    }
    if (result->status != 200) {
      raise(ErrorCode::BackendError,
            "status " + std::to_string(result->status) + ": " + result->body);
    }
    nlohmann::json reply = nlohmann::json::parse(result->body, nullptr, false);
    if (reply.is_discarded()) {
      raise(ErrorCode::BackendError, "reply is not valid JSON");
    }
    return reply;
  }

  static std::vector<double> parse_vector(const nlohmann::json& reply) {
    if (!reply.contains("vector") || !reply["vector"].is_array()) {
      raise(ErrorCode::BackendError, "embed reply missing 'vector' array");
    }
    std::vector<double> v;
    for (const auto& x : reply["vector"]) {
      if (!x.is_number()) raise(ErrorCode::BackendError, "non-numeric embedding component");
      v.push_back(x.get<double>());
    }
    return v;
  }

  std::string load_media_b64(const std::string& media_ref) {
    std::filesystem::path path(media_ref);
    if (path.is_relative() && !media_root_.empty()) {
      path = std::filesystem::path(media_root_) / path;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) {
      raise(ErrorCode::MissingFile, "cannot read media file " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return base64_encode(bytes);
  }

  BackendHandle handle_;
  std::string media_root_;
  httplib::Client client_;
};

}  // namespace

std::shared_ptr<Backend> make_http_backend(const BackendHandle& handle,
                                           const std::string& media_root) {
  return std::make_shared<HttpBackend>(handle, media_root);
}

}  // namespace visrank
