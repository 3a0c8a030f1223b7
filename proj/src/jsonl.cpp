#include "visrank/jsonl.hpp"

#include <filesystem>

namespace visrank::jsonl {

void for_each_record(const std::string& path,
                     const std::function<void(std::size_t, const nlohmann::json&)>& fn) {
  std::ifstream in(path);
  if (!in.is_open()) {
    raise(ErrorCode::MissingFile, "cannot open " + path);
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      raise(ErrorCode::MalformedRecord,
            path + " line " + std::to_string(line_no) + ": not a JSON object");
    }
    fn(line_no, record);
  }
}

Writer::Writer(const std::string& path, bool append) : path_(path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_.is_open()) {
    raise(ErrorCode::MissingFile, "cannot open " + path + " for writing");
  }
}

void Writer::write(const nlohmann::json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) {
    raise(ErrorCode::MissingFile, "write failed: " + path_);
  }
}

std::string require_string(const nlohmann::json& record, const char* key, std::size_t line) {
  if (!record.contains(key) || !record[key].is_string()) {
    raise(ErrorCode::MalformedRecord,
          "line " + std::to_string(line) + ": missing string field '" + key + "'");
  }
  return record[key].get<std::string>();
}

int require_int(const nlohmann::json& record, const char* key, std::size_t line) {
  if (!record.contains(key) || !record[key].is_number_integer()) {
    raise(ErrorCode::MalformedRecord,
          "line " + std::to_string(line) + ": missing integer field '" + key + "'");
  }
  return record[key].get<int>();
}

}  // namespace visrank::jsonl
