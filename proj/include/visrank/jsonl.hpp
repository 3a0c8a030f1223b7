#pragma once

#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "visrank/errors.hpp"

namespace visrank::jsonl {

// Invokes fn(line_number, record) for every non-blank line.
// Throws MissingFile if the path cannot be opened and MalformedRecord
// (with the 1-based line number) on invalid JSON or a non-object record.
void for_each_record(const std::string& path,
                     const std::function<void(std::size_t, const nlohmann::json&)>& fn);

// One compact JSON object per line, flushed per record so interrupted
// runs can resume from the last complete line.
class Writer {
 public:
  explicit Writer(const std::string& path, bool append = false);
  void write(const nlohmann::json& record);

 private:
  std::ofstream out_;
  std::string path_;
};

// Field accessors that report schema problems as MalformedRecord(line).
std::string require_string(const nlohmann::json& record, const char* key, std::size_t line);
int require_int(const nlohmann::json& record, const char* key, std::size_t line);

}  // namespace visrank::jsonl
