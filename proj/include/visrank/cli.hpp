#pragma once

#include <string>
#include <vector>

#include "visrank/config.hpp"

namespace visrank::cli {

// 0 success, 2 input error, 3 insufficient data, 4 backend failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInsufficient = 3;
inline constexpr int kExitBackend = 4;

int exit_code_for(ErrorCode code);

int cmd_score(const RunConfig& config);
int cmd_metaeval(const RunConfig& config);
int cmd_rank(const RunConfig& config);
int cmd_report(const RunConfig& config);

// Full CLI: visrank <score|rank|metaeval|report> [--config path] [overrides].
int run(int argc, const char* const* argv);

}  // namespace visrank::cli
