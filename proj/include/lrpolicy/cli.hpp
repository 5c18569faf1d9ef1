// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lrpolicy {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;  ///< diverged-only results, unmet target, bad data
inline constexpr int kExitUsage = 2;

/// Entry point of the lrtool command line. `args` excludes the program
/// name. Primary output goes to `out` (or --out), the resolved config and
/// diagnostics to `err`.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace lrpolicy
