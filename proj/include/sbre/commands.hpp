#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace sbre {

inline constexpr const char* kToolVersion = "1.0.0";

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit code (0 ok, 2 usage, 3 data,
/// 4 numeric, 1 anything else).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Input paths that are relative and missing from the working directory are
/// looked up under $SBRE_DATA_DIR when it is set.
std::string resolve_input(const std::string& path);

/// Fresh directory `<parent>/<UTC timestamp>-seed<seed>`, or `<parent>/<name>`
/// when a run name is given. Throws UsageError if a named run already exists.
std::string make_run_dir(const std::string& parent, std::uint64_t seed, const std::string& run_name);

}  // namespace sbre
