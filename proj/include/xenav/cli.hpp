#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

namespace xenav {

inline constexpr const char* kOutDirEnv = "XENAV_OUT_DIR";

/// Exit codes: 0 success, 1 runtime error, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `name` under $XENAV_OUT_DIR, or under the working directory when unset.
std::filesystem::path default_output(const std::string& name);

} // namespace xenav
