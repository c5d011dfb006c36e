#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sdfsplat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. args[0] is the program name.
int run(const std::vector<std::string>& args);

/// Git blob id: SHA-1 of "blob <size>\0" followed by the file bytes.
std::string git_blob_hash(const std::filesystem::path& path);

}  // namespace sdfsplat::cli
