#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddopt/io.hpp"

namespace ddopt::cli {

struct Context {
  std::filesystem::path out_dir = ".";
  int jobs = 1;
  std::ostream* out = nullptr;  // human-readable summary; null silences it
};

/// Runs `command` on a fully resolved config, writes its outputs and a
/// `<command>.manifest.json` into ctx.out_dir and returns the manifest.
io::RunManifest run(const std::string& command, const nlohmann::json& config, const Context& ctx);

/// --out-dir if given, else $DDOPT_OUT_DIR, else the working directory.
std::filesystem::path resolve_out_dir(const std::string& flag);

/// Full command line entry point. Returns the process exit code: 0 on
/// success, 2 for usage or configuration errors, 3 for numerical failures.
int main_entry(int argc, const char* const* argv);
int main_entry(const std::vector<std::string>& args);

}  // namespace ddopt::cli
