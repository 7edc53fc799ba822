#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mplab {

// args excludes the program name. Returns 0 on success, 1 on usage or config
// errors, 2 on runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// --out, then the config's output dir, then $MPLAB_OUT_DIR, then ".".
std::filesystem::path resolve_output_dir(const std::optional<std::string>& flag, const std::string& config_dir);

}  // namespace mplab
