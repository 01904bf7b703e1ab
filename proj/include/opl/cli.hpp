#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "opl/io.hpp"

namespace opl {

// Exit status: 0 success, 1 usage error, 2 numerical failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

// Runs a fully-resolved config (as written to config.json) into out_dir.
void run_config(const Json& config, const std::filesystem::path& out_dir, std::ostream& out);

}  // namespace opl
