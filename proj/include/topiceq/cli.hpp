#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace topiceq::cli {

/// Runs one `topiceq` command. Returns 0 on success, 1 on a usage error
/// (message on `err`) and 2 when the command fails on its data or model.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace topiceq::cli
