#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nn3d {

/// Dispatches `denoise`, `bench`, `make-fixtures` and `bm-dump`.
/// `args` excludes the program name. Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nn3d
