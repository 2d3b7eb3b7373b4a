#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace regvar {

/// Entry point of the `regvar` tool. `args` excludes the program name.
/// Returns 0 on success, 1 on usage/domain/configuration errors, 2 on numerical failure.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(const std::vector<std::string>& args);

} // namespace regvar
