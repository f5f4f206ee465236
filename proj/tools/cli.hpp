#ifndef NATLEARN_TOOLS_CLI_HPP
#define NATLEARN_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace natlearn::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kBadFlags = 2,
  kUnwritableOutput = 3,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "1,2,3" into integers; throws on malformed input.
std::vector<int> parse_int_list(const std::string& text);

/// Lines of "key=value" ('#' comments and blank lines ignored) turned into
/// "--key value" tokens ("--key" alone for true-valued switches).
std::vector<std::string> config_file_tokens(const std::string& path, const std::vector<std::string>& switches);

}  // namespace natlearn::cli

#endif  // NATLEARN_TOOLS_CLI_HPP
