#ifndef FEWATOM_CLI_HPP
#define FEWATOM_CLI_HPP

#include <iosfwd>

namespace fewatom {

/// Environment variable that overrides the configured output directory
/// (a --out flag still wins).
inline constexpr const char* kOutputDirEnv = "FEWATOM_OUTPUT_DIR";

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace fewatom

#endif // FEWATOM_CLI_HPP
