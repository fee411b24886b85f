#ifndef VOXELFLOW_TOOLS_CLI_HPP
#define VOXELFLOW_TOOLS_CLI_HPP

#include <string>
#include <vector>

namespace voxelflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace voxelflow::cli

#endif  // VOXELFLOW_TOOLS_CLI_HPP
