#pragma once

namespace treecut {

// Full command-line entry point. Returns the process exit code:
// 0 success, 2 validation failure, 1 I/O or format error.
int treecut_main(int argc, const char* const* argv);

}  // namespace treecut
