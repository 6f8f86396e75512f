#pragma once

namespace treecut {

// Reads TREECUT_THREADS and caps the OpenMP thread pool accordingly.
// Unset or 0 leaves the runtime default (auto).
void apply_thread_env();

int max_threads();

}  // namespace treecut
