#include "treecut/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "treecut/errors.hpp"

namespace treecut {

void apply_thread_env() {
    const char* env = std::getenv("TREECUT_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0)
        throw invalid_parameter_error(
            std::string("TREECUT_THREADS must be a non-negative integer, got `") + env + "`");
    if (v == 0) return;  // auto
#ifdef _OPENMP
    omp_set_num_threads(static_cast<int>(v));
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace treecut
