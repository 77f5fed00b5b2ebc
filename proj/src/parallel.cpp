#include "fxd/parallel.hpp"

namespace fxd {

namespace {
int g_workers = 0;
}

int worker_count() {
    if (g_workers > 0) return g_workers;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_worker_count(int n) { g_workers = n > 0 ? n : 0; }

} // namespace fxd
