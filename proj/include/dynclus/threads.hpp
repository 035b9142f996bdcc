#pragma once

#include <cstdlib>
#include <thread>

namespace dynclus {

// Worker-pool width: explicit argument, then DYNCLUS_THREADS, then hardware.
inline int resolveThreads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DYNCLUS_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace dynclus
