// SPDX-License-Identifier: Apache-2.0
#include "mctk/parallel.hpp"

#include <cstdlib>
#include <string>

namespace mctk {

int threads_from_env() {
  const char* raw = std::getenv("MCTK_THREADS");
  if (raw == nullptr) return 1;
  try {
    const int n = std::stoi(raw);
    return n >= 1 ? n : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace mctk
