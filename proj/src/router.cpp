// SPDX-License-Identifier: Apache-2.0
#include "mctk/router.hpp"

namespace mctk {

BranchMask parse_branch_mask(std::string_view text) {
  if (text.size() != kBranchCount) {
    throw ArgumentError("branch mask must have 4 characters (reference, shading, motion, audio), got '" +
                        std::string(text) + "'");
  }
  BranchMask mask{};
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    if (text[k] == '1') {
      mask[k] = true;
    } else if (text[k] != '0') {
      throw ArgumentError("branch mask characters must be 0 or 1, got '" + std::string(text) + "'");
    }
  }
  return mask;
}

std::string branch_mask_string(const BranchMask& mask) {
  std::string s;
  for (const bool b : mask) s += b ? '1' : '0';
  return s;
}

}  // namespace mctk
