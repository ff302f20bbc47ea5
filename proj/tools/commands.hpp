// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <CLI11.hpp>

#include "mctk/formats.hpp"

namespace mctk::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kFormat = 3, kNumeric = 4 };

/// Result line printed to stdout; `status` becomes the process exit code.
struct Outcome {
  Json result;
  int status = kOk;
};

using Handler = std::function<Outcome()>;

/// Adds every subcommand to `app`. Option defaults come from `cfg`; the
/// selected handler is stored in `selected`.
void register_commands(CLI::App& app, const PipelineConfig& cfg, Handler& selected);

}  // namespace mctk::cli
