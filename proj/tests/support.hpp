// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "mctk/fusion.hpp"
#include "mctk/rng.hpp"
#include "mctk/tensor.hpp"

namespace mctk::testing {

template <typename T = float>
BasicTensor<T> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(scale * rng.normal());
  return t;
}

template <std::size_t N>
std::array<float, N> random_array(Rng& rng, double scale = 1.0) {
  std::array<float, N> a{};
  for (auto& v : a) v = static_cast<float>(scale * rng.normal());
  return a;
}

inline ParamStream random_stream(Rng& rng, std::size_t frames, double fps = 25.0) {
  ParamStream s;
  s.fps = fps;
  s.shape = random_array<kShapeDim>(rng, 0.5);
  s.camera = {static_cast<float>(rng.uniform(0.6, 0.9)), static_cast<float>(rng.uniform(-0.05, 0.05)),
              static_cast<float>(rng.uniform(-0.05, 0.05))};
  s.light = random_array<kLightDim>(rng, 0.1);
  for (std::size_t ch = 0; ch < 3; ++ch) s.light[ch * 9] = static_cast<float>(rng.uniform(1.5, 2.5));
  for (std::size_t t = 0; t < frames; ++t) {
    StreamFrame f;
    f.exp_spectre = random_array<kExpressionDim>(rng, 0.5);
    f.exp_deca_residual = random_array<kExpressionDim>(rng, 0.1);
    f.jaw_spectre = {static_cast<float>(rng.uniform(0.0, 0.3)), 0.0f, 0.0f};
    f.jaw_deca_residual = random_array<3>(rng, 0.01);
    f.head_rot = random_array<3>(rng, 0.2);
    s.frames.push_back(f);
  }
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("mctk_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct RunResult {
  int status = -1;
  std::string out;
};

/// Runs a shell command, capturing stdout; stderr is discarded.
inline RunResult run(const std::string& command, const std::string& env = "") {
  RunResult r;
  const std::string full = (env.empty() ? "" : env + " ") + command + " 2>/dev/null";
  FILE* pipe = ::popen(full.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

inline std::string cli() { return MCTK_CLI_PATH; }

inline std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace mctk::testing
