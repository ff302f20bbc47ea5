// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <iostream>
#include <string>

#include "commands.hpp"

namespace {

using namespace mctk;

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << "mctk: " << message << "\n";
  std::cout << Json{{"ok", false}, {"error", kind}, {"message", message}}.dump() << "\n";
}

/// --config has to be known before the option defaults are built.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  PipelineConfig cfg;
  try {
    const std::string path = find_config_path(argc, argv);
    if (!path.empty()) cfg = pipeline_config_from_json(read_json_file(path));
  } catch (const FormatError& e) {
    print_error("format", e.what());
    return cli::kFormat;
  } catch (const Error& e) {
    print_error("usage", e.what());
    return cli::kUsage;
  }

  CLI::App app{"mctk: multi-condition talking-head toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  std::string config_path;
  app.add_option("--config", config_path, "PipelineConfig JSON supplying option defaults");
  cli::Handler handler;
  cli::register_commands(app, cfg, handler);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return cli::kUsage;
  }

  try {
    cli::Outcome out = handler();
    out.result["ok"] = out.status == cli::kOk;
    std::cout << out.result.dump() << "\n";
    return out.status;
  } catch (const FormatError& e) {
    print_error("format", e.what());
    return cli::kFormat;
  } catch (const ShapeError& e) {
    print_error("format", e.what());
    return cli::kFormat;
  } catch (const NumericError& e) {
    print_error("numeric", e.what());
    return cli::kNumeric;
  } catch (const IoError& e) {
    print_error("io", e.what());
    return cli::kUsage;
  } catch (const Error& e) {
    print_error("usage", e.what());
    return cli::kUsage;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}
