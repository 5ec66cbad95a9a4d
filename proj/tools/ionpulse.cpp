// ionpulse <command> --config <file> [--seed N] [--out DIR]

#include "ionpulse/errors.hpp"
#include "ionpulse/io/config.hpp"
#include "ionpulse/io/runner.hpp"
#include "ionpulse/io/tabular.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

namespace io = ionpulse::io;

int main(int argc, char** argv) {
  CLI::App app{"Pulsed-laser ion simulation, fitting and pulse scheduling"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "populations along one pulse train"},
      {"scan", "dark-state probability over detuning and pulse count"},
      {"burst", "single-pulse burst accumulation map"},
      {"ramsey", "Ramsey contrast and phase versus pulse count"},
      {"fit", "fit a protocol model to a data table"},
      {"ellipse", "pulse-to-pulse phases from interferometer areas"},
      {"schedule", "compile and validate picker and Pockels gates"},
      {"power", "harmonic conversion chain output"},
  };
  for (const auto& [name, description] : commands) {
    auto* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--seed", seed, "RNG seed, overrides the config");
    sub->add_option("--out", out_dir, "output directory, overrides the config");
  }

  CLI11_PARSE(app, argc, argv);
  const auto command = io::parse_command(app.get_subcommands().front()->get_name());

  io::RunConfig config;
  try {
    config = io::parse_config(io::read_text(config_path), command);
  } catch (const std::exception& e) {
    const int code = io::exit_code_for(e);
    std::cerr << "ionpulse: " << e.what() << "\n";
    if (out_dir) {
      try {
        const char* type = dynamic_cast<const ionpulse::RangeError*>(&e)  ? "RangeError"
                           : dynamic_cast<const ionpulse::UnitError*>(&e) ? "UnitError"
                           : code == io::kExitSchema                      ? "SchemaError"
                                                                          : "IoError";
        io::write_error_summary(*out_dir, io::to_string(command), code, type, e.what());
      } catch (const std::exception&) {
      }
    }
    return code;
  }
  if (seed) config.seed = *seed;
  if (out_dir) config.output_dir = *out_dir;

  const auto outcome = io::run(config);
  if (outcome.exit_code != io::kExitOk) {
    std::cerr << "ionpulse: " << outcome.message << "\n";
    return outcome.exit_code;
  }
  for (const auto& f : outcome.files) std::cout << f.string() << "\n";
  return 0;
}
