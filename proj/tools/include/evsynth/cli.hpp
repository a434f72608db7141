#pragma once

// Command-line front end. run_cli is the whole program minus main(), so
// tests can drive it in-process.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evsynth::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kIoError = 1,
  kParseError = 2,
  kSemanticError = 3,
  kNotConverged = 4,
  kInitFailure = 5,
  kSolverFailure = 6,
};

/// Everything a run depends on; serialized into the manifest so `replay`
/// can repeat it.
struct Invocation {
  std::string command;  // check, simulate, fit, fit-joint
  std::filesystem::path config;
  std::vector<std::filesystem::path> data;
  std::optional<std::filesystem::path> prevalence_data;
  std::optional<std::filesystem::path> rate_data;
  std::optional<std::filesystem::path> truth;
  std::filesystem::path out;
  std::uint64_t seed = 1;
  std::size_t chains = 2;
  std::size_t iterations = 14000;
  std::size_t burn_in = 10000;
  std::size_t thin = 1;
  double rhat_threshold = 1.05;
  std::size_t strip_bins = 50;
  std::vector<std::string> strips;
  std::optional<std::uint64_t> sample_size;  // simulate: overrides binomial n
};

std::string manifest_json(const Invocation& inv, std::string_view started, std::string_view finished,
                          std::string_view status, int exit_code, const std::vector<std::string>& outputs);
/// Throws std::runtime_error on a malformed manifest.
Invocation parse_manifest(std::string_view text);

/// Executes one invocation; messages go to `out` / `err`.
int execute(const Invocation& inv, std::ostream& out, std::ostream& err);

/// Full command line, program name excluded.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evsynth::cli
