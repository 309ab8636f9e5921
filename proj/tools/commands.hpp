#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace edt::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kLawViolation = 2,
  kConfigError = 3,
  kMissingArtifact = 4,
};

class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flags collected by the argument parser. Anything left unset falls back to
/// the config file, then to built-in defaults.
struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> sets;  // extra key=value overrides

  std::optional<std::string> split;
  std::optional<std::string> dataset;
  std::string arm = "edt";
  std::optional<double> l0, l1, l2, l3;
  bool no_aug = false;
  std::optional<std::string> augmenters;
  std::optional<std::string> predictor;
  std::optional<std::string> arms;
  std::optional<std::size_t> seed_count;
  std::optional<std::size_t> workers;
  std::optional<std::string> table;
};

/// Runs one command and returns its exit code. Expected failures (bad config,
/// missing files, law violations) are reported on `err`, not thrown.
int run_command(const std::string& command, const Options& opt, std::ostream& out, std::ostream& err);

}  // namespace edt::cli
