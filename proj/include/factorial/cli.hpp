#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "factorial/error.hpp"

namespace factorial {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitIdentity = 3;

/// Environment variable supplying the default --seed.
inline constexpr const char* kSeedEnv = "FACTORIAL_SEED";

struct RunConfig {
  std::string command;
  std::string input;
  std::vector<std::string> factors;
  std::string outcome_column = "Y";
  std::string scheme = "equal";
  std::optional<std::vector<double>> delta;
  std::string model;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::optional<std::size_t> reps;
  bool exact = false;
  bool allow_mc = false;
  std::string out;
  std::optional<double> tol;
  unsigned threads = 1;

  // simulate
  std::string population = "constant";
  std::optional<std::size_t> n;
  std::vector<std::size_t> sizes;
  double noise = 1.0;

  // verify
  int k = 2;
  bool balanced = false;
  std::size_t per_cell = 5;
  double perturb = 0.0;
};

int exit_code_for(ErrorCode code) noexcept;

/// Parses argv, runs the command and writes JSON to `out` (or --out).
/// Diagnostics go to `err`. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace factorial
