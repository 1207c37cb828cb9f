#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "btpp/simulator.hpp"

namespace btpp {

/// Parse or validation failure; `line` is 0 when the problem is not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& message)
      : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Which algorithms receive the γ/n rescaling.
enum class RescalePolicy { none, all, btpp_only };

/// An experiment file:
///
///   [problem]    type, n, p, J, sigma_h, reg_coeff, kappa, noise_sigma, batch, seed
///   [topology]   B
///   [algorithm]  tag, schedule, gamma, rescale_by_n, decay_factor, decay_interval,
///                delta_f, sigma_sq, L, mu
///   [run]        T, seeds, stride, engine
///
/// `n`, `B`, `tag` and `seeds` accept comma-separated lists; integer lists also
/// accept `a..b` ranges. Unknown sections and keys are rejected.
struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<std::size_t> agents = {16};
  std::vector<std::size_t> branches = {2};
  std::vector<AlgorithmTag> algorithms = {AlgorithmTag::btpp};
  StepSizeSchedule schedule;
  RescalePolicy rescale = RescalePolicy::none;
  std::size_t iterations = 100;
  std::vector<std::uint64_t> seeds = {0};
  std::optional<std::uint64_t> problem_seed;
  std::size_t stride = 10;
  Engine engine = Engine::matrix;

  /// Cartesian product in (n, B, algorithm, seed) order. Baselines ignore B,
  /// so they appear once per n rather than once per B, and always use the
  /// matrix engine.
  std::vector<RunConfig> expand() const;
  bool single_run_shape() const { return agents.size() == 1 && branches.size() == 1 && algorithms.size() == 1; }
};

ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Parses "1,2,5..8" into {1,2,5,6,7,8}.
std::vector<std::uint64_t> parse_integer_list(std::string_view text);

}  // namespace btpp
