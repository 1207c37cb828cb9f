#include <doctest.h>

#include <sstream>

#include "btpp/config.hpp"

using namespace btpp;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.ini");
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  FAIL("expected a ConfigError");
  return 0;
}

const char* kSweep = R"(
# comparison sweep
[problem]
type = logistic
n = 8, 16
p = 5
J = 20
sigma_h = 0.5

[topology]
B = 2, 4, 8

[algorithm]
tag = btpp, centralized, dsgd_ring
schedule = decayed
gamma = 0.3
rescale_by_n = btpp
decay_factor = 0.4
decay_interval = 100

[run]
T = 50
seeds = 1..3
stride = 5
engine = message
)";

}  // namespace

TEST_CASE("integer lists") {
  CHECK(parse_integer_list("1,2,5..8") == std::vector<std::uint64_t>{1, 2, 5, 6, 7, 8});
  CHECK(parse_integer_list(" 4 ") == std::vector<std::uint64_t>{4});
  CHECK_THROWS_AS(parse_integer_list("3..1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_integer_list("1,,2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_integer_list("x"), std::invalid_argument);
}

TEST_CASE("full sweep file") {
  const auto cfg = parse(kSweep);
  CHECK(cfg.problem.kind == ProblemKind::logistic);
  CHECK(cfg.agents == std::vector<std::size_t>{8, 16});
  CHECK(cfg.branches == std::vector<std::size_t>{2, 4, 8});
  CHECK(cfg.problem.logistic.samples == 20);
  CHECK(cfg.problem.logistic.sigma_h == 0.5);
  CHECK(cfg.schedule.kind == ScheduleKind::decayed);
  CHECK(cfg.rescale == RescalePolicy::btpp_only);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(!cfg.single_run_shape());

  const auto runs = cfg.expand();
  // Per n: 3 B values of btpp plus one of each baseline, times 3 seeds.
  CHECK(runs.size() == 2 * (3 + 2) * 3);
  std::size_t btpp = 0;
  for (const auto& r : runs) {
    if (r.algorithm == AlgorithmTag::btpp) {
      ++btpp;
      CHECK(r.schedule.rescale_by_n);
      CHECK(r.engine == Engine::message);
    } else {
      CHECK(!r.schedule.rescale_by_n);
      CHECK(r.engine == Engine::matrix);
    }
    CHECK(r.schedule.agents == r.problem.agents());
  }
  CHECK(btpp == 2 * 3 * 3);
  CHECK(runs.front().problem.agents() == 8);
  CHECK(runs.front().seed == 1);
  CHECK(runs.back().problem.agents() == 16);
}

TEST_CASE("errors carry line numbers") {
  CHECK(error_line("[problem]\ntype = quadratic\ncolour = red\n") == 3);
  CHECK(error_line("[problem]\ntype = quadratic\n[network]\n") == 3);
  CHECK(error_line("[problem]\ntype = quadratic\nn = 4\nn = 5\n") == 4);
  CHECK(error_line("[problem]\ntype = quadratic\nn = four\n") == 3);
  CHECK(error_line("[problem]\ntype = cubic\n") == 2);
  CHECK(error_line("type = quadratic\n") == 1);
  CHECK(error_line("[problem]\ntype = quadratic\nJ = 10\n") == 3);
  CHECK(error_line("[problem]\ntype = logistic\nkappa = 2\n") == 3);
  CHECK(error_line("[problem]\ntype = quadratic\n[algorithm]\ntag = sgd\n") == 4);
  CHECK(error_line("[problem]\ntype = quadratic\n[run]\nengine = gpu\n") == 4);
  CHECK(error_line("[problem]\ntype = quadratic\n[algorithm]\nrescale_by_n = maybe\n") == 4);
}

TEST_CASE("values are validated before anything runs") {
  CHECK_THROWS_AS(parse("[problem]\ntype = quadratic\n[run]\nT = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\ntype = quadratic\nkappa = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\ntype = quadratic\n[topology]\nB = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\ntype = logistic\nJ = 10\nbatch = 11\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\ntype = quadratic\n[algorithm]\nschedule = theorem1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\ntype = quadratic\n[algorithm]\ngamma = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\n"), ConfigError);
  CHECK_THROWS_AS(
      parse("[problem]\ntype = quadratic\nn = 16\n[algorithm]\nschedule = theorem2\nL = 4\nmu = 1\n[run]\nT = 7\n"),
      ConfigError);
  CHECK_NOTHROW(
      parse("[problem]\ntype = quadratic\nn = 16\n[algorithm]\nschedule = theorem2\nL = 4\nmu = 1\n[run]\nT = 8\n"));
  CHECK_THROWS_AS(load_config("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("theorem constants come from the file, n, d and T from the run") {
  const auto cfg = parse(
      "[problem]\ntype = logistic\nn = 16\n[algorithm]\nschedule = theorem1\ndelta_f = 1\nsigma_sq = 0.5\nL = 2\n"
      "[run]\nT = 100\n");
  const auto runs = cfg.expand();
  REQUIRE(runs.size() == 1);
  CHECK(*runs[0].schedule.theorem.delta_f == 1.0);
  CHECK(*runs[0].schedule.theorem.smoothness == 2.0);
}

TEST_CASE("comments and defaults") {
  const auto cfg = parse("; leading comment\n[problem] # trailing\ntype = quadratic  ; inline\n");
  CHECK(cfg.problem.kind == ProblemKind::quadratic);
  CHECK(cfg.single_run_shape());
  CHECK(cfg.expand().size() == 1);
}
