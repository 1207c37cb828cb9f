#include <doctest.h>

#include <cmath>
#include <sstream>

#include "btpp/app.hpp"

using namespace btpp;

namespace {

CsvTable table(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in, "mem.csv");
}

const PropertyResult* find(const VerifyReport& r, const std::string& name) {
  for (const auto& p : r.properties)
    if (p.name == name) return &p;
  return nullptr;
}

RunConfig quadratic(std::uint64_t seed, double gamma) {
  RunConfig rc;
  rc.problem.quadratic = QuadraticParams{6, 3, 3.0, 0.0};
  rc.schedule.base = gamma;
  rc.iterations = 30;
  rc.seed = seed;
  return rc;
}

}  // namespace

TEST_CASE("verify grid parsing") {
  const auto d = VerifyGrid::defaults();
  CHECK(d.agents.size() == 64);
  CHECK(d.branches == std::vector<std::size_t>{2, 3, 4, 8});
  const auto g = VerifyGrid::parse("n=1..5; B=3");
  CHECK(g.agents == std::vector<std::size_t>{1, 2, 3, 4, 5});
  CHECK(g.branches == std::vector<std::size_t>{3});
  CHECK(VerifyGrid::parse("B=2").agents.size() == 64);
  CHECK_THROWS_AS(VerifyGrid::parse("n=0"), std::invalid_argument);
  CHECK_THROWS_AS(VerifyGrid::parse("B=1"), std::invalid_argument);
  CHECK_THROWS_AS(VerifyGrid::parse("k=3"), std::invalid_argument);
}

TEST_CASE("verify passes on a grid and names the property on a fault") {
  const auto ok = run_verify(VerifyGrid::parse("n=1..20;B=2,3,4,8"));
  CHECK(ok.ok());
  for (const auto& p : ok.properties) {
    CAPTURE(p.name);
    CHECK(p.checked > 0);
  }
  for (const char* name : {"pull_row_stochastic", "closed_form_power_equals_product", "power_d_equals_consensus",
                           "spectral_norm_bound", "tracker_conservation", "degree_bound"})
    CHECK(find(ok, name));

  const auto single = run_verify(VerifyGrid::parse("n=1;B=2"));
  CHECK(single.ok());

  VerifyOptions opts;
  opts.inject_fault = std::make_pair(std::size_t{9}, std::size_t{2});
  const auto bad = run_verify(VerifyGrid::parse("n=1..12;B=2"), opts);
  CHECK(!bad.ok());
  const auto* row = find(bad, "pull_row_stochastic");
  REQUIRE(row);
  CHECK(row->failed == 1);
  REQUIRE(!row->failures.empty());
  CHECK(row->failures.front().find("n=9") != std::string::npos);
  std::ostringstream text;
  bad.print(text);
  CHECK(text.str().find("pull_row_stochastic") != std::string::npos);
}

TEST_CASE("csv rows") {
  MetricsRecord r;
  r.iter = 10;
  r.algo = AlgorithmTag::dsgd_ring;
  r.n = 16;
  r.branch = 2;
  r.seed = 3;
  r.gamma = 0.1;
  r.grad_norm_sq = 0.25;
  r.consensus_err = 1e-300;
  r.vectors_sent = 320;
  // Baselines leave B empty; absent metrics are empty fields, not zeros.
  CHECK(csv_row(r) == "10,dsgd_ring,matrix,16,,3,0.1,0.25,1e-300,,,320");
  r.algo = AlgorithmTag::btpp;
  r.engine = Engine::message;
  r.dist_to_opt = 2.0;
  r.f_gap = 0.5;
  CHECK(csv_row(r) == "10,btpp,message,16,2,3,0.1,0.25,1e-300,2,0.5,320");

  std::ostringstream out;
  write_csv(out, {r});
  CHECK(out.str().rfind(std::string(kCsvHeader) + "\n", 0) == 0);
}

TEST_CASE("execute_runs keeps order and isolates divergence") {
  std::vector<RunConfig> runs = {quadratic(1, 0.05), quadratic(2, 50.0), quadratic(3, 0.05)};
  runs[1].iterations = 400;
  for (std::size_t workers : {1, 3}) {
    const auto outcomes = execute_runs(runs, workers);
    REQUIRE(outcomes.size() == 3);
    CHECK(outcomes[0].config.seed == 1);
    CHECK(!outcomes[0].divergence);
    CHECK(outcomes[1].divergence);
    CHECK(!outcomes[1].records.empty());
    CHECK(!outcomes[2].divergence);

    std::ostringstream csv, log;
    CHECK(report_outcomes(outcomes, csv, log) == kExitOk);
    CHECK(log.str().find("seed=2") != std::string::npos);
  }
  const auto all_bad = execute_runs({runs[1]}, 1);
  std::ostringstream csv, log;
  CHECK(report_outcomes(all_bad, csv, log) == kExitDiverged);

  // The serialized output does not depend on the worker count.
  std::ostringstream a, b, la, lb;
  report_outcomes(execute_runs(runs, 1), a, la);
  report_outcomes(execute_runs(runs, 4), b, lb);
  CHECK(a.str() == b.str());
}

TEST_CASE("report aggregation") {
  SUBCASE("two seeds with values 1 and 3") {
    const auto t = table(
        "iter,algo,seed,grad_norm_sq,dist_to_opt\n"
        "0,btpp,1,1,\n"
        "0,btpp,2,3,\n");
    const auto agg = aggregate_tables({t}, {"iter", "algo"}, Aggregate::mean);
    CHECK(agg.header == std::vector<std::string>{"iter", "algo", "grad_norm_sq_count", "grad_norm_sq_mean",
                                                 "grad_norm_sq_std", "dist_to_opt_count", "dist_to_opt_mean",
                                                 "dist_to_opt_std"});
    REQUIRE(agg.rows.size() == 1);
    CHECK(agg.rows[0][2] == "2");
    CHECK(agg.rows[0][3] == "2");
    CHECK(std::stod(agg.rows[0][4]) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(agg.rows[0][5] == "0");
    CHECK(agg.rows[0][6].empty());
  }

  SUBCASE("a single input grouped by iter reproduces it") {
    const auto t = table("iter,seed,gamma\n0,1,0.5\n10,1,0.25\n");
    const auto agg = aggregate_tables({t}, {"iter"}, Aggregate::mean);
    REQUIRE(agg.rows.size() == 2);
    CHECK(agg.rows[0] == std::vector<std::string>{"0", "1", "0.5", "0"});
    CHECK(agg.rows[1] == std::vector<std::string>{"10", "1", "0.25", "0"});
  }

  SUBCASE("five-row sample against a hand recomputation") {
    const auto t = table(
        "iter,seed,f_gap\n5,1,0.2\n5,2,0.4\n5,3,0.9\n5,4,0.1\n5,5,0.4\n");
    // mean 0.4, deviations -0.2 0 0.5 -0.3 0, squares sum 0.38, /4 = 0.095.
    const auto mean = aggregate_tables({t}, {"iter"}, Aggregate::mean);
    CHECK(std::stod(mean.rows[0][2]) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(std::stod(mean.rows[0][3]) == doctest::Approx(std::sqrt(0.095)).epsilon(1e-14));
    const auto median = aggregate_tables({t}, {"iter"}, Aggregate::median);
    CHECK(median.header[2] == "f_gap_median");
    CHECK(median.rows[0][2] == "0.4");
  }

  SUBCASE("multiple files and header mismatch") {
    const auto a = table("iter,grad_norm_sq\n0,1\n");
    const auto b = table("iter,grad_norm_sq\n0,5\n");
    const auto agg = aggregate_tables({a, b}, {"iter"}, Aggregate::mean);
    CHECK(agg.rows[0][2] == "3");
    const auto c = table("iter,f_gap\n0,1\n");
    CHECK_THROWS_AS(aggregate_tables({a, c}, {"iter"}, Aggregate::mean), std::invalid_argument);
    CHECK_THROWS_AS(aggregate_tables({a}, {"algo"}, Aggregate::mean), std::invalid_argument);
  }

  CHECK_THROWS(table("a,b\n1,2,3\n"));
  std::ostringstream out;
  write_table(out, table("x,y\n1,2\n"));
  CHECK(out.str() == "x,y\n1,2\n");
}
