#include <doctest.h>

#include <cmath>
#include <random>

#include "btpp/mixing_matrix.hpp"
#include "btpp/numerics.hpp"
#include "btpp/topology.hpp"

using namespace btpp;

namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  RngStream s(seed, 0, StreamPurpose::probe);
  DenseMatrix m(rows, cols);
  auto v = gaussian_vector(s, rows * cols, 0.0, 1.0);
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

}  // namespace

TEST_CASE("frobenius_norm_sq") {
  CHECK(frobenius_norm_sq(DenseMatrix(3, 4)) == 0.0);
  DenseMatrix m(2, 2);
  m(0, 0) = 1;
  m(0, 1) = 2;
  m(1, 0) = 3;
  m(1, 1) = 4;
  CHECK(frobenius_norm_sq(m) == 30.0);

  const auto tree = build_bary_tree(6, 2);
  const Vector row = {0.5, -1.25, 3.0};
  CHECK(frobenius_norm_sq(consensus_projection(DenseMatrix::replicate(6, row), tree)) == 0.0);
}

TEST_CASE("gaussian_vector") {
  RngStream s(1, 2, StreamPurpose::oracle);
  CHECK(gaussian_vector(s, 3, 0.0, 0.0) == Vector{0.0, 0.0, 0.0});
  CHECK(gaussian_vector(s, 2, 1.5, 0.0) == Vector{1.5, 1.5});
  CHECK_THROWS_AS(gaussian_vector(s, 2, 0.0, -1.0), std::invalid_argument);

  SUBCASE("replay is bit-identical") {
    RngStream a(42, 3, StreamPurpose::oracle, 17);
    RngStream b(42, 3, StreamPurpose::oracle, 17);
    CHECK(gaussian_vector(a, 50, 0.0, 1.0) == gaussian_vector(b, 50, 0.0, 1.0));
  }

  SUBCASE("sample mean within four standard errors") {
    constexpr std::size_t draws = 100000;
    RngStream g(7, 0, StreamPurpose::probe);
    const auto v = gaussian_vector(g, draws, 2.0, 3.0);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= draws;
    CHECK(std::abs(mean - 2.0) <= 4.0 * 3.0 / std::sqrt(double(draws)));
  }
}

TEST_CASE("RngStream keys give distinct sequences") {
  auto first = [](RngStream s) { return s(); };
  const auto base = first(RngStream(1, 0, StreamPurpose::oracle, 0));
  CHECK(base != first(RngStream(2, 0, StreamPurpose::oracle, 0)));
  CHECK(base != first(RngStream(1, 1, StreamPurpose::oracle, 0)));
  CHECK(base != first(RngStream(1, 0, StreamPurpose::data, 0)));
  CHECK(base != first(RngStream(1, 0, StreamPurpose::oracle, 1)));

  // Crude independence check across neighbouring agents: correlation of uniforms.
  RngStream a(5, 0, StreamPurpose::oracle);
  RngStream b(5, 1, StreamPurpose::oracle);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double sab = 0.0;
  constexpr int m = 20000;
  for (int i = 0; i < m; ++i) sab += u(a) * u(b);
  // Var of the product is 1/9, so the mean has stddev 1/(3 sqrt(m)).
  CHECK(std::abs(sab / m) < 5.0 / (3.0 * std::sqrt(double(m))));
}

TEST_CASE("sparse_apply") {
  const auto x = random_matrix(10, 4, 3);
  CHECK(sparse_apply(MixingMatrix::identity(10), x) == x);

  const auto tree = build_bary_tree(10, 2);
  const auto r = pull_matrix(tree);

  SUBCASE("parent copy semantics") {
    DenseMatrix labels(10, 1);
    for (std::size_t i = 0; i < 10; ++i) labels(i, 0) = double(i + 1);
    const auto out = sparse_apply(r, labels);
    CHECK(out(3, 0) == 2.0);  // node 4 pulls from node 2
    CHECK(out(9, 0) == 5.0);
    CHECK(out(0, 0) == 1.0);
  }

  SUBCASE("matches dense multiply") {
    const auto c = push_matrix(tree);
    for (const auto* m : {&r, &c}) {
      const auto sparse = sparse_apply(*m, x);
      const auto dense = multiply(m->to_dense(), x);
      for (std::size_t i = 0; i < sparse.data().size(); ++i)
        CHECK(sparse.data()[i] == doctest::Approx(dense.data()[i]).epsilon(1e-15));
    }
  }

  SUBCASE("column-stochastic matrices preserve column sums") {
    for (std::size_t n : {1, 7, 31, 64}) {
      for (std::size_t b : {2, 3, 8}) {
        const auto t = build_bary_tree(n, b);
        const auto y = random_matrix(n, 5, n * 10 + b);
        const auto before = column_sums(y);
        const auto after = column_sums(sparse_apply(push_matrix(t), y));
        for (std::size_t k = 0; k < before.size(); ++k)
          CHECK(std::abs(after[k] - before[k]) <= 1e-12 * (1.0 + std::abs(before[k])));
      }
    }
  }

  CHECK_THROWS_AS(sparse_apply(r, DenseMatrix(9, 2)), std::invalid_argument);
}
