#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"
#include "svrtune/deviation.hpp"

using namespace svrtune;

namespace {

const Matrix kThree = Matrix::from_rows({{0}, {1}, {3}});

// Variance of the mapped distances over unordered pairs, straight from the definition.
double brute_L(const Matrix& x, double gamma) {
  std::vector<double> l;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
      l.push_back(std::sqrt(2 - 2 * std::exp(-gamma * squared_euclidean(x.row(i), x.row(j)))));
    }
  }
  double mean = 0;
  for (double v : l) mean += v;
  mean /= static_cast<double>(l.size());
  double var = 0;
  for (double v : l) var += (v - mean) * (v - mean);
  return var / static_cast<double>(l.size());
}

}  // namespace

TEST_CASE("pairwise G values") {
  const PairwiseG pg = pairwise_g_values(kThree, KernelFamily::RBF);
  REQUIRE(pg.pair_count() == 3);
  CHECK(pg.values == std::vector<double>{1, 4, 9});
  CHECK(pg.n_points == 3);

  std::mt19937_64 rng(1);
  CHECK(pairwise_g_values(svrtest::random_matrix(rng, 2, 3), KernelFamily::RBF).pair_count() == 1);
  CHECK(pairwise_g_values(svrtest::random_matrix(rng, 4, 3), KernelFamily::RBF).pair_count() == 6);
  CHECK_THROWS_AS(pairwise_g_values(svrtest::random_matrix(rng, 1, 3), KernelFamily::RBF), InputError);
  CHECK_THROWS_AS(pairwise_g_values(kThree, KernelFamily::Mahalanobis), InputError);
}

TEST_CASE("L of degenerate point sets") {
  const Matrix same = Matrix::from_rows({{1, 1}, {1, 1}, {1, 1}});
  const PairwiseG zero = pairwise_g_values(same, KernelFamily::RBF);
  const PairwiseG two = pairwise_g_values(Matrix::from_rows({{0}, {1}}), KernelFamily::RBF);
  for (double g : {1e-3, 0.1, 1.0, 50.0}) {
    CHECK(deviation_L(g, zero) == 0.0);
    CHECK(deviation_L(g, two) == doctest::Approx(0.0));
    CHECK(deviation_L_prime(g, two) == doctest::Approx(0.0));
    CHECK(deviation_L_second(g, two) == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS(find_gamma_opt(zero), DegenerateError);
}

TEST_CASE("L matches the brute-force variance") {
  const PairwiseG pg = pairwise_g_values(kThree, KernelFamily::RBF);
  CHECK(svrtest::relative_error(deviation_L(0.1, pg), brute_L(kThree, 0.1)) <= 1e-12);

  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix x = svrtest::random_matrix(rng, 15, 3);
    const PairwiseG p = pairwise_g_values(x, KernelFamily::RBF);
    for (double g : {0.01, 0.5, 3.0, 40.0}) {
      CHECK(svrtest::relative_error(deviation_L(g, p), brute_L(x, g)) <= 1e-10);
    }
  }
}

TEST_CASE("derivatives match finite differences") {
  const PairwiseG pg = pairwise_g_values(kThree, KernelFamily::RBF);
  auto L = [&](double g) { return deviation_L(g, pg); };
  auto Lp = [&](double g) { return deviation_L_prime(g, pg); };
  const double g0 = 0.1;
  const double fd = (L(g0 * (1 + 1e-6)) - L(g0 * (1 - 1e-6))) / (2e-6 * g0);
  CHECK(svrtest::relative_error(Lp(g0), fd) <= 1e-6);
  for (double g : {0.05, 0.1, 1.0}) {
    CHECK(svrtest::relative_error(deviation_L_second(g, pg),
                                  svrtest::central_difference(Lp, g, 1e-3 * g)) <= 1e-5);
  }
  CHECK(std::abs(Lp(1e4)) < 1e-8);
}

TEST_CASE("deviation_all agrees with the single evaluations") {
  std::mt19937_64 rng(4);
  const PairwiseG pg = pairwise_g_values(svrtest::random_matrix(rng, 20, 2), KernelFamily::RBF);
  for (double g : {0.3, 2.0, 9.0}) {
    const DeviationValues v = deviation_all(g, pg);
    CHECK(v.value == doctest::Approx(deviation_L(g, pg)).epsilon(1e-14));
    CHECK(v.first == doctest::Approx(deviation_L_prime(g, pg)).epsilon(1e-14));
    CHECK(v.second == doctest::Approx(deviation_L_second(g, pg)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(deviation_L(0.0, pg), DomainError);
  CHECK_THROWS_AS(deviation_L_prime(1e-13, pg), DomainError);
}

TEST_CASE("gamma_opt on three points") {
  const PairwiseG pg = pairwise_g_values(kThree, KernelFamily::RBF);
  const GammaSelection sel = find_gamma_opt(pg);
  CHECK(sel.converged);
  CHECK(sel.gamma_opt > 0.0);
  CHECK(sel.gamma_opt < sel.gamma_h);
  CHECK(std::abs(sel.L_prime_at_opt) <= 1e-10 * sel.derivative_scale);
  CHECK(sel.L_second_at_opt < 0.0);

  // Dense log grid on [1e-6, 1e3].
  const int n = 100000;
  const double lo = std::log(1e-6), hi = std::log(1e3), step = (hi - lo) / (n - 1);
  double best = -1, best_g = 0;
  for (int k = 0; k < n; ++k) {
    const double g = std::exp(lo + k * step);
    const double v = deviation_L(g, pg);
    if (v > best) { best = v; best_g = g; }
  }
  CHECK(std::abs(std::log(sel.gamma_opt) - std::log(best_g)) <= step);
  CHECK(deviation_L_second(best_g, pg) < 0.0);
}

TEST_CASE("gamma_opt scales with the inverse square of the features") {
  std::mt19937_64 rng(6);
  const Matrix x = svrtest::random_matrix(rng, 20, 3);
  const double base = find_gamma_opt(pairwise_g_values(x, KernelFamily::RBF)).gamma_opt;
  for (double s : {0.1, 2.0, 10.0}) {
    Matrix sx = x;
    for (double& v : sx.data()) v *= s;
    const double g = find_gamma_opt(pairwise_g_values(sx, KernelFamily::RBF)).gamma_opt;
    CHECK(svrtest::relative_error(g, base / (s * s)) <= 1e-8);
  }
}

TEST_CASE("gamma_opt depends only on the G values") {
  std::mt19937_64 rng(8);
  const Matrix x = svrtest::random_matrix(rng, 25, 3);
  const auto st = mahalanobis_statistics(x);
  const PairwiseG pm = pairwise_g_values(x, KernelFamily::Mahalanobis, &st);
  PairwiseG copy;
  copy.values = pm.values;
  copy.n_points = pm.n_points;
  CHECK(find_gamma_opt(pm).gamma_opt == find_gamma_opt(copy).gamma_opt);
}

TEST_CASE("gamma_opt is invariant to row order") {
  std::mt19937_64 rng(10);
  const Matrix x = svrtest::random_matrix(rng, 30, 2);
  std::vector<std::size_t> idx(30);
  for (std::size_t i = 0; i < 30; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  const Matrix px = x.select_rows(idx);
  CHECK(find_gamma_opt(pairwise_g_values(x, KernelFamily::RBF)).gamma_opt ==
        find_gamma_opt(pairwise_g_values(px, KernelFamily::RBF)).gamma_opt);
}

TEST_CASE("gamma_h") {
  PairwiseG pg;
  pg.values = {0.0, 1.0, 2.0};
  pg.n_points = 3;
  CHECK(find_gamma_h(pg, std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  double prev = 0;
  for (double kappa : {0.5, 0.1, 1e-2, 1e-3, 1e-6}) {
    const double g = find_gamma_h(pg, kappa);
    CHECK(g > prev);
    prev = g;
  }
  CHECK_THROWS_AS(find_gamma_h(pg, 1.5), InputError);
}

TEST_CASE("deviation curve samples") {
  const PairwiseG pg = pairwise_g_values(kThree, KernelFamily::RBF);
  const auto curve = sample_deviation_curve(pg, 1e-2, 1e2, 5);
  REQUIRE(curve.size() == 5);
  CHECK(curve.front().gamma == doctest::Approx(1e-2));
  CHECK(curve.back().gamma == doctest::Approx(1e2));
  CHECK(curve[2].gamma == doctest::Approx(1.0));
  CHECK(curve[2].value == doctest::Approx(deviation_L(1.0, pg)));
  CHECK_THROWS_AS(sample_deviation_curve(pg, 1, 0.5, 4), InputError);
}
