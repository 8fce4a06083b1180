#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "svrtune/svr_solver.hpp"

using namespace svrtune;

namespace {

struct Instance {
  std::shared_ptr<const Matrix> x;
  std::vector<double> y;
  KernelSpec spec;
};

Instance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t dim, double gamma) {
  Instance in;
  auto x = std::make_shared<Matrix>(svrtest::random_matrix(rng, n, dim));
  std::normal_distribution<double> noise(0.0, 0.1);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < dim; ++k) s += std::sin(3 * (*x)(i, k));
    in.y.push_back(s / static_cast<double>(dim) + noise(rng));
  }
  in.x = std::move(x);
  in.spec = KernelSpec::rbf(gamma);
  return in;
}

void check_invariants(const SvrModel& m) {
  const double C = m.C();
  const std::size_t n = m.size();
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(m.alpha()[i] >= 0.0);
    CHECK(m.alpha()[i] <= C);
    CHECK(m.alpha_star()[i] >= 0.0);
    CHECK(m.alpha_star()[i] <= C);
    CHECK(std::min(m.alpha()[i], m.alpha_star()[i]) <= 1e-10 * C);
    sum += m.alpha()[i] - m.alpha_star()[i];
  }
  CHECK(std::abs(sum) <= 1e-8 * C * static_cast<double>(n));
}

SolverOptions tight() {
  SolverOptions o;
  o.tol = 1e-9;
  return o;
}

}  // namespace

TEST_CASE("single point") {
  auto x = std::make_shared<Matrix>(Matrix::from_rows({{0.5, 0.5}}));
  const std::vector<double> y{3.25};
  const SolveResult r = solve_dual(gram_matrix(x, KernelSpec::rbf(1)), y, 1.0, 0.1);
  CHECK(r.model.alpha()[0] == 0.0);
  CHECK(r.model.alpha_star()[0] == 0.0);
  CHECK(r.model.bias() == doctest::Approx(3.25));
  CHECK(r.model.n_support() == 0);
}

TEST_CASE("constant target") {
  std::mt19937_64 rng(1);
  auto x = std::make_shared<Matrix>(svrtest::random_matrix(rng, 10, 2));
  const std::vector<double> y(10, 1.75);
  for (double eps : {0.0, 0.2}) {
    const SolveResult r = solve_dual(gram_matrix(x, KernelSpec::rbf(2)), y, 4.0, eps);
    CHECK(r.diagnostics.converged);
    CHECK(r.model.n_support() == 0);
    CHECK(r.model.bias() == doctest::Approx(1.75));
    const std::vector<double> probe{0.3, 0.9};
    CHECK(r.model.predict(probe) == doctest::Approx(1.75));
  }
}

TEST_CASE("dual objective matches the reference QP") {
  std::mt19937_64 rng(2);
  const Instance in = random_instance(rng, 12, 2, 1.0);
  const GramMatrix g = gram_matrix(in.x, in.spec);
  const SolveResult r = solve_dual(g, in.y, 1.0, 0.1, tight());
  const svrtest::QpReference ref = svrtest::reference_qp(g.entries(), in.y, 1.0, 0.1);
  REQUIRE(ref.stationarity <= 1e-10L);
  CHECK(std::abs(r.diagnostics.dual_objective - static_cast<double>(ref.objective)) <= 1e-6);
  check_invariants(r.model);

  // Predictions at the training rows agree once the bias is taken from the solver.
  const auto f = r.model.predict(*in.x);
  for (std::size_t i = 0; i < 12; ++i) {
    long double fr = r.model.bias();
    for (std::size_t j = 0; j < 12; ++j) fr += ref.beta[j] * static_cast<long double>(g(i, j));
    CHECK(std::abs(f[i] - static_cast<double>(fr)) <= 1e-4);
  }
}

TEST_CASE("model invariants on random instances") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Instance in = random_instance(rng, 8 + rep, 1 + rep % 3, 0.5 + rep * 0.3);
    const double C = std::pow(10.0, -1.0 + 0.15 * rep);
    const double eps = 0.01 * (rep % 5);
    const SolveResult r = solve_dual(gram_matrix(in.x, in.spec), in.y, C, eps);
    CHECK(r.diagnostics.converged);
    CHECK(r.diagnostics.max_kkt_violation <= 1e-3);
    check_invariants(r.model);
  }
}

TEST_CASE("training residuals are consistent with the KKT partition") {
  std::mt19937_64 rng(4);
  const Instance in = random_instance(rng, 40, 2, 3.0);
  const double C = 2.0, eps = 0.05;
  const SolveResult r = solve_dual(gram_matrix(in.x, in.spec), in.y, C, eps, tight());
  const auto f = r.model.predict(*in.x);
  const double slack = 1e-6;
  for (std::size_t i = 0; i < in.y.size(); ++i) {
    const double res = std::abs(in.y[i] - f[i]);
    const double coef = std::abs(r.model.coefficient(i));
    CHECK(f[i] == doctest::Approx(r.model.fitted()[i]).epsilon(1e-10));
    if (coef <= 1e-8 * C) {
      CHECK(res <= eps + slack);
    } else if (coef >= C * (1 - 1e-6)) {
      CHECK(res >= eps - slack);
    } else {
      CHECK(std::abs(res - eps) <= slack);
    }
  }
}

TEST_CASE("dual objective never increases") {
  std::mt19937_64 rng(5);
  const Instance in = random_instance(rng, 30, 2, 2.0);
  SolverOptions o;
  o.record_objective = true;
  const SolveResult r = solve_dual(gram_matrix(in.x, in.spec), in.y, 5.0, 0.02, o);
  REQUIRE(r.diagnostics.objective_history.size() == r.diagnostics.iterations + 1);
  const auto& h = r.diagnostics.objective_history;
  for (std::size_t k = 1; k < h.size(); ++k) {
    CHECK(h[k] <= h[k - 1] + 1e-12 * (1 + std::abs(h[k - 1])));
  }
}

TEST_CASE("support count does not grow with epsilon") {
  std::mt19937_64 rng(6);
  const Instance in = random_instance(rng, 50, 2, 2.0);
  const GramMatrix g = gram_matrix(in.x, in.spec);
  std::size_t prev = in.y.size() + 1;
  for (double eps : {0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}) {
    const SolveResult r = solve_dual(g, in.y, 3.0, eps, tight());
    CHECK(r.model.n_support() <= prev);
    prev = r.model.n_support();
  }
  CHECK(prev == 0);
}

TEST_CASE("solves are deterministic") {
  std::mt19937_64 rng(7);
  const Instance in = random_instance(rng, 35, 3, 1.0);
  const GramMatrix g = gram_matrix(in.x, in.spec);
  const SolveResult a = solve_dual(g, in.y, 10.0, 0.01);
  const SolveResult b = solve_dual(g, in.y, 10.0, 0.01);
  CHECK(a.model.alpha() == b.model.alpha());
  CHECK(a.model.alpha_star() == b.model.alpha_star());
  CHECK(a.model.bias() == b.model.bias());
  CHECK(a.diagnostics.iterations == b.diagnostics.iterations);
}

TEST_CASE("row cache gives the same model as the dense matrix") {
  std::mt19937_64 rng(8);
  const Instance in = random_instance(rng, 30, 2, 4.0);
  const SolveResult dense = solve_dual(gram_matrix(in.x, in.spec), in.y, 2.0, 0.01);
  for (std::size_t cap : {2u, 7u, 30u}) {
    const SolveResult cached = solve_dual(in.x, in.spec, in.y, 2.0, 0.01, cap);
    CHECK(cached.model.alpha() == dense.model.alpha());
    CHECK(cached.model.alpha_star() == dense.model.alpha_star());
    CHECK(cached.model.bias() == dense.model.bias());
  }
}

TEST_CASE("LRU row cache bookkeeping") {
  std::mt19937_64 rng(9);
  auto x = std::make_shared<Matrix>(svrtest::random_matrix(rng, 5, 2));
  CachedKernelRows rows(x, KernelSpec::rbf(1), 2);
  const GramMatrix g = gram_matrix(x, KernelSpec::rbf(1));
  const auto first = rows.row(1);
  for (std::size_t j = 0; j < 5; ++j) CHECK(first[j] == g(1, j));
  rows.row(1);
  rows.row(2);
  rows.row(3);  // evicts 1
  rows.row(1);
  CHECK(rows.hits() == 1);
  CHECK(rows.misses() == 4);
  CHECK(rows.diagonal(4) == 1.0);
}

TEST_CASE("warm start reaches the same optimum") {
  std::mt19937_64 rng(10);
  const Instance in = random_instance(rng, 40, 2, 1.5);
  const GramMatrix g = gram_matrix(in.x, in.spec);
  const SolveResult lo = solve_dual(g, in.y, 4.0, 0.0, tight());
  SolverOptions warm = tight();
  warm.warm_start = &lo.model;
  const SolveResult a = solve_dual(g, in.y, 8.0, 0.0, warm);
  const SolveResult b = solve_dual(g, in.y, 8.0, 0.0, tight());
  CHECK(a.diagnostics.converged);
  CHECK(a.diagnostics.dual_objective == doctest::Approx(b.diagnostics.dual_objective).epsilon(1e-9));
  check_invariants(a.model);
}

TEST_CASE("non-convergence is reported, not thrown") {
  std::mt19937_64 rng(11);
  const Instance in = random_instance(rng, 30, 2, 1.0);
  SolverOptions o;
  o.max_iter = 3;
  const SolveResult r = solve_dual(gram_matrix(in.x, in.spec), in.y, 100.0, 0.0, o);
  CHECK_FALSE(r.diagnostics.converged);
  CHECK(r.diagnostics.iterations == 3);
}

TEST_CASE("input validation") {
  const Matrix bad = Matrix::from_rows({{1, 2}, {2, 1}});
  const std::vector<double> y{0, 1};
  CHECK_THROWS_AS(solve_dual(GramMatrix(bad, KernelSpec::rbf(1)), y, 1, 0), InputError);
  std::mt19937_64 rng(12);
  const Instance in = random_instance(rng, 4, 1, 1.0);
  const GramMatrix g = gram_matrix(in.x, in.spec);
  CHECK_THROWS_AS(solve_dual(g, in.y, 0.0, 0), InputError);
  CHECK_THROWS_AS(solve_dual(g, in.y, 1.0, -0.1), InputError);
  CHECK_THROWS_AS(solve_dual(g, y, 1.0, 0), InputError);
}

TEST_CASE("prediction by hand") {
  auto x = std::make_shared<Matrix>(Matrix::from_rows({{0.0}, {5.0}}));
  const KernelSpec spec = KernelSpec::rbf(1);
  SvrModel zero({0, 0}, {0, 0}, 2.5, 1.0, 0.0, 1e-3, spec, x, {2.5, 2.5});
  const std::vector<double> p{0.7};
  CHECK(zero.predict(p) == 2.5);

  SvrModel one({0, 0}, {0.5, 0}, 1.0, 1.0, 0.0, 1e-3, spec, x, {0, 0});
  const std::vector<double> at{1.0};  // G = 1 to the first row
  CHECK(one.predict(at) == doctest::Approx(0.5 * std::exp(-1.0) + 1 + 0.0 * std::exp(-16.0)));
  CHECK(one.n_support() == 1);
  CHECK_THROWS_AS(one.predict(std::vector<double>{1.0, 2.0}), InputError);

  const Matrix probe = Matrix::from_rows({{1.0}, {4.0}});
  const auto direct = one.predict(probe);
  const auto via = one.predict_from_kernel(cross_kernel(probe, *x, spec));
  CHECK(direct[0] == doctest::Approx(via[0]));
  CHECK(direct[1] == doctest::Approx(via[1]));
}

TEST_CASE("classify_vectors") {
  auto x = std::make_shared<Matrix>(Matrix::from_rows({{0.0}, {1.0}, {2.0}}));
  const KernelSpec spec = KernelSpec::rbf(1);
  const std::vector<double> y{0, 0, 0};
  SvrModel zero({0, 0, 0}, {0, 0, 0}, 0.0, 1.0, 0.1, 1e-3, spec, x, {0, 0, 0});
  const VectorSets none = classify_vectors(zero, y, zero.fitted());
  CHECK(none.bounded.empty());
  CHECK(none.margin.empty());

  SvrModel bound({0, 0, 0}, {1.0, 0, 0}, 0.0, 1.0, 0.1, 1e-3, spec, x, {0, 0, 0});
  const std::vector<double> f{0.2, 0, 0};  // residual 0.2 = eps + 0.1
  const VectorSets s = classify_vectors(bound, y, f);
  CHECK(s.bounded == std::vector<std::size_t>{0});
  CHECK(s.margin.empty());

  SvrModel mid({0, 0, 0}, {0.5, 0, 0}, 0.0, 1.0, 0.1, 1e-3, spec, x, {0, 0, 0});
  const VectorSets m = classify_vectors(mid, y, f);
  CHECK(m.margin == std::vector<std::size_t>{0});
  CHECK(m.residual_mismatches == 1);
}

TEST_CASE("bounded and margin sets partition the support vectors") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const Instance in = random_instance(rng, 30, 2, 1.0 + rep);
    const SolveResult r =
        solve_dual(gram_matrix(in.x, in.spec), in.y, 0.5 + 0.5 * rep, 0.02, tight());
    REQUIRE(r.diagnostics.converged);
    const VectorSets s = classify_vectors(r.model, in.y, r.model.fitted());
    CHECK(s.bounded.size() + s.margin.size() == r.model.n_support());
  }
}
