#include "svrtune/c_selection.hpp"

#include <cmath>
#include <limits>

#include "svrtune/metrics.hpp"

namespace svrtune {

std::string_view to_string(CStopReason reason) noexcept {
  switch (reason) {
    case CStopReason::DeltaSmall: return "delta_small";
    case CStopReason::MaxIter: return "max_iter";
    case CStopReason::DenominatorGuard: return "denominator_guard";
    case CStopReason::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

InitialC initial_c(const Matrix& features, std::span<const double> y, const KernelSpec& spec) {
  const std::size_t n = features.rows();
  if (n < 2) throw InputError("initial_c needs at least two points");
  if (y.size() != n) throw InputError("initial_c: target length mismatch");
  spec.validate(features.cols());

  double best_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dy = std::abs(y[i] - y[j]);
      if (dy == 0.0) continue;
      const double g = pair_g(features.row(i), features.row(j), spec);
      best_log = std::max(best_log, std::log(dy) + spec.gamma * g);
    }
  }
  InitialC out;
  if (!std::isfinite(best_log)) {
    out.value = kCFloor;
    out.floored = true;
  } else if (best_log > std::log(kCMax)) {
    out.value = kCMax;
    out.capped = true;
  } else {
    out.value = std::exp(best_log);
    if (out.value < kCFloor) {
      out.value = kCFloor;
      out.floored = true;
    }
  }
  return out;
}

CUpdate update_c(const SvrModel& model, std::span<const double> y,
                 std::span<const double> predictions, double epsilon, double C,
                 const VectorSets& sets) {
  const std::size_t n = y.size();
  if (predictions.size() != n || model.size() != n) throw InputError("update_c: length mismatch");
  double denom = 0.0;
  for (std::size_t i : sets.bounded) denom += epsilon_loss(y[i] - predictions[i], epsilon);
  for (std::size_t i : sets.margin) {
    const double gap = C - std::abs(model.coefficient(i));
    denom += gap > 1.0 / kMarginTermMax ? 1.0 / gap : kMarginTermMax;
  }
  denom += epsilon * static_cast<double>(n) / (epsilon * C + 1.0);

  CUpdate out;
  out.denominator = denom;
  out.n_support = sets.bounded.size() + sets.margin.size();
  if (!(denom >= kDenominatorFloor)) {
    out.value = C;
    out.guarded = true;
    return out;
  }
  out.value = static_cast<double>(n + out.n_support) / denom;
  return out;
}

CIterationTrace iterate_c(const GramMatrix& gram, std::span<const double> y, double epsilon,
                          const CIterationOptions& options) {
  if (gram.size() == 0) throw InputError("iterate_c: empty training set");
  if (!(options.delta_tol > 0.0) || options.max_solves == 0) {
    throw InputError("iterate_c: invalid options");
  }
  CIterationTrace trace;
  if (options.c_initial) {
    if (!(*options.c_initial > 0.0)) throw InputError("iterate_c: C_ini must be positive");
    trace.c_initial = *options.c_initial;
  } else {
    if (!gram.features()) throw InputError("iterate_c: Gram matrix carries no features");
    const InitialC init = initial_c(*gram.features(), y, gram.spec());
    trace.c_initial = init.value;
    trace.c_initial_capped = init.capped;
  }

  double c = trace.c_initial;
  bool all_empty = true;
  for (std::size_t solve = 0; solve < options.max_solves; ++solve) {
    SolveResult res = solve_dual(gram, y, c, epsilon, options.solver);
    trace.solver_iterations.push_back(res.diagnostics.iterations);
    if (!res.diagnostics.converged) {
      trace.stop_reason = CStopReason::SolverFailure;
      return trace;
    }
    const SvrModel& model = res.model;
    const VectorSets sets = classify_vectors(model, y, model.fitted(), options.tau_alpha);
    const CUpdate upd = update_c(model, y, model.fitted(), epsilon, c, sets);
    trace.final_model = std::move(res.model);
    if (upd.guarded) {
      trace.stop_reason = CStopReason::DenominatorGuard;
      return trace;
    }
    all_empty = all_empty && upd.n_support == 0;
    trace.c_values.push_back(upd.value);
    trace.n_support.push_back(upd.n_support);
    if (std::abs(upd.value - c) <= options.delta_tol * c) {
      trace.converged = true;
      trace.stop_reason = CStopReason::DeltaSmall;
      return trace;
    }
    c = upd.value;
  }
  trace.stop_reason = CStopReason::MaxIter;
  trace.empty_sets_pathology = all_empty;
  return trace;
}

}  // namespace svrtune
