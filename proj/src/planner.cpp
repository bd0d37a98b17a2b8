#include "ecoroute/planner.hpp"

namespace ecoroute {

PlanResult plan_trip(const Scenario& scn, const PlanOptions& opts, const PlanState* warm) {
  validate(scn);
  Transcription tr(scn, opts.transcription);
  const auto sc = tr.scaled();
  const double fs = sc->objective_scale();

  // Physical multipliers y relate to scaled ones by y = y_s * fs / row_scale.
  WarmStart ws;
  if (warm) {
    if (warm->z.size() == tr.num_variables()) ws.z = sc->to_scaled(warm->z);
    if (warm->lambda.size() == tr.num_equalities())
      ws.lambda = warm->lambda.cwiseProduct(sc->equality_scale()) / fs;
    if (warm->mu.size() == tr.num_inequalities())
      ws.mu = warm->mu.cwiseProduct(sc->inequality_scale()) / fs;
  }

  PlanResult out;
  out.nlp = solve(*sc, opts.solver, ws);
  out.state.z = sc->to_unscaled(out.nlp.z);
  out.state.lambda = out.nlp.lambda.cwiseQuotient(sc->equality_scale()) * fs;
  out.state.mu = out.nlp.mu.cwiseQuotient(sc->inequality_scale()) * fs;

  out.solution = tr.extract_solution(out.state.z);
  auto& d = out.solution.diagnostics;
  d.status = out.nlp.status;
  d.kkt_residual = out.nlp.kkt_residual;
  d.outer_iterations = out.nlp.outer_iterations;
  d.inner_iterations = out.nlp.inner_iterations;
  d.evaluations = out.nlp.evaluations;
  d.wall_time_s = out.nlp.wall_time_s;
  d.objective = out.nlp.objective * fs;
  return out;
}

}  // namespace ecoroute
