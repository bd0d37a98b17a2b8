#pragma once

// One-call trip optimization: transcribe, scale, solve, extract.

#include <Eigen/Dense>

#include "ecoroute/scenario.hpp"
#include "ecoroute/solver.hpp"
#include "ecoroute/transcription.hpp"
#include "ecoroute/trip_solution.hpp"

namespace ecoroute {

struct PlanOptions {
  TranscriptionOptions transcription;
  SolverOptions solver;
};

/// Iterate and multipliers in physical units (unscaled variables, multipliers
/// of the unscaled objective and constraints). Valid as a warm start for any
/// scenario with the same layout.
struct PlanState {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
};

struct PlanResult {
  TripSolution solution;  // diagnostics filled from the solver
  NlpResult nlp;          // in the scaled problem
  PlanState state;
};

PlanResult plan_trip(const Scenario& scn, const PlanOptions& opts = {},
                     const PlanState* warm = nullptr);

}  // namespace ecoroute
