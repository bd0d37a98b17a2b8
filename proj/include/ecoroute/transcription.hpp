#pragma once

// Direct transcription of the hybrid driving/charging problem into an NLP.
//
// Driving segments are split at charger nodes; the charger node ends one
// segment and starts the next, so it appears twice. Variables are laid out
// in route order: segment 0, charge 0, segment 1, charge 1, ...
//
//   driving node:  E, soc, T_b, P_hvch, P_hvac, a_t, P_b
//   charge block:  t_chg, sigma, then per tau node soc, T_b, P_hvch, P_hvac,
//                  P_grid, P_b

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "ecoroute/nlp.hpp"
#include "ecoroute/scalar.hpp"
#include "ecoroute/scenario.hpp"
#include "ecoroute/trip_solution.hpp"

namespace ecoroute {

struct TranscriptionOptions {
  double ds = 2000.0;  // m
  int n_tau = 20;      // tau nodes per charging phase
};

enum DriveField { kFieldE, kFieldSoc, kFieldTb, kFieldHvch, kFieldHvac, kFieldAt, kFieldPb };
enum ChargeField { kCFieldSoc, kCFieldTb, kCFieldHvch, kCFieldHvac, kCFieldPgrid, kCFieldPb };

inline constexpr int kDriveWidth = 7;
inline constexpr int kChargeWidth = 6;

/// Offsets of every decision variable.
class DecisionLayout {
 public:
  struct Segment {
    int first_node = 0;  // grid index of the first node
    int n_nodes = 0;
    int offset = 0;
  };
  struct Charge {
    int charger = 0;  // index into Scenario::chargers
    int node = 0;     // grid index
    int offset = 0;   // slot of t_chg
  };

  DecisionLayout() = default;
  DecisionLayout(const RoadGrid& grid, int n_tau);

  int size() const { return n_; }
  int n_tau() const { return n_tau_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<Charge>& charges() const { return charges_; }
  /// True when the last charger sits on the final node (no trailing segment).
  bool terminal_charge() const { return charges_.size() == segments_.size() && !charges_.empty(); }

  int drive(int seg, int k, int field) const {
    return segments_[seg].offset + kDriveWidth * k + field;
  }
  int t_chg(int i) const { return charges_[i].offset; }
  int sigma(int i) const { return charges_[i].offset + 1; }
  int charge(int i, int j, int field) const {
    return charges_[i].offset + 2 + kChargeWidth * j + field;
  }

 private:
  std::vector<Segment> segments_;
  std::vector<Charge> charges_;
  int n_tau_ = 0;
  int n_ = 0;
};

/// The transcribed NLP in physical units. Use `scaled()` for the O(1)
/// formulation handed to the solver.
class Transcription final : public NlpProblem {
 public:
  Transcription(const Scenario& scn, TranscriptionOptions opts = {});
  ~Transcription() override;
  Transcription(const Transcription&) = delete;
  Transcription& operator=(const Transcription&) = delete;

  int num_variables() const override { return layout_.size(); }
  int num_equalities() const override;
  int num_inequalities() const override;
  const Eigen::VectorXd& lower() const override { return lower_; }
  const Eigen::VectorXd& upper() const override { return upper_; }
  Eigen::VectorXd initial_guess() const override;
  void evaluate(const Eigen::VectorXd& z, NlpEval& out,
                bool derivatives) const override;
  const SparseRowMatrix& equality_pattern() const override;
  const SparseRowMatrix& inequality_pattern() const override;

  const Scenario& scenario() const { return scn_; }
  const RoadGrid& grid() const { return grid_; }
  const DecisionLayout& layout() const { return layout_; }
  const TranscriptionOptions& options() const { return opts_; }

  /// Power-of-two scale factors: one per variable, equality and inequality.
  const Eigen::VectorXd& variable_scale() const { return var_scale_; }
  const Eigen::VectorXd& equality_scale() const;
  const Eigen::VectorXd& inequality_scale() const;
  /// Power of two >= max(1, |f(initial guess)|).
  double objective_scale() const { return obj_scale_; }
  std::unique_ptr<ScaledNlp> scaled() const;

  /// Uniform sample over the variable bounds, except that battery and grid
  /// powers are drawn from the power-limit grid's envelope rather than the
  /// much wider branch-selection bound. Deterministic in `seed`.
  Eigen::VectorXd random_point(std::uint64_t seed) const;

  /// Node trajectories, times and cost breakdown of a decision vector.
  /// Throws std::invalid_argument on a length mismatch.
  TripSolution extract_solution(const Eigen::VectorXd& z) const;
  /// Inverse of extract_solution on the decision-variable fields.
  Eigen::VectorXd pack(const TripSolution& sol) const;

 private:
  struct Blocks;

  void build_bounds();

  Scenario scn_;
  TranscriptionOptions opts_;
  RoadGrid grid_;
  DecisionLayout layout_;
  Eigen::VectorXd lower_, upper_, var_scale_;
  double obj_scale_ = 1.0;
  std::unique_ptr<Blocks> blocks_;
};

/// Low-loss root of R P^2/U^2 - P + demand = 0 that stays finite when the
/// discriminant turns negative: below 0.05 the discriminant is replaced by a
/// C1 exponential tail. Equal to battery_power_for_demand wherever that
/// discriminant is at least 0.05.
template <typename T>
T smooth_battery_power(const T& demand, const T& u_oc, const T& r_b) {
  using std::exp;
  using std::sqrt;
  constexpr double kDelta = 0.05;
  T disc = 1.0 - 4.0 * r_b * demand / (u_oc * u_oc);
  if (value_of(disc) < kDelta) disc = kDelta * exp((disc - kDelta) / kDelta);
  return 2.0 * demand / (1.0 + sqrt(disc));
}

}  // namespace ecoroute
