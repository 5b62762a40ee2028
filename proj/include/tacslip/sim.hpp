#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tacslip/config.hpp"
#include "tacslip/features.hpp"
#include "tacslip/markerflow.hpp"
#include "tacslip/rng.hpp"

namespace tacslip::sim {

enum class ScenarioKind {
  NoContact,
  StableGrasp,
  TransSlipX,
  TransSlipY,
  RotSlip,
  AccelNoSlip,
  ContactLoss,
};

std::string scenario_kind_name(ScenarioKind kind);
ScenarioKind scenario_kind_from_name(const std::string& name);
bool scenario_can_slip(ScenarioKind kind);

struct ObjectParams {
  double mass_kg = 0.3;
  double friction_mu = 0.5;
  double stiffness_px_per_n = 1.2;  // gel shear stretch per newton of load
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::StableGrasp;
  double duration_s = 20.0;
  double noise_sigma_px = 0.05;
  double frame_rate_hz = 25.0;
  int grid_cols = 9;
  int grid_rows = 7;
  double grid_spacing_px = 24.0;
  ObjectParams object;
};

// per-kind tuned duration, other fields at their defaults
Scenario default_scenario(ScenarioKind kind);

struct Episode {
  Scenario scenario;
  std::uint64_t seed = 0;
  std::vector<markerflow::MarkerSet> frames;  // duration * frame rate entries
  std::vector<int> labels;                    // features::kLabelStable / kLabelSlip
  std::vector<double> ground_velocity_px;     // object speed in px per frame
};

markerflow::MarkerSet rest_grid(const Scenario& scenario);

// Deterministic in (scenario, seed), bitwise.
Episode generate_episode(const Scenario& scenario, std::uint64_t seed);

// Runs marker association + feature extraction over an episode; one labeled
// row per frame starting at the second (the first has no predecessor).
std::vector<features::FeatureVector> feature_rows(const Episode& episode);

// ---- grasp physics for the closed loop ----

struct GraspPhysicsParams {
  double friction_mu = 0.5;
  double grip_lag_tau_s = 0.08;   // first-order lag of actual vs commanded force
  double slip_gain = 150.0;       // px/s of slip per newton of excess tangential load
  double stiffness_px_per_n = 1.2;
  double incipient_ratio = 0.7;   // load ratio where peripheral creep starts
  double frame_rate_hz = 25.0;
  double noise_sigma_px = 0.03;
  int grid_cols = 9;
  int grid_rows = 7;
  double grid_spacing_px = 24.0;
};

struct GraspSimState {
  double time_s = 0.0;
  double grip_command_n = 0.0;
  double normal_force_n = 0.0;
  double tangential_load_n = 0.0;
  double object_velocity_px_s = 0.0;  // relative to the gel; 0 while sticking
  double slip_distance_px = 0.0;
};

// Force half of the model: exact first-order lag toward the commanded grip,
// Coulomb stick-slip with velocity proportional to the excess load.
GraspSimState step_grasp_physics(const GraspSimState& state, double grip_cmd_n,
                                 double external_tangential_n, double dt_s,
                                 const GraspPhysicsParams& params);

// Physics plus marker-field synthesis: sticking contact stretches uniformly
// with the load, slip runs staggered per-marker advance/snap cycles, and the
// incipient band adds peripheral creep.
class GraspSim {
 public:
  GraspSim(const GraspPhysicsParams& params, std::uint64_t seed);

  const GraspSimState& state() const { return state_; }
  bool slipping() const { return state_.object_velocity_px_s > 0.0; }
  // tangential / (mu * normal); large sentinel when normal force is 0
  double load_ratio() const;

  // advances one frame and returns the rendered marker set
  markerflow::MarkerSet step(double grip_cmd_n, double external_tangential_n);

 private:
  GraspPhysicsParams params_;
  GraspSimState state_;
  Rng rng_;
  std::vector<markerflow::Point2> rest_;
  markerflow::Point2 center_{};
  std::vector<double> edge_;      // 0 at the grid centre, 1 at the farthest marker
  std::vector<double> stretch_;   // per-marker gel stretch along the load axis, px
  std::vector<double> creep_;     // incipient peripheral creep offsets, px
  std::vector<double> retained_;  // residual offsets left behind by past slips, px
  std::vector<double> cap_;       // advance/snap stretch limit per marker, px
  std::size_t frame_index_ = 0;
  bool was_slipping_ = false;
  bool has_slipped_ = false;
};

// ---- dataset generation ----

struct MixEntry {
  Scenario scenario;
  int episodes = 0;
};

struct DatasetConfig {
  std::vector<MixEntry> mix;
  std::uint64_t seed = 42;
  double balance_tolerance = 0.12;  // largest accepted |slip fraction - 0.5|

  static DatasetConfig defaults();
};

// Applies overrides from a flat key-value file onto the defaults. Recognized
// keys: seed, noise_sigma_px, balance_tolerance, and per scenario kind
// "<kind>.episodes" / "<kind>.duration_s" (e.g. trans_slip_x.episodes = 4).
DatasetConfig dataset_config_from(const KeyValueConfig& file);

struct GeneratedDataset {
  std::vector<features::FeatureVector> rows;
  std::size_t episodes = 0;
  std::size_t frames = 0;
  double slip_fraction = 0.0;
};

// Runs the full pipeline over every episode of the mix. Throws when the mix
// produces one class only or leaves the class balance outside tolerance.
GeneratedDataset generate_dataset(const DatasetConfig& config);

}  // namespace tacslip::sim
