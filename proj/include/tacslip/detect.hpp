#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tacslip/features.hpp"
#include "tacslip/markerflow.hpp"
#include "tacslip/ml/model.hpp"
#include "tacslip/sim.hpp"

namespace tacslip::detect {

enum class Phase { NoContact, Grasped, Slipping };

std::string phase_name(Phase phase);

struct DetectorParams {
  markerflow::TrackerParams tracker;
  features::HistogramParams histogram;
  double frame_rate_hz = 25.0;
  int debounce = 2;                   // consecutive raw positives before the flag raises
  double contact_threshold_px = 0.3;  // mean |D| below this counts as a low-energy frame
  int contact_frames = 5;             // consecutive low frames that force NO_CONTACT
};

struct DetectorOutput {
  double t = 0.0;
  bool slip = false;
  double score = 0.0;
  features::FeatureVector features;
  Phase phase = Phase::NoContact;
  double latency_ms = 0.0;  // ingest-to-output wall time
  bool recalibrated = false;
};

// Pulls the named model inputs out of a feature row, in order. Throws on a
// name that is not one of vx, vy, entropy, entropy_rate.
std::vector<double> model_input(const features::FeatureVector& row,
                                const std::vector<std::string>& names);

// Streaming slip detector: marker association against a running reference,
// feature extraction, model prediction, debounce, and contact gating. Frames
// must arrive with strictly increasing timestamps.
class Detector {
 public:
  Detector(ml::TrainedModel model, DetectorParams params = {});

  DetectorOutput ingest_frame(const markerflow::MarkerSet& markers);

  Phase phase() const { return phase_; }
  int recalibrations() const { return tracker_.recalibrations(); }
  const ml::TrainedModel& model() const { return model_; }
  void reset();

 private:
  ml::TrainedModel model_;
  DetectorParams params_;
  markerflow::FieldTracker tracker_;
  std::optional<markerflow::DisplacementField> prev_field_;
  double entropy_prev_ = 0.0;
  double last_t_ = 0.0;
  std::size_t frames_ = 0;
  Phase phase_ = Phase::NoContact;
  int raw_streak_ = 0;
  int low_streak_ = 0;
};

// ---- grip-force control ----

enum class GripReason { Hold, Tighten, Release };

std::string grip_reason_name(GripReason reason);

struct GripCommand {
  double target_force_n = 0.0;
  GripReason reason = GripReason::Hold;
};

struct ControllerParams {
  double delta_f_n = 0.5;    // force step per TIGHTEN
  int stable_window = 12;    // consecutive no-slip frames that count as stable
  double f_min_n = 0.5;
  double f_max_n = 10.0;
  // frames to wait after a TIGHTEN before tightening again, letting the
  // actuator lag settle; 0 reverts to stepping on every flagged frame
  int reaction_frames = 5;
};

// Slip-prevention staircase: debounced slip raises the target force one step
// at a time, a long enough quiet stretch holds, an explicit release request
// ramps down. Target force stays inside [f_min, f_max] and never decreases
// outside release mode.
class GripController {
 public:
  GripController(double initial_force_n, ControllerParams params = {});

  GripCommand update(bool slip);

  void request_release() { release_ = true; }
  double force() const { return force_; }
  bool stable() const { return no_slip_streak_ >= params_.stable_window; }
  int no_slip_streak() const { return no_slip_streak_; }
  // latched when F_max was reached while slip persisted
  bool failed() const { return failed_; }

 private:
  ControllerParams params_;
  double force_;
  int no_slip_streak_ = 0;
  int cooldown_ = 0;
  bool release_ = false;
  bool failed_ = false;
};

// Linear gripper-distance proxy for a commanded force, mm.
double grip_distance_proxy_mm(double force_n);

// ---- episode logs ----

struct EpisodeLogRow {
  double t = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double entropy = 0.0;
  double entropy_rate = 0.0;
  bool slip = false;
  double score = 0.0;
  double force_cmd = 0.0;
  std::string phase;  // detector phase name, or demo stage "1".."4"
  double latency_ms = 0.0;
};

inline const std::vector<std::string>& episode_log_header() {
  static const std::vector<std::string> h = {"t",     "vx",    "vy",        "entropy",
                                            "entropy_rate", "slip", "score", "force_cmd",
                                            "phase", "latency_ms"};
  return h;
}

void write_episode_log(const std::vector<EpisodeLogRow>& rows, const std::string& path);

EpisodeLogRow log_row(const DetectorOutput& out, double force_cmd, std::string phase);

// Feeds a generated episode through a fresh detector. force_cmd is 0 in the
// produced rows (no controller in the loop).
struct ReplayResult {
  std::vector<DetectorOutput> outputs;
  std::vector<EpisodeLogRow> rows;
};

ReplayResult replay_episode(const sim::Episode& episode, const ml::TrainedModel& model,
                            const DetectorParams& params = {});

// ---- closed-loop demo ----

struct DemoConfig {
  sim::GraspPhysicsParams physics;
  ControllerParams controller;
  DetectorParams detector;
  double duration_s = 14.0;
  double initial_force_n = 2.0;
  double load_start_s = 1.0;   // external tangential load ramp window
  double load_full_s = 6.0;
  double load_max_n = 3.2;
  double release_at_s = -1.0;  // < 0: keep holding until the end
  double settle_delta = 3.0;   // |dE/dt| band that counts as settled, nats/s
  std::uint64_t seed = 7;
};

struct DemoFrame {
  EpisodeLogRow row;             // stage annotation in row.phase
  bool physics_slip = false;
  double normal_force_n = 0.0;
  double tangential_n = 0.0;
  GripReason reason = GripReason::Hold;
  double distance_proxy_mm = 0.0;
};

struct DemoResult {
  std::vector<DemoFrame> frames;
  // frame index where each stage begins: [0] static grasp, [1] incipient
  // slip, [2] slip, [3] stable grasp; empty stages sit at npos
  std::vector<std::size_t> stage_start;
  double initial_force_n = 0.0;
  double final_force_n = 0.0;
  double initial_entropy = 0.0;
  double final_entropy = 0.0;
  bool grasp_failure = false;

  std::vector<EpisodeLogRow> log_rows() const;
};

// Runs the grasp physics, detector, and controller in a loop and annotates
// the four grasp stages from the recorded physics trace.
DemoResult run_demo(const ml::TrainedModel& model, const DemoConfig& config = {});

std::string demo_phase_report(const DemoResult& result);

}  // namespace tacslip::detect
