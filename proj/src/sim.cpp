#include "tacslip/sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>

namespace tacslip::sim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
// ground-truth object speed above which a frame is labeled slipping
constexpr double kSlipLabelPxPerFrame = 0.1;

double smoothstep(double t0, double t1, double t) {
  if (t <= t0) return 0.0;
  if (t >= t1) return 1.0;
  const double u = (t - t0) / (t1 - t0);
  return u * u * (3.0 - 2.0 * u);
}

struct GridGeometry {
  std::vector<markerflow::Point2> rest;
  markerflow::Point2 center{};
  std::vector<double> radius;  // px from the grid centre
  std::vector<double> edge;    // radius normalized to [0, 1]
};

GridGeometry make_grid(int cols, int rows, double spacing) {
  if (cols < 1 || rows < 1 || !(spacing > 0.0))
    throw std::runtime_error("sim: bad marker grid parameters");
  GridGeometry g;
  const double x0 = 60.0;
  const double y0 = 50.0;
  g.rest.reserve(static_cast<std::size_t>(cols) * rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      g.rest.push_back({x0 + c * spacing, y0 + r * spacing});
    }
  }
  g.center = {x0 + 0.5 * (cols - 1) * spacing, y0 + 0.5 * (rows - 1) * spacing};
  g.radius.reserve(g.rest.size());
  double max_r = 0.0;
  for (const auto& p : g.rest) {
    const double r = std::hypot(p.x - g.center.x, p.y - g.center.y);
    g.radius.push_back(r);
    max_r = std::max(max_r, r);
  }
  g.edge.reserve(g.rest.size());
  for (double r : g.radius) g.edge.push_back(max_r > 0.0 ? r / max_r : 0.0);
  return g;
}

// Static grasp imprint: gentle radial compression plus a fixed per-marker
// texture, so a resting contact has a non-zero, mildly spread field.
struct BaseField {
  std::vector<double> bx;
  std::vector<double> by;

  BaseField(const GridGeometry& g, Rng& rng) {
    const std::size_t n = g.rest.size();
    bx.resize(n);
    by.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      bx[i] = -0.012 * (g.rest[i].x - g.center.x);
      by[i] = -0.012 * (g.rest[i].y - g.center.y);
      const double ang = rng.uniform(0.0, kTwoPi);
      const double mag = rng.uniform(0.2, 1.0);
      bx[i] += mag * std::cos(ang);
      by[i] += mag * std::sin(ang);
    }
  }
};

// Writes the ideal (noise-free) displacement for one frame. Returns the
// ground-truth object speed in px per frame.
class FieldProgram {
 public:
  virtual ~FieldProgram() = default;
  virtual double frame(double t, std::vector<double>& dx, std::vector<double>& dy) = 0;
};

class NoContactProgram : public FieldProgram {
 public:
  double frame(double, std::vector<double>& dx, std::vector<double>& dy) override {
    std::fill(dx.begin(), dx.end(), 0.0);
    std::fill(dy.begin(), dy.end(), 0.0);
    return 0.0;
  }
};

class StableGraspProgram : public FieldProgram {
 public:
  StableGraspProgram(const GridGeometry& g, Rng& rng) : base_(g, rng) {
    phase_ = rng.uniform(0.0, kTwoPi);
  }

  double frame(double t, std::vector<double>& dx, std::vector<double>& dy) override {
    const double s = smoothstep(0.4, 1.0, t);
    const double breathe = 1.0 + 0.03 * std::sin(kTwoPi * 0.3 * t + phase_);
    const double a = s * breathe;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] = a * base_.bx[i];
      dy[i] = a * base_.by[i];
    }
    return 0.0;
  }

 private:
  BaseField base_;
  double phase_ = 0.0;
};

// Firm grasp on an accelerating object: the whole field swings along x with
// every marker displaced by the same amount, so the histogram stays in one
// bin no matter how fast the motion is.
class AccelProgram : public FieldProgram {
 public:
  explicit AccelProgram(Rng& rng) {
    amplitude_ = rng.uniform(7.0, 8.5);
    burst_s_ = rng.uniform(0.8, 1.0);
    first_burst_ = rng.uniform(1.8, 2.4);
  }

  double frame(double t, std::vector<double>& dx, std::vector<double>& dy) override {
    double a = 1.2 * smoothstep(0.4, 1.0, t);
    if (t >= first_burst_) {
      const double period = burst_s_ + 2.0;
      const int k = static_cast<int>((t - first_burst_) / period);
      const double local = t - first_burst_ - k * period;
      if (local < burst_s_) {
        const double wave = std::sin(kTwoPi * 0.5 * local / burst_s_);
        const double sign = k % 2 == 0 ? 1.0 : -1.0;
        a += sign * amplitude_ * wave * wave;
      }
    }
    std::fill(dx.begin(), dx.end(), a);
    std::fill(dy.begin(), dy.end(), 0.0);
    return 0.0;
  }

 private:
  double amplitude_ = 8.0;
  double burst_s_ = 0.9;
  double first_burst_ = 2.0;
};

class ContactLossProgram : public FieldProgram {
 public:
  ContactLossProgram(const GridGeometry& g, double duration_s, Rng& rng)
      : base_(g, rng), release_(0.55 * duration_s) {}

  double frame(double t, std::vector<double>& dx, std::vector<double>& dy) override {
    const double s = smoothstep(0.3, 0.9, t);
    const double decay = t < release_ ? 1.0 : std::exp(-(t - release_) / 0.25);
    const double a = s * decay;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] = a * base_.bx[i];
      dy[i] = a * base_.by[i];
    }
    return 0.0;
  }

 private:
  BaseField base_;
  double release_;
};

// Shear load grows edge-weighted until the gel limit, then the object slides:
// each marker is dragged along until its own stretch limit and snaps back,
// which staggers the field into the erratic slip signature.
class TransSlipProgram : public FieldProgram {
 public:
  TransSlipProgram(const GridGeometry& g, bool along_y, double duration_s, double frame_rate_hz,
                   Rng& rng)
      : base_(g, rng), rng_(rng), frame_rate_(frame_rate_hz), along_y_(along_y),
        restick_t_(0.75 * duration_s) {
    const std::size_t n = g.rest.size();
    t_load_ = rng.uniform(1.0, 1.5);
    load_rate_ = rng.uniform(1.5, 2.5);
    limit_ = rng.uniform(3.0, 4.3);
    slip_speed_ = rng.uniform(30.0, 45.0);
    sign_ = rng.chance(0.5) ? 1.0 : -1.0;
    weight_.resize(n);
    cap_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      weight_[i] = 0.5 + g.edge[i];
      cap_[i] = limit_ * weight_[i] * rng.uniform(1.0, 1.25);
    }
    stretch_.assign(n, 0.0);
    turbulence_.assign(n, 0.0);
  }

  double frame(double t, std::vector<double>& dx, std::vector<double>& dy) override {
    const std::size_t n = dx.size();
    const double s = smoothstep(0.3, 0.9, t);
    double v_frame = 0.0;
    if (slipping_ && t >= restick_t_) {
      // the grip recovers: the object re-sticks and the deformed field stays
      slipping_ = false;
      stuck_ = true;
    }
    if (stuck_) {
      const double settle = std::exp(-1.0 / (0.3 * frame_rate_));
      for (double& tv : turbulence_) tv *= settle;
    } else if (!slipping_) {
      const double u = load_rate_ * std::max(0.0, t - t_load_);
      if (u >= limit_) {
        slipping_ = true;
      } else {
        for (std::size_t i = 0; i < n; ++i) stretch_[i] = u * weight_[i];
      }
    }
    if (slipping_) {
      v_frame = slip_speed_ / frame_rate_ * (1.0 + 0.15 * rng_.uniform(-1.0, 1.0));
      for (std::size_t i = 0; i < n; ++i) {
        stretch_[i] += v_frame;
        if (stretch_[i] > cap_[i])
          stretch_[i] = cap_[i] * (0.45 + 0.06 * rng_.uniform(-1.0, 1.0));
        turbulence_[i] =
            std::clamp(turbulence_[i] + 0.25 * rng_.uniform(-1.0, 1.0), -0.8, 0.8);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double along = sign_ * stretch_[i];
      if (along_y_) {
        dx[i] = s * base_.bx[i] + turbulence_[i];
        dy[i] = s * base_.by[i] + along;
      } else {
        dx[i] = s * base_.bx[i] + along;
        dy[i] = s * base_.by[i] + turbulence_[i];
      }
    }
    return v_frame;
  }

 private:
  BaseField base_;
  Rng& rng_;
  double frame_rate_;
  bool along_y_;
  double restick_t_;        // when the grip recovers and the slide ends
  double t_load_ = 1.2;
  double load_rate_ = 2.0;
  double limit_ = 4.0;      // px of gel stretch where gross slip starts
  double slip_speed_ = 38.0;  // px/s object speed once sliding
  double sign_ = 1.0;
  std::vector<double> weight_;
  std::vector<double> cap_;
  std::vector<double> stretch_;
  std::vector<double> turbulence_;
  bool slipping_ = false;
  bool stuck_ = false;
};

// Torsional analogue: the contact rotates, markers advance in angle and snap
// back individually. Mean velocity stays near zero by symmetry.
class RotSlipProgram : public FieldProgram {
 public:
  RotSlipProgram(const GridGeometry& g, double duration_s, double frame_rate_hz, Rng& rng)
      : base_(g, rng), grid_(g), rng_(rng), frame_rate_(frame_rate_hz),
        restick_t_(0.75 * duration_s) {
    const std::size_t n = g.rest.size();
    t_load_ = rng.uniform(1.0, 1.5);
    theta_rate_ = rng.uniform(0.018, 0.028);
    theta_max_ = rng.uniform(0.045, 0.06);
    double sum_r = 0.0;
    for (double r : g.radius) sum_r += r;
    mean_radius_ = sum_r / static_cast<double>(n);
    omega_ = rng.uniform(32.0, 46.0) / mean_radius_;
    sign_ = rng.chance(0.5) ? 1.0 : -1.0;
    cap_.resize(n);
    for (std::size_t i = 0; i < n; ++i) cap_[i] = theta_max_ * rng.uniform(1.0, 1.25);
    angle_.assign(n, 0.0);
  }

  double frame(double t, std::vector<double>& dx, std::vector<double>& dy) override {
    const std::size_t n = dx.size();
    const double s = smoothstep(0.3, 0.9, t);
    double v_frame = 0.0;
    if (slipping_ && t >= restick_t_) {
      // re-stick: the twist pattern freezes in place
      slipping_ = false;
      stuck_ = true;
    }
    if (!slipping_ && !stuck_) {
      const double theta = theta_rate_ * std::max(0.0, t - t_load_);
      if (theta >= theta_max_) {
        slipping_ = true;
      } else {
        std::fill(angle_.begin(), angle_.end(), theta);
      }
    }
    if (slipping_) {
      const double step = omega_ / frame_rate_ * (1.0 + 0.15 * rng_.uniform(-1.0, 1.0));
      v_frame = step * mean_radius_;
      for (std::size_t i = 0; i < n; ++i) {
        angle_[i] += step;
        if (angle_[i] > cap_[i]) angle_[i] = cap_[i] * (0.45 + 0.06 * rng_.uniform(-1.0, 1.0));
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double rx = grid_.rest[i].x - grid_.center.x;
      const double ry = grid_.rest[i].y - grid_.center.y;
      const double a = sign_ * angle_[i];
      const double c = std::cos(a);
      const double sn = std::sin(a);
      dx[i] = s * base_.bx[i] + (c * rx - sn * ry - rx);
      dy[i] = s * base_.by[i] + (sn * rx + c * ry - ry);
    }
    return v_frame;
  }

 private:
  BaseField base_;
  const GridGeometry& grid_;
  Rng& rng_;
  double frame_rate_;
  double restick_t_;
  double t_load_ = 1.2;
  double theta_rate_ = 0.022;  // rad/s of torsional loading
  double theta_max_ = 0.05;    // rad where gross rotation starts
  double omega_ = 0.5;         // rad/s object rotation once sliding
  double mean_radius_ = 1.0;
  double sign_ = 1.0;
  std::vector<double> cap_;
  std::vector<double> angle_;
  bool slipping_ = false;
  bool stuck_ = false;
};

std::unique_ptr<FieldProgram> make_program(const Scenario& sc, const GridGeometry& g, Rng& rng) {
  switch (sc.kind) {
    case ScenarioKind::NoContact: return std::make_unique<NoContactProgram>();
    case ScenarioKind::StableGrasp: return std::make_unique<StableGraspProgram>(g, rng);
    case ScenarioKind::TransSlipX:
      return std::make_unique<TransSlipProgram>(g, false, sc.duration_s, sc.frame_rate_hz, rng);
    case ScenarioKind::TransSlipY:
      return std::make_unique<TransSlipProgram>(g, true, sc.duration_s, sc.frame_rate_hz, rng);
    case ScenarioKind::RotSlip:
      return std::make_unique<RotSlipProgram>(g, sc.duration_s, sc.frame_rate_hz, rng);
    case ScenarioKind::AccelNoSlip: return std::make_unique<AccelProgram>(rng);
    case ScenarioKind::ContactLoss:
      return std::make_unique<ContactLossProgram>(g, sc.duration_s, rng);
  }
  throw std::runtime_error("sim: unknown scenario kind");
}

void validate_scenario(const Scenario& sc) {
  if (!(sc.duration_s > 0.0)) throw std::runtime_error("sim: duration must be positive");
  if (!(sc.noise_sigma_px >= 0.0)) throw std::runtime_error("sim: noise sigma must be >= 0");
  if (!(sc.frame_rate_hz > 0.0)) throw std::runtime_error("sim: frame rate must be positive");
  if (!(sc.object.friction_mu > 0.0)) throw std::runtime_error("sim: friction mu must be positive");
}

}  // namespace

std::string scenario_kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::NoContact: return "no_contact";
    case ScenarioKind::StableGrasp: return "stable_grasp";
    case ScenarioKind::TransSlipX: return "trans_slip_x";
    case ScenarioKind::TransSlipY: return "trans_slip_y";
    case ScenarioKind::RotSlip: return "rot_slip";
    case ScenarioKind::AccelNoSlip: return "accel_no_slip";
    case ScenarioKind::ContactLoss: return "contact_loss";
  }
  throw std::runtime_error("sim: unknown scenario kind");
}

ScenarioKind scenario_kind_from_name(const std::string& name) {
  for (ScenarioKind kind :
       {ScenarioKind::NoContact, ScenarioKind::StableGrasp, ScenarioKind::TransSlipX,
        ScenarioKind::TransSlipY, ScenarioKind::RotSlip, ScenarioKind::AccelNoSlip,
        ScenarioKind::ContactLoss}) {
    if (scenario_kind_name(kind) == name) return kind;
  }
  throw std::runtime_error("sim: unknown scenario kind '" + name + "'");
}

bool scenario_can_slip(ScenarioKind kind) {
  return kind == ScenarioKind::TransSlipX || kind == ScenarioKind::TransSlipY ||
         kind == ScenarioKind::RotSlip;
}

Scenario default_scenario(ScenarioKind kind) {
  Scenario sc;
  sc.kind = kind;
  switch (kind) {
    case ScenarioKind::NoContact: sc.duration_s = 12.0; break;
    case ScenarioKind::StableGrasp: sc.duration_s = 20.0; break;
    case ScenarioKind::TransSlipX:
    case ScenarioKind::TransSlipY:
    case ScenarioKind::RotSlip: sc.duration_s = 24.0; break;
    case ScenarioKind::AccelNoSlip: sc.duration_s = 20.0; break;
    case ScenarioKind::ContactLoss: sc.duration_s = 16.0; break;
  }
  return sc;
}

markerflow::MarkerSet rest_grid(const Scenario& scenario) {
  const GridGeometry g = make_grid(scenario.grid_cols, scenario.grid_rows,
                                   scenario.grid_spacing_px);
  markerflow::MarkerSet set;
  set.timestamp = 0.0;
  set.positions = g.rest;
  return set;
}

Episode generate_episode(const Scenario& scenario, std::uint64_t seed) {
  validate_scenario(scenario);
  const GridGeometry g =
      make_grid(scenario.grid_cols, scenario.grid_rows, scenario.grid_spacing_px);
  const std::size_t n = g.rest.size();
  const double dt = 1.0 / scenario.frame_rate_hz;
  const int n_frames = static_cast<int>(std::lround(scenario.duration_s * scenario.frame_rate_hz));
  if (n_frames < 2) throw std::runtime_error("sim: episode needs at least two frames");

  Episode ep;
  ep.scenario = scenario;
  ep.seed = seed;
  ep.frames.reserve(n_frames);
  ep.labels.reserve(n_frames);
  ep.ground_velocity_px.reserve(n_frames);

  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(scenario.kind)));
  const std::unique_ptr<FieldProgram> program = make_program(scenario, g, rng);

  std::vector<double> dx(n);
  std::vector<double> dy(n);
  for (int fi = 0; fi < n_frames; ++fi) {
    const double t = fi * dt;
    const double v = program->frame(t, dx, dy);

    markerflow::MarkerSet frame;
    frame.timestamp = t;
    frame.positions.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      frame.positions.push_back({g.rest[i].x + dx[i] + scenario.noise_sigma_px * rng.normal(),
                                 g.rest[i].y + dy[i] + scenario.noise_sigma_px * rng.normal()});
    }
    ep.frames.push_back(std::move(frame));
    ep.ground_velocity_px.push_back(v);
    ep.labels.push_back(v > kSlipLabelPxPerFrame ? features::kLabelSlip
                                                 : features::kLabelStable);
  }
  return ep;
}

std::vector<features::FeatureVector> feature_rows(const Episode& episode) {
  if (episode.frames.size() < 2) throw std::runtime_error("sim: episode too short for features");
  if (episode.frames.size() != episode.labels.size())
    throw std::runtime_error("sim: frame/label count mismatch");

  markerflow::FieldTracker tracker;
  std::vector<features::FeatureVector> rows;
  rows.reserve(episode.frames.size() - 1);
  std::optional<markerflow::DisplacementField> prev;
  double entropy_prev = 0.0;
  for (std::size_t i = 0; i < episode.frames.size(); ++i) {
    auto field = tracker.feed(episode.frames[i]);
    if (!field) continue;
    if (!prev) {
      entropy_prev = features::entropy(features::magnitude_histogram(*field));
      prev = std::move(*field);
      continue;
    }
    features::FeatureVector row = features::build_feature_vector(
        *field, *prev, entropy_prev, episode.scenario.frame_rate_hz, episode.labels[i]);
    entropy_prev = row.entropy;
    prev = std::move(*field);
    rows.push_back(row);
  }
  return rows;
}

// ---- grasp physics ----

GraspSimState step_grasp_physics(const GraspSimState& state, double grip_cmd_n,
                                 double external_tangential_n, double dt_s,
                                 const GraspPhysicsParams& params) {
  if (!(dt_s > 0.0)) throw std::runtime_error("physics: dt must be positive");
  if (grip_cmd_n < 0.0) throw std::runtime_error("physics: grip command must be >= 0");
  if (external_tangential_n < 0.0)
    throw std::runtime_error("physics: tangential load must be >= 0");
  if (!(params.friction_mu > 0.0)) throw std::runtime_error("physics: mu must be positive");
  if (!(params.grip_lag_tau_s > 0.0)) throw std::runtime_error("physics: lag tau must be positive");

  GraspSimState next = state;
  next.time_s = state.time_s + dt_s;
  next.grip_command_n = grip_cmd_n;
  const double decay = std::exp(-dt_s / params.grip_lag_tau_s);
  next.normal_force_n = grip_cmd_n + (state.normal_force_n - grip_cmd_n) * decay;
  next.tangential_load_n = external_tangential_n;

  const double holdable = params.friction_mu * next.normal_force_n;
  if (external_tangential_n <= holdable) {
    next.object_velocity_px_s = 0.0;
  } else {
    next.object_velocity_px_s = params.slip_gain * (external_tangential_n - holdable);
  }
  next.slip_distance_px = state.slip_distance_px + next.object_velocity_px_s * dt_s;
  return next;
}

GraspSim::GraspSim(const GraspPhysicsParams& params, std::uint64_t seed)
    : params_(params), rng_(mix_seed(seed, 0x67726173)) {
  if (!(params.frame_rate_hz > 0.0)) throw std::runtime_error("physics: bad frame rate");
  const GridGeometry g = make_grid(params.grid_cols, params.grid_rows, params.grid_spacing_px);
  rest_ = g.rest;
  center_ = g.center;
  edge_ = g.edge;
  const std::size_t n = rest_.size();
  stretch_.assign(n, 0.0);
  creep_.assign(n, 0.0);
  retained_.assign(n, 0.0);
  cap_.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    cap_[i] = 4.0 * (0.5 + edge_[i]) * rng_.uniform(1.0, 1.25);
}

double GraspSim::load_ratio() const {
  if (state_.tangential_load_n <= 0.0) return 0.0;
  const double hold = params_.friction_mu * state_.normal_force_n;
  if (hold <= 0.0) return 1e9;
  return state_.tangential_load_n / hold;
}

markerflow::MarkerSet GraspSim::step(double grip_cmd_n, double external_tangential_n) {
  const double dt = 1.0 / params_.frame_rate_hz;
  state_ = step_grasp_physics(state_, grip_cmd_n, external_tangential_n, dt, params_);
  const std::size_t n = rest_.size();
  const double elastic = state_.tangential_load_n * params_.stiffness_px_per_n;
  const bool slip_now = state_.object_velocity_px_s > 0.0;

  if (slip_now) {
    has_slipped_ = true;
    const double advance = state_.object_velocity_px_s * dt;
    for (std::size_t i = 0; i < n; ++i) {
      stretch_[i] += advance;
      if (stretch_[i] > cap_[i]) stretch_[i] = cap_[i] * (0.45 + 0.06 * rng_.uniform(-1.0, 1.0));
    }
  } else {
    if (was_slipping_) {
      // the slip event leaves a residual texture in the gel
      for (std::size_t i = 0; i < n; ++i) retained_[i] = stretch_[i] - elastic;
    }
    for (std::size_t i = 0; i < n; ++i) stretch_[i] = elastic + retained_[i];
    // peripheral creep before the first gross slip
    const double ratio = load_ratio();
    const double inc =
        std::clamp((ratio - params_.incipient_ratio) / (1.0 - params_.incipient_ratio), 0.0, 1.0);
    if (!has_slipped_ && inc > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        if (edge_[i] < 0.55) continue;
        creep_[i] = std::clamp(creep_[i] + 0.12 * inc * edge_[i] * rng_.uniform(-1.0, 1.0),
                               -1.0, 1.0);
      }
    }
  }
  was_slipping_ = slip_now;

  markerflow::MarkerSet frame;
  frame.timestamp = state_.time_s;
  frame.positions.reserve(n);
  const double bulge = 0.004 * state_.normal_force_n;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = stretch_[i] + creep_[i] + bulge * (rest_[i].x - center_.x);
    const double dy = bulge * (rest_[i].y - center_.y);
    frame.positions.push_back({rest_[i].x + dx + params_.noise_sigma_px * rng_.normal(),
                               rest_[i].y + dy + params_.noise_sigma_px * rng_.normal()});
  }
  ++frame_index_;
  return frame;
}

// ---- dataset generation ----

DatasetConfig DatasetConfig::defaults() {
  DatasetConfig cfg;
  auto add = [&cfg](ScenarioKind kind, int episodes, double duration_s) {
    Scenario sc = default_scenario(kind);
    sc.duration_s = duration_s;
    cfg.mix.push_back({sc, episodes});
  };
  add(ScenarioKind::StableGrasp, 4, 16.0);
  add(ScenarioKind::NoContact, 2, 10.0);
  add(ScenarioKind::AccelNoSlip, 5, 16.0);
  add(ScenarioKind::ContactLoss, 3, 12.0);
  add(ScenarioKind::TransSlipX, 5, 24.0);
  add(ScenarioKind::TransSlipY, 5, 24.0);
  add(ScenarioKind::RotSlip, 5, 24.0);
  return cfg;
}

DatasetConfig dataset_config_from(const KeyValueConfig& file) {
  DatasetConfig cfg = DatasetConfig::defaults();
  cfg.seed = static_cast<std::uint64_t>(file.number("seed", static_cast<double>(cfg.seed)));
  cfg.balance_tolerance = file.number("balance_tolerance", cfg.balance_tolerance);
  const double noise = file.number("noise_sigma_px", -1.0);
  for (MixEntry& entry : cfg.mix) {
    const std::string prefix = scenario_kind_name(entry.scenario.kind);
    entry.episodes = static_cast<int>(
        file.number(prefix + ".episodes", static_cast<double>(entry.episodes)));
    entry.scenario.duration_s = file.number(prefix + ".duration_s", entry.scenario.duration_s);
    if (noise >= 0.0) entry.scenario.noise_sigma_px = noise;
  }
  return cfg;
}

GeneratedDataset generate_dataset(const DatasetConfig& config) {
  if (config.mix.empty()) throw std::runtime_error("dataset: empty scenario mix");
  bool any_slip_kind = false;
  bool any_stable_kind = false;
  for (const MixEntry& entry : config.mix) {
    if (entry.episodes < 0) throw std::runtime_error("dataset: negative episode count");
    if (entry.episodes == 0) continue;
    (scenario_can_slip(entry.scenario.kind) ? any_slip_kind : any_stable_kind) = true;
  }
  if (!any_slip_kind || !any_stable_kind)
    throw std::runtime_error("dataset: mix must contain slip and stable scenarios");

  GeneratedDataset out;
  std::uint64_t episode_index = 0;
  for (const MixEntry& entry : config.mix) {
    for (int e = 0; e < entry.episodes; ++e) {
      const Episode ep =
          generate_episode(entry.scenario, mix_seed(config.seed, episode_index++));
      const std::vector<features::FeatureVector> rows = feature_rows(ep);
      out.rows.insert(out.rows.end(), rows.begin(), rows.end());
      out.frames += ep.frames.size();
      ++out.episodes;
    }
  }

  std::size_t slip = 0;
  for (const auto& row : out.rows) slip += row.label == features::kLabelSlip ? 1 : 0;
  if (slip == 0 || slip == out.rows.size())
    throw std::runtime_error("dataset: generated rows carry one class only");
  out.slip_fraction = static_cast<double>(slip) / static_cast<double>(out.rows.size());
  if (std::abs(out.slip_fraction - 0.5) > config.balance_tolerance)
    throw std::runtime_error("dataset: class balance outside tolerance, slip fraction " +
                             std::to_string(out.slip_fraction));
  return out;
}

}  // namespace tacslip::sim
