#include "tacslip/detect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tacslip/csv.hpp"

namespace tacslip::detect {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  const auto dt = std::chrono::steady_clock::now() - t0;
  return std::chrono::duration<double, std::milli>(dt).count();
}

}  // namespace

std::string phase_name(Phase phase) {
  switch (phase) {
    case Phase::NoContact: return "no_contact";
    case Phase::Grasped: return "grasped";
    case Phase::Slipping: return "slipping";
  }
  throw std::runtime_error("detector: unknown phase");
}

std::string grip_reason_name(GripReason reason) {
  switch (reason) {
    case GripReason::Hold: return "hold";
    case GripReason::Tighten: return "tighten";
    case GripReason::Release: return "release";
  }
  throw std::runtime_error("controller: unknown reason");
}

std::vector<double> model_input(const features::FeatureVector& row,
                                const std::vector<std::string>& names) {
  std::vector<double> x;
  x.reserve(names.size());
  for (const std::string& name : names) {
    if (name == "vx") x.push_back(row.vx);
    else if (name == "vy") x.push_back(row.vy);
    else if (name == "entropy") x.push_back(row.entropy);
    else if (name == "entropy_rate") x.push_back(row.entropy_rate);
    else throw std::runtime_error("detector: model wants unknown feature '" + name + "'");
  }
  return x;
}

Detector::Detector(ml::TrainedModel model, DetectorParams params)
    : model_(std::move(model)), params_(params), tracker_(params.tracker) {
  if (model_.feature_names.empty()) throw std::runtime_error("detector: model has no features");
  if (!(params_.frame_rate_hz > 0.0)) throw std::runtime_error("detector: bad frame rate");
  if (params_.debounce < 1) throw std::runtime_error("detector: debounce must be >= 1");
  // fail on an unusable feature list up front, not mid-stream
  model_input({}, model_.feature_names);
}

void Detector::reset() {
  tracker_.reset();
  prev_field_.reset();
  entropy_prev_ = 0.0;
  last_t_ = 0.0;
  frames_ = 0;
  phase_ = Phase::NoContact;
  raw_streak_ = 0;
  low_streak_ = 0;
}

DetectorOutput Detector::ingest_frame(const markerflow::MarkerSet& markers) {
  const auto t0 = std::chrono::steady_clock::now();
  if (frames_ > 0 && !(markers.timestamp > last_t_))
    throw std::runtime_error("detector: frame timestamps must strictly increase");
  last_t_ = markers.timestamp;
  ++frames_;

  DetectorOutput out;
  out.t = markers.timestamp;
  out.features.t = markers.timestamp;

  const int recal_before = tracker_.recalibrations();
  auto field = tracker_.feed(markers);
  out.recalibrated = tracker_.recalibrations() != recal_before;
  if (out.recalibrated) prev_field_.reset();  // the feature chain restarts

  if (!field) {
    // reference not established yet
    phase_ = Phase::NoContact;
    raw_streak_ = 0;
    low_streak_ = 0;
    out.phase = phase_;
    out.latency_ms = ms_since(t0);
    return out;
  }

  if (!prev_field_) {
    out.features.entropy =
        features::entropy(features::magnitude_histogram(*field, params_.histogram));
  } else {
    out.features = features::build_feature_vector(*field, *prev_field_, entropy_prev_,
                                                  params_.frame_rate_hz, features::kLabelNone,
                                                  params_.histogram);
  }
  entropy_prev_ = out.features.entropy;
  prev_field_ = std::move(*field);

  // contact gate: sustained low field energy forces NO_CONTACT, any energetic
  // frame restores contact
  if (prev_field_->mean_magnitude() < params_.contact_threshold_px) {
    if (low_streak_ < params_.contact_frames) ++low_streak_;
    if (low_streak_ >= params_.contact_frames) phase_ = Phase::NoContact;
  } else {
    low_streak_ = 0;
    if (phase_ == Phase::NoContact) phase_ = Phase::Grasped;
  }

  const ml::Prediction pred = model_.predict(model_input(out.features, model_.feature_names));
  out.score = pred.score;
  const bool raw = pred.label == 1 && phase_ != Phase::NoContact;
  raw_streak_ = raw ? raw_streak_ + 1 : 0;
  out.slip = raw_streak_ >= params_.debounce;
  if (out.slip) {
    phase_ = Phase::Slipping;
  } else if (phase_ == Phase::Slipping) {
    phase_ = Phase::Grasped;
  }
  out.phase = phase_;
  out.latency_ms = ms_since(t0);
  return out;
}

// ---- grip-force control ----

GripController::GripController(double initial_force_n, ControllerParams params)
    : params_(params) {
  if (!(params_.delta_f_n > 0.0)) throw std::runtime_error("controller: force step must be > 0");
  if (params_.stable_window < 1) throw std::runtime_error("controller: stable window must be >= 1");
  if (!(params_.f_min_n <= params_.f_max_n))
    throw std::runtime_error("controller: f_min must not exceed f_max");
  force_ = std::clamp(initial_force_n, params_.f_min_n, params_.f_max_n);
}

GripCommand GripController::update(bool slip) {
  if (release_) {
    no_slip_streak_ = 0;
    if (force_ > params_.f_min_n) {
      force_ = std::max(params_.f_min_n, force_ - params_.delta_f_n);
      return {force_, GripReason::Release};
    }
    return {force_, GripReason::Hold};
  }

  if (cooldown_ > 0) --cooldown_;
  if (slip) {
    no_slip_streak_ = 0;
    if (cooldown_ == 0) {
      if (force_ >= params_.f_max_n - 1e-12) {
        failed_ = true;  // saturated and still slipping
        return {force_, GripReason::Tighten};
      }
      force_ = std::min(params_.f_max_n, force_ + params_.delta_f_n);
      cooldown_ = params_.reaction_frames;
      return {force_, GripReason::Tighten};
    }
    return {force_, GripReason::Hold};  // step pending, actuator still settling
  }

  if (no_slip_streak_ < params_.stable_window) ++no_slip_streak_;
  return {force_, GripReason::Hold};
}

double grip_distance_proxy_mm(double force_n) {
  // wider command closes the gripper: 40 mm open, 4 mm per newton
  return 40.0 - 4.0 * force_n;
}

// ---- episode logs ----

EpisodeLogRow log_row(const DetectorOutput& out, double force_cmd, std::string phase) {
  EpisodeLogRow row;
  row.t = out.t;
  row.vx = out.features.vx;
  row.vy = out.features.vy;
  row.entropy = out.features.entropy;
  row.entropy_rate = out.features.entropy_rate;
  row.slip = out.slip;
  row.score = out.score;
  row.force_cmd = force_cmd;
  row.phase = std::move(phase);
  row.latency_ms = out.latency_ms;
  return row;
}

void write_episode_log(const std::vector<EpisodeLogRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write file: " + path);
  const auto& header = episode_log_header();
  for (std::size_t i = 0; i < header.size(); ++i)
    os << header[i] << (i + 1 < header.size() ? ',' : '\n');
  for (const EpisodeLogRow& r : rows) {
    os << csv::format_double(r.t) << ',' << csv::format_double(r.vx) << ','
       << csv::format_double(r.vy) << ',' << csv::format_double(r.entropy) << ','
       << csv::format_double(r.entropy_rate) << ',' << (r.slip ? 1 : 0) << ','
       << csv::format_double(r.score) << ',' << csv::format_double(r.force_cmd) << ','
       << r.phase << ',' << csv::format_double(r.latency_ms) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

ReplayResult replay_episode(const sim::Episode& episode, const ml::TrainedModel& model,
                            const DetectorParams& params) {
  DetectorParams p = params;
  p.frame_rate_hz = episode.scenario.frame_rate_hz;
  Detector det(model, p);
  ReplayResult res;
  res.outputs.reserve(episode.frames.size());
  res.rows.reserve(episode.frames.size());
  for (const markerflow::MarkerSet& frame : episode.frames) {
    DetectorOutput out = det.ingest_frame(frame);
    res.rows.push_back(log_row(out, 0.0, phase_name(out.phase)));
    res.outputs.push_back(std::move(out));
  }
  return res;
}

// ---- closed-loop demo ----

std::vector<EpisodeLogRow> DemoResult::log_rows() const {
  std::vector<EpisodeLogRow> rows;
  rows.reserve(frames.size());
  for (const DemoFrame& f : frames) rows.push_back(f.row);
  return rows;
}

DemoResult run_demo(const ml::TrainedModel& model, const DemoConfig& config) {
  if (!(config.duration_s > 0.0)) throw std::runtime_error("demo: duration must be positive");
  if (!(config.load_start_s < config.load_full_s))
    throw std::runtime_error("demo: load ramp must have positive width");

  const double dt = 1.0 / config.physics.frame_rate_hz;
  const int n_frames = static_cast<int>(std::lround(config.duration_s * config.physics.frame_rate_hz));

  sim::GraspSim grasp(config.physics, config.seed);
  DetectorParams dp = config.detector;
  dp.frame_rate_hz = config.physics.frame_rate_hz;
  Detector det(model, dp);
  GripController ctl(config.initial_force_n, config.controller);

  DemoResult res;
  res.frames.reserve(n_frames);
  res.initial_force_n = ctl.force();

  double command = ctl.force();
  for (int i = 0; i < n_frames; ++i) {
    const double t = i * dt;
    double load = 0.0;
    if (t >= config.load_start_s) {
      const double u = std::min(1.0, (t - config.load_start_s) /
                                         (config.load_full_s - config.load_start_s));
      load = config.load_max_n * u;
    }
    if (config.release_at_s >= 0.0 && t >= config.release_at_s) ctl.request_release();

    const markerflow::MarkerSet frame = grasp.step(command, load);
    const DetectorOutput out = det.ingest_frame(frame);
    const GripCommand cmd = ctl.update(out.slip);
    command = cmd.target_force_n;

    DemoFrame df;
    df.row = log_row(out, cmd.target_force_n, "1");  // stage annotated below
    df.physics_slip = grasp.slipping();
    df.normal_force_n = grasp.state().normal_force_n;
    df.tangential_n = grasp.state().tangential_load_n;
    df.reason = cmd.reason;
    df.distance_proxy_mm = grip_distance_proxy_mm(cmd.target_force_n);
    res.frames.push_back(std::move(df));
  }

  res.grasp_failure = ctl.failed();
  res.final_force_n = ctl.force();

  // Stage annotation from the recorded physics trace: (1) static grasp until
  // the load ratio enters the incipient band, (2) incipient slip until the
  // object first moves, (3) slip until both the physics and the detector have
  // gone quiet for good, (4) stable grasp.
  const std::size_t npos = static_cast<std::size_t>(-1);
  const std::size_t n = res.frames.size();
  std::size_t b2 = npos;
  std::size_t b3 = npos;
  std::size_t b4 = npos;
  for (std::size_t i = 0; i < n; ++i) {
    const DemoFrame& f = res.frames[i];
    const double hold = config.physics.friction_mu * f.normal_force_n;
    const double ratio = hold > 0.0 ? f.tangential_n / hold : 0.0;
    if (b2 == npos && ratio > config.physics.incipient_ratio) b2 = i;
    if (b3 == npos && f.physics_slip) b3 = i;
  }
  if (b3 != npos) {
    std::size_t last_active = b3;
    for (std::size_t i = b3; i < n; ++i)
      if (res.frames[i].physics_slip || res.frames[i].row.slip) last_active = i;
    if (last_active + 1 < n) b4 = last_active + 1;
  }
  res.stage_start = {0, b2, b3, b4};
  for (std::size_t i = 0; i < n; ++i) {
    int stage = 1;
    if (b2 != npos && i >= b2) stage = 2;
    if (b3 != npos && i >= b3) stage = 3;
    if (b4 != npos && i >= b4) stage = 4;
    res.frames[i].row.phase = std::to_string(stage);
  }

  if (!res.frames.empty()) {
    res.initial_entropy = res.frames.front().row.entropy;
    res.final_entropy = res.frames.back().row.entropy;
  }
  return res;
}

std::string demo_phase_report(const DemoResult& result) {
  static const char* kStageNames[] = {"static initial grasp", "incipient slip", "slip",
                                      "stable grasp"};
  const std::size_t npos = static_cast<std::size_t>(-1);
  std::ostringstream os;
  os << "demo frames: " << result.frames.size() << '\n';
  for (std::size_t s = 0; s < 4; ++s) {
    os << "stage (" << s + 1 << ") " << kStageNames[s] << ": ";
    if (s < result.stage_start.size() && result.stage_start[s] != npos) {
      const std::size_t start = result.stage_start[s];
      os << "from frame " << start << " (t = "
         << csv::format_double(result.frames[start].row.t) << " s)";
    } else {
      os << "not reached";
    }
    os << '\n';
  }
  os << "grip force: " << csv::format_double(result.initial_force_n) << " N -> "
     << csv::format_double(result.final_force_n) << " N\n";
  os << "grip distance proxy: " << csv::format_double(grip_distance_proxy_mm(result.initial_force_n))
     << " mm -> " << csv::format_double(grip_distance_proxy_mm(result.final_force_n)) << " mm\n";
  os << "field entropy: " << csv::format_double(result.initial_entropy) << " -> "
     << csv::format_double(result.final_entropy) << " nats\n";
  os << "grasp failure: " << (result.grasp_failure ? "yes" : "no") << '\n';
  return os.str();
}

}  // namespace tacslip::detect
