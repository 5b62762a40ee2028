// Command-line surface for the slip-detection pipeline: synthetic data
// generation, classifier training and evaluation, streaming detection, and
// the closed-loop grasp demo.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tacslip/config.hpp"
#include "tacslip/csv.hpp"
#include "tacslip/detect.hpp"
#include "tacslip/features.hpp"
#include "tacslip/ingest.hpp"
#include "tacslip/markerflow.hpp"
#include "tacslip/ml/metrics.hpp"
#include "tacslip/ml/train.hpp"
#include "tacslip/rng.hpp"
#include "tacslip/sim.hpp"

namespace {

using namespace tacslip;

KeyValueConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return KeyValueConfig::parse_file(path);
}

void reject_unused(const KeyValueConfig& cfg, const std::string& path) {
  const std::vector<std::string> unused = cfg.unused_keys();
  if (unused.empty()) return;
  std::string msg = "unknown config key";
  if (unused.size() > 1) msg += 's';
  msg += " in " + path + ":";
  for (const std::string& k : unused) msg += " '" + k + "'";
  throw std::runtime_error(msg);
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

// ---- gen ----

int cmd_gen(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out, const std::string& markers_out) {
  KeyValueConfig cfg = load_config(config_path);
  sim::DatasetConfig dc = sim::dataset_config_from(cfg);
  reject_unused(cfg, config_path);
  if (seed) dc.seed = *seed;

  const sim::GeneratedDataset ds = sim::generate_dataset(dc);
  features::write_feature_csv(ds.rows, out);
  std::cout << "episodes: " << ds.episodes << "\nframes: " << ds.frames
            << "\nfeature rows: " << ds.rows.size()
            << "\nslip fraction: " << csv::format_double(ds.slip_fraction)
            << "\ndataset written to " << out << '\n';

  if (!markers_out.empty()) {
    std::filesystem::create_directories(markers_out);
    std::uint64_t episode_index = 0;
    for (const sim::MixEntry& entry : dc.mix) {
      for (int e = 0; e < entry.episodes; ++e) {
        const sim::Episode ep =
            sim::generate_episode(entry.scenario, mix_seed(dc.seed, episode_index));
        std::ostringstream name;
        name << "episode_" << std::setw(3) << std::setfill('0') << episode_index << '_'
             << sim::scenario_kind_name(entry.scenario.kind) << ".csv";
        markerflow::write_marker_csv(ep.frames,
                                     (std::filesystem::path(markers_out) / name.str()).string());
        ++episode_index;
      }
    }
    std::cout << "marker streams written to " << markers_out << '\n';
  }
  return 0;
}

// ---- train ----

ml::FeatureSet parse_feature_set(const std::string& s) {
  if (s == "velocity") return ml::FeatureSet::VelocityOnly;
  if (s == "all") return ml::FeatureSet::All;
  throw std::runtime_error("unknown feature set '" + s + "' (velocity|all)");
}

std::vector<features::FeatureVector> load_rows(const std::string& path) {
  const ingest::IngestReport rep = ingest::read_feature_table(path);
  std::cout << "loaded " << rep.rows.size() << " rows from " << path << "\ncolumn mapping:\n"
            << rep.mapping;
  if (!rep.has_entropy || !rep.has_entropy_rate)
    std::cout << "  note: entropy columns missing, those features read as 0\n";
  return rep.rows;
}

int cmd_train(const std::string& data_path, const std::string& model_name,
              const std::string& features_name, const std::string& config_path,
              std::uint64_t seed, bool grid, int folds, const std::string& out,
              std::string grid_out) {
  const ml::ModelKind kind = ml::model_kind_from_name(model_name);
  const ml::FeatureSet set = parse_feature_set(features_name);
  const std::vector<features::FeatureVector> rows = load_rows(data_path);
  const ml::LabeledDataset data = ml::to_dataset(rows, set);

  std::map<std::string, double> hyper;
  KeyValueConfig cfg = load_config(config_path);
  if (!grid) {
    static const std::map<ml::ModelKind, std::vector<std::string>> keys = {
        {ml::ModelKind::Logistic, {"c"}},
        {ml::ModelKind::SvmRbf, {"c", "gamma"}},
        {ml::ModelKind::Knn, {"k"}},
        {ml::ModelKind::Forest, {"trees"}},
    };
    for (const std::string& key : keys.at(kind))
      if (cfg.has(key)) hyper[key] = cfg.number(key, 0.0);
  }
  reject_unused(cfg, config_path);

  if (grid) {
    const ml::GridSearchResult gs =
        ml::grid_search(kind, ml::default_grid(kind), data, folds, seed);
    hyper = gs.best;
    std::cout << "grid search (" << folds << "-fold CV):\n";
    for (const ml::GridCell& cell : gs.table) {
      std::cout << " ";
      for (const auto& [k, v] : cell.params) std::cout << ' ' << k << '=' << csv::format_double(v);
      std::cout << "  cv accuracy " << percent(cell.cv_accuracy) << '%';
      if (!cell.note.empty()) std::cout << "  (" << cell.note << ')';
      std::cout << '\n';
    }
    std::cout << "  best:";
    for (const auto& [k, v] : gs.best) std::cout << ' ' << k << '=' << csv::format_double(v);
    std::cout << " at " << percent(gs.best_accuracy) << "%\n";

    if (grid_out.empty()) grid_out = out + ".grid.csv";
    std::ofstream os(grid_out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write file: " + grid_out);
    bool first = true;
    for (const auto& [k, v] : gs.table.front().params) {
      os << (first ? "" : ",") << k;
      first = false;
    }
    os << ",cv_accuracy,note\n";
    for (const ml::GridCell& cell : gs.table) {
      first = true;
      for (const auto& [k, v] : cell.params) {
        os << (first ? "" : ",") << csv::format_double(v);
        first = false;
      }
      os << ',' << csv::format_double(cell.cv_accuracy) << ',' << cell.note << '\n';
    }
    std::cout << "cv table written to " << grid_out << '\n';
  }

  const ml::TrainedModel model = ml::fit_model(kind, data, hyper, seed);
  const ml::Metrics train_metrics = ml::compute_metrics(model.predict_labels(data), data.labels);
  std::cout << "training accuracy: " << percent(train_metrics.accuracy) << "%\n";
  ml::save_model(model, out);
  std::cout << "model written to " << out << '\n';
  return 0;
}

// ---- eval ----

struct EvalRow {
  std::string classifier;
  std::string features;
  bool ok = false;
  ml::Metrics metrics;
  std::string error;
};

std::string render_report(const std::vector<EvalRow>& report) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "classifier" << std::setw(10) << "features" << std::right
     << std::setw(10) << "accuracy" << std::setw(11) << "precision" << std::setw(8) << "recall"
     << std::setw(8) << "f1" << '\n';
  for (const EvalRow& row : report) {
    os << std::left << std::setw(12) << row.classifier << std::setw(10) << row.features
       << std::right;
    if (row.ok) {
      os << std::setw(10) << percent(row.metrics.accuracy) << std::setw(11)
         << percent(row.metrics.precision) << std::setw(8) << percent(row.metrics.recall)
         << std::setw(8) << percent(row.metrics.f1);
    } else {
      os << std::setw(10) << "--" << std::setw(11) << "--" << std::setw(8) << "--" << std::setw(8)
         << "--";
      os << "  " << row.error;
    }
    os << '\n';
  }
  return os.str();
}

int cmd_eval(const std::string& data_path, const std::string& model_filter,
             const std::string& features_filter, std::uint64_t seed, double test_fraction,
             const std::string& out) {
  const std::vector<features::FeatureVector> rows = load_rows(data_path);

  std::vector<ml::ModelKind> kinds = {ml::ModelKind::Logistic, ml::ModelKind::SvmRbf,
                                      ml::ModelKind::Knn, ml::ModelKind::Forest};
  if (!model_filter.empty()) kinds = {ml::model_kind_from_name(model_filter)};
  std::vector<ml::FeatureSet> sets = {ml::FeatureSet::VelocityOnly, ml::FeatureSet::All};
  if (!features_filter.empty()) sets = {parse_feature_set(features_filter)};

  std::vector<EvalRow> report;
  std::uint64_t cell = 0;
  for (const ml::FeatureSet set : sets) {
    const ml::LabeledDataset data = ml::to_dataset(rows, set);
    // identical row partition for every feature set: the split depends only
    // on labels and seed
    const ml::TrainTestSplit split = ml::stratified_split(data, test_fraction, seed);
    for (const ml::ModelKind kind : kinds) {
      EvalRow row;
      row.classifier = ml::model_kind_name(kind);
      row.features = set == ml::FeatureSet::VelocityOnly ? "velocity" : "all";
      try {
        const ml::TrainedModel model = ml::fit_model(kind, split.train, {}, mix_seed(seed, cell));
        row.metrics = ml::compute_metrics(model.predict_labels(split.test), split.test.labels);
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      report.push_back(std::move(row));
      ++cell;
    }
  }

  const std::string text = render_report(report);
  std::cout << text;
  if (!out.empty()) {
    std::ofstream os(out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write file: " + out);
    os << text;
    std::cout << "report written to " << out << '\n';
  }
  for (const EvalRow& row : report)
    if (!row.ok) return 1;
  return 0;
}

// ---- detect ----

std::vector<markerflow::MarkerSet> load_stream(const std::string& markers_path,
                                               const std::string& frames_dir, double fps) {
  if (!markers_path.empty() && !frames_dir.empty())
    throw std::runtime_error("give either --markers or --frames, not both");
  if (!markers_path.empty()) {
    if (markers_path != "-") return markerflow::read_marker_csv(markers_path);
    // spool standard input so the CSV reader can be reused
    const std::filesystem::path tmp =
        std::filesystem::temp_directory_path() / "tacslip_stdin_stream.csv";
    {
      std::ofstream os(tmp, std::ios::binary);
      os << std::cin.rdbuf();
    }
    auto frames = markerflow::read_marker_csv(tmp.string());
    std::filesystem::remove(tmp);
    return frames;
  }
  if (!frames_dir.empty()) {
    std::vector<markerflow::MarkerSet> out;
    for (const markerflow::GrayFrame& frame : markerflow::read_pgm_dir(frames_dir, fps)) {
      markerflow::MarkerSet set = markerflow::detect_markers(frame);
      set.timestamp = frame.timestamp;
      out.push_back(std::move(set));
    }
    return out;
  }
  throw std::runtime_error("no input: give --markers <csv|-> or --frames <pgm dir>");
}

int cmd_detect(const std::string& markers_path, const std::string& frames_dir, double fps,
               const std::string& model_path, int debounce, const std::string& out) {
  const ml::TrainedModel model = ml::load_model(model_path);
  const std::vector<markerflow::MarkerSet> stream = load_stream(markers_path, frames_dir, fps);
  if (stream.empty()) throw std::runtime_error("input stream has no frames");

  detect::DetectorParams params;
  params.debounce = debounce;
  params.frame_rate_hz = fps;
  detect::Detector det(model, params);

  std::vector<detect::EpisodeLogRow> log;
  log.reserve(stream.size());
  std::size_t flagged = 0;
  for (const markerflow::MarkerSet& frame : stream) {
    const detect::DetectorOutput o = det.ingest_frame(frame);
    flagged += o.slip ? 1 : 0;
    log.push_back(detect::log_row(o, 0.0, detect::phase_name(o.phase)));
  }
  if (!out.empty()) {
    detect::write_episode_log(log, out);
    std::cout << "log written to " << out << '\n';
  }
  std::cout << "frames: " << stream.size() << "\nslip-flagged frames: " << flagged
            << "\nrecalibrations: " << det.recalibrations() << '\n';
  return 0;
}

// ---- demo ----

ml::TrainedModel quick_demo_model(std::uint64_t seed) {
  std::cout << "no model file given, training a forest on the default synthetic mix\n";
  const sim::GeneratedDataset ds = sim::generate_dataset(sim::DatasetConfig::defaults());
  ml::ForestOptions fo;
  fo.seed = mix_seed(seed, 1);
  return ml::fit_random_forest(ml::to_dataset(ds.rows, ml::FeatureSet::All), fo);
}

detect::DemoConfig demo_config_from(const KeyValueConfig& cfg) {
  detect::DemoConfig dc;
  dc.duration_s = cfg.number("duration_s", dc.duration_s);
  dc.initial_force_n = cfg.number("initial_force_n", dc.initial_force_n);
  dc.load_start_s = cfg.number("load_start_s", dc.load_start_s);
  dc.load_full_s = cfg.number("load_full_s", dc.load_full_s);
  dc.load_max_n = cfg.number("load_max_n", dc.load_max_n);
  dc.release_at_s = cfg.number("release_at_s", dc.release_at_s);
  dc.settle_delta = cfg.number("settle_delta", dc.settle_delta);
  dc.seed = static_cast<std::uint64_t>(cfg.number("seed", static_cast<double>(dc.seed)));
  dc.physics.friction_mu = cfg.number("friction_mu", dc.physics.friction_mu);
  dc.physics.noise_sigma_px = cfg.number("noise_sigma_px", dc.physics.noise_sigma_px);
  dc.controller.delta_f_n = cfg.number("delta_f_n", dc.controller.delta_f_n);
  dc.controller.stable_window =
      static_cast<int>(cfg.number("stable_window", dc.controller.stable_window));
  dc.controller.f_min_n = cfg.number("f_min_n", dc.controller.f_min_n);
  dc.controller.f_max_n = cfg.number("f_max_n", dc.controller.f_max_n);
  dc.controller.reaction_frames =
      static_cast<int>(cfg.number("reaction_frames", dc.controller.reaction_frames));
  dc.detector.debounce = static_cast<int>(cfg.number("debounce", dc.detector.debounce));
  return dc;
}

int cmd_demo(const std::string& model_path, const std::string& config_path,
             std::optional<std::uint64_t> seed, const std::string& out,
             const std::string& report_path) {
  KeyValueConfig cfg = load_config(config_path);
  detect::DemoConfig dc = demo_config_from(cfg);
  reject_unused(cfg, config_path);
  if (seed) dc.seed = *seed;

  const ml::TrainedModel model =
      model_path.empty() ? quick_demo_model(dc.seed) : ml::load_model(model_path);
  const detect::DemoResult res = detect::run_demo(model, dc);

  if (!out.empty()) {
    detect::write_episode_log(res.log_rows(), out);
    std::cout << "log written to " << out << '\n';
  }
  std::string report = detect::demo_phase_report(res);
  {
    // stability of the final two seconds
    const double window_s = 2.0;
    double max_rate = 0.0;
    std::size_t flags = 0;
    const double t_end = res.frames.empty() ? 0.0 : res.frames.back().row.t;
    for (const detect::DemoFrame& f : res.frames) {
      if (f.row.t < t_end - window_s) continue;
      max_rate = std::max(max_rate, std::abs(f.row.entropy_rate));
      flags += f.row.slip ? 1 : 0;
    }
    std::ostringstream os;
    os << "final " << csv::format_double(window_s) << " s: slip flags " << flags
       << ", max |dE/dt| = " << csv::format_double(max_rate) << " nats/s (band "
       << csv::format_double(dc.settle_delta) << ")\n";
    report += os.str();
  }
  std::cout << report;
  if (!report_path.empty()) {
    std::ofstream os(report_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write file: " + report_path);
    os << report;
    std::cout << "report written to " << report_path << '\n';
  }
  if (res.grasp_failure) {
    std::cerr << "error: grasp failure, force limit reached while still slipping\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optical-tactile slip detection pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::uint64_t seed_value = 0;

  // gen
  auto* gen = app.add_subcommand("gen", "generate the synthetic labeled dataset");
  std::string markers_out;
  auto* gen_seed = gen->add_option("--seed", seed_value, "dataset seed (default 42)");
  gen->add_option("--config", config_path, "scenario mix config file");
  gen->add_option("--out", out, "output feature CSV")->capture_default_str();
  gen->add_option("--markers-out", markers_out, "also write per-episode marker CSVs here");

  // train
  auto* train = app.add_subcommand("train", "fit a classifier and save the model file");
  std::string data_path;
  std::string model_name = "rf";
  std::string features_name = "all";
  bool grid = false;
  int folds = 5;
  std::string grid_out;
  train->add_option("--data", data_path, "feature CSV")->required();
  train->add_option("--model", model_name, "lr|svm|knn|rf")->capture_default_str();
  train->add_option("--features", features_name, "velocity|all")->capture_default_str();
  train->add_option("--config", config_path, "hyperparameter overrides (c, gamma, k, trees)");
  train->add_option("--seed", seed_value, "training seed")->capture_default_str();
  train->add_flag("--grid", grid, "pick hyperparameters by cross-validated grid search");
  train->add_option("--folds", folds, "CV folds for --grid")->capture_default_str();
  train->add_option("--out", out, "model file path");
  train->add_option("--grid-out", grid_out, "CV table CSV (default <out>.grid.csv)");

  // eval
  auto* eval = app.add_subcommand("eval", "train/test report over classifiers x feature sets");
  std::string model_filter;
  std::string features_filter;
  double test_fraction = 0.2;
  eval->add_option("--data", data_path, "feature CSV")->required();
  eval->add_option("--model", model_filter, "restrict to one classifier (lr|svm|knn|rf)");
  eval->add_option("--features", features_filter, "restrict to one feature set (velocity|all)");
  eval->add_option("--seed", seed_value, "split seed")->capture_default_str();
  eval->add_option("--test-fraction", test_fraction, "held-out fraction")->capture_default_str();
  eval->add_option("--out", out, "also write the report here");

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "stream marker frames through the detector");
  std::string markers_path;
  std::string frames_dir;
  std::string model_path;
  double fps = 25.0;
  int debounce = 2;
  detect_cmd->add_option("--markers", markers_path, "marker CSV stream, or - for stdin");
  detect_cmd->add_option("--frames", frames_dir, "directory of PGM frames");
  detect_cmd->add_option("--fps", fps, "frame rate of the stream")->capture_default_str();
  detect_cmd->add_option("--model-file", model_path, "trained model JSON")->required();
  detect_cmd->add_option("--debounce", debounce, "consecutive positives before the flag")
      ->capture_default_str();
  detect_cmd->add_option("--out", out, "episode log CSV");

  // demo
  auto* demo = app.add_subcommand("demo", "closed-loop slip-prevention grasp demo");
  std::string report_path;
  demo->add_option("--model-file", model_path, "trained model JSON (otherwise quick-trains one)");
  demo->add_option("--config", config_path, "demo parameter overrides");
  auto* demo_seed = demo->add_option("--seed", seed_value, "demo seed (default 7)");
  demo->add_option("--out", out, "episode log CSV");
  demo->add_option("--report", report_path, "also write the phase report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      std::optional<std::uint64_t> seed;
      if (gen_seed->count() > 0) seed = seed_value;
      if (out.empty()) out = "dataset.csv";
      return cmd_gen(config_path, seed, out, markers_out);
    }
    if (train->parsed()) {
      if (out.empty()) out = "model.json";
      return cmd_train(data_path, model_name, features_name, config_path, seed_value, grid, folds,
                       out, grid_out);
    }
    if (eval->parsed())
      return cmd_eval(data_path, model_filter, features_filter, seed_value, test_fraction, out);
    if (detect_cmd->parsed())
      return cmd_detect(markers_path, frames_dir, fps, model_path, debounce, out);
    if (demo->parsed()) {
      std::optional<std::uint64_t> seed;
      if (demo_seed->count() > 0) seed = seed_value;
      return cmd_demo(model_path, config_path, seed, out, report_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
