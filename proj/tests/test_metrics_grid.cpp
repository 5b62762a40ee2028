#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "tacslip/ml/dataset.hpp"
#include "tacslip/ml/metrics.hpp"
#include "tacslip/ml/train.hpp"
#include "tacslip/rng.hpp"

using namespace tacslip;
using namespace tacslip::ml;

namespace {

// Brute-force scoreboard: walk the arrays, count the four confusion cells,
// then apply the documented formulas including the degenerate conventions.
Metrics metrics_reference(const std::vector<int>& predicted, const std::vector<int>& actual) {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == 1 && actual[i] == 1) ++tp;
    if (predicted[i] == 1 && actual[i] == 0) ++fp;
    if (predicted[i] == 0 && actual[i] == 1) ++fn;
    if (predicted[i] == 0 && actual[i] == 0) ++tn;
  }
  Metrics m;
  m.confusion = {tp, fp, fn, tn};
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(predicted.size());
  if (tp + fp > 0)
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  else
    m.precision = tp + fn == 0 ? 1.0 : 0.0;
  m.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

LabeledDataset tiny_separable(std::size_t n) {
  LabeledDataset data;
  data.dim = 1;
  data.feature_names = {"a"};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    data.add_row(std::vector<double>{label == 1 ? 5.0 + static_cast<double>(i) * 0.01
                                                : -5.0 - static_cast<double>(i) * 0.01},
                 label);
  }
  return data;
}

}  // namespace

TEST_CASE("compute_metrics equals brute-force counting over many random pairs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<int> predicted(1000), actual(1000);
    // skew the marginals differently per seed so degenerate-ish mixes occur
    const double p_pred = rng.uniform(0.05, 0.95);
    const double p_act = rng.uniform(0.05, 0.95);
    for (int& v : predicted) v = rng.chance(p_pred) ? 1 : 0;
    for (int& v : actual) v = rng.chance(p_act) ? 1 : 0;

    const Metrics got = compute_metrics(predicted, actual);
    const Metrics want = metrics_reference(predicted, actual);
    CHECK(got.confusion.tp == want.confusion.tp);
    CHECK(got.confusion.fp == want.confusion.fp);
    CHECK(got.confusion.fn == want.confusion.fn);
    CHECK(got.confusion.tn == want.confusion.tn);
    CHECK(got.accuracy == want.accuracy);
    CHECK(got.precision == want.precision);
    CHECK(got.recall == want.recall);
    CHECK(got.f1 == want.f1);
  }
}

TEST_CASE("degenerate inputs follow the stated conventions") {
  // all-negative predictions and truths: nothing positive anywhere
  Metrics m = compute_metrics(std::vector<int>{0, 0, 0}, std::vector<int>{0, 0, 0});
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);

  // predictions never fire but positives exist
  m = compute_metrics(std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 1});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);

  // predictions fire but no actual positives
  m = compute_metrics(std::vector<int>{1, 1, 0}, std::vector<int>{0, 0, 0});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 0.0);
}

TEST_CASE("metric input validation") {
  CHECK_THROWS(compute_metrics(std::vector<int>{}, std::vector<int>{}));
  CHECK_THROWS(compute_metrics(std::vector<int>{1}, std::vector<int>{1, 0}));
  CHECK_THROWS(compute_metrics(std::vector<int>{2}, std::vector<int>{1}));
  CHECK_THROWS(compute_metrics(std::vector<int>{0}, std::vector<int>{-1}));
}

TEST_CASE("macro metrics average the two one-vs-rest views") {
  const std::vector<int> predicted = {1, 1, 1, 0};
  const std::vector<int> actual = {1, 0, 0, 0};
  const Metrics m = compute_metrics_macro(predicted, actual);
  // class-1 view: p = 1/3, r = 1; class-0 view: p = 1, r = 1/3; f1 = 1/2 both
  CHECK(m.accuracy == doctest::Approx(0.5));
  CHECK(m.precision == doctest::Approx((1.0 / 3.0 + 1.0) / 2.0));
  CHECK(m.recall == doctest::Approx((1.0 + 1.0 / 3.0) / 2.0));
  CHECK(m.f1 == doctest::Approx(0.5));
}

TEST_CASE("standardizer matches a two-pass mean and population stddev") {
  Rng rng(29);
  LabeledDataset data;
  data.dim = 3;
  data.feature_names = {"a", "b", "c"};
  for (int i = 0; i < 57; ++i) {
    data.add_row(std::vector<double>{rng.uniform(-10.0, 10.0), rng.normal() * 3.0 + 5.0,
                                     rng.uniform(0.0, 1.0)},
                 i % 2);
  }

  const Standardizer s = Standardizer::fit(data);
  const auto n = static_cast<double>(data.size());
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) mean += data.row(i)[j];
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double d = data.row(i)[j] - mean;
      var += d * d;
    }
    var /= n;  // population variance
    CHECK(s.mean[j] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.stddev[j] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  }

  // transform then inverse is the identity
  const std::vector<double> raw = {1.5, -2.0, 0.25};
  const std::vector<double> back = s.inverse(s.transform(raw));
  for (std::size_t j = 0; j < 3; ++j) CHECK(back[j] == doctest::Approx(raw[j]).epsilon(1e-12));
}

TEST_CASE("a constant feature standardizes with stddev one") {
  LabeledDataset data;
  data.dim = 2;
  data.feature_names = {"a", "b"};
  for (int i = 0; i < 10; ++i) data.add_row(std::vector<double>{7.0, static_cast<double>(i)}, i % 2);
  const Standardizer s = Standardizer::fit(data);
  CHECK(s.stddev[0] == 1.0);
  const std::vector<double> z = s.transform(std::vector<double>{7.0, 4.5});
  CHECK(z[0] == 0.0);  // (7 - 7) / 1
}

TEST_CASE("stratified split preserves class ratios and row order") {
  Rng rng(31);
  LabeledDataset data;
  data.dim = 1;
  data.feature_names = {"a"};
  for (int i = 0; i < 200; ++i) data.add_row(std::vector<double>{rng.normal()}, i < 140 ? 0 : 1);

  const TrainTestSplit split = stratified_split(data, 0.2, 7);
  CHECK(split.train.size() + split.test.size() == data.size());

  // per-class test share within one row of the requested fraction
  for (int cls : {0, 1}) {
    const double total = cls == 0 ? 140.0 : 60.0;
    double in_test = 0;
    for (std::size_t r : split.test_rows) in_test += data.labels[r] == cls ? 1 : 0;
    CHECK(std::abs(in_test - 0.2 * total) <= 1.0);
  }

  // indices are disjoint, covering, and ascending within each part
  std::vector<bool> seen(data.size(), false);
  for (std::size_t r : split.train_rows) seen[r] = true;
  for (std::size_t r : split.test_rows) {
    CHECK_FALSE(seen[r]);
    seen[r] = true;
  }
  for (bool b : seen) CHECK(b);
  for (std::size_t i = 1; i < split.test_rows.size(); ++i)
    CHECK(split.test_rows[i - 1] < split.test_rows[i]);
  for (std::size_t i = 1; i < split.train_rows.size(); ++i)
    CHECK(split.train_rows[i - 1] < split.train_rows[i]);

  // deterministic in the seed, different for another seed
  const TrainTestSplit again = stratified_split(data, 0.2, 7);
  CHECK(again.test_rows == split.test_rows);
  const TrainTestSplit other = stratified_split(data, 0.2, 8);
  CHECK(other.test_rows != split.test_rows);
}

TEST_CASE("stratified folds balance both classes across folds") {
  Rng rng(37);
  std::vector<int> labels;
  for (int i = 0; i < 103; ++i) labels.push_back(rng.chance(0.3) ? 1 : 0);

  const int k = 5;
  const std::vector<int> fold_of = stratified_folds(labels, k, 11);
  REQUIRE(fold_of.size() == labels.size());

  for (int cls : {0, 1}) {
    std::vector<int> per_fold(k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) ++per_fold[static_cast<std::size_t>(fold_of[i])];
    const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
    CHECK(*hi - *lo <= 1);
  }
  CHECK(stratified_folds(labels, k, 11) == fold_of);
}

TEST_CASE("to_dataset carries the requested feature columns") {
  std::vector<features::FeatureVector> rows;
  for (int i = 0; i < 6; ++i) {
    features::FeatureVector fv;
    fv.vx = 1.0 + i;
    fv.vy = -1.0 - i;
    fv.entropy = 0.5 * i;
    fv.entropy_rate = 0.25 * i;
    fv.label = i % 2;
    rows.push_back(fv);
  }

  const LabeledDataset vel = to_dataset(rows, FeatureSet::VelocityOnly);
  CHECK(vel.dim == 2);
  CHECK(vel.feature_names == std::vector<std::string>{"vx", "vy"});
  CHECK(vel.row(2)[0] == 3.0);
  CHECK(vel.row(2)[1] == -3.0);

  const LabeledDataset all = to_dataset(rows, FeatureSet::All);
  CHECK(all.dim == 4);
  CHECK(all.feature_names == std::vector<std::string>{"vx", "vy", "entropy", "entropy_rate"});
  CHECK(all.row(3)[2] == 1.5);
  CHECK(all.row(3)[3] == 0.75);

  // unlabeled rows cannot enter training data
  rows[1].label = features::kLabelNone;
  CHECK_THROWS(to_dataset(rows, FeatureSet::All));
}

TEST_CASE("grid search reproduces a hand-rolled cross validation") {
  // knn scoring is deterministic, so the oracle can recompute every cell
  Rng rng(43);
  LabeledDataset data;
  data.dim = 2;
  data.feature_names = {"a", "b"};
  for (int i = 0; i < 90; ++i) {
    const int label = i % 2;
    data.add_row(std::vector<double>{rng.normal() + (label == 1 ? 1.2 : -1.2), rng.normal()},
                 label);
  }

  const Grid grid = {{"k", {1.0, 3.0, 5.0}}};
  const int folds = 3;
  const std::uint64_t seed = 17;
  const GridSearchResult result = grid_search(ModelKind::Knn, grid, data, folds, seed);
  REQUIRE(result.table.size() == 3);

  const std::vector<int> fold_of = stratified_folds(data.labels, folds, mix_seed(seed, 0));
  double best = -1.0;
  std::size_t best_cell = 0;
  for (std::size_t cell = 0; cell < 3; ++cell) {
    double acc_sum = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> train_rows, eval_rows;
      for (std::size_t i = 0; i < data.size(); ++i)
        (fold_of[i] == f ? eval_rows : train_rows).push_back(i);
      KnnOptions opts;
      opts.k = static_cast<int>(grid[0].second[cell]);
      const TrainedModel model = fit_knn(select_rows(data, train_rows), opts);
      const LabeledDataset eval = select_rows(data, eval_rows);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < eval.size(); ++i)
        correct += model.predict(eval.row(i)).label == eval.labels[i] ? 1 : 0;
      acc_sum += static_cast<double>(correct) / static_cast<double>(eval.size());
    }
    const double cv = acc_sum / folds;
    CHECK(result.table[cell].cv_accuracy == doctest::Approx(cv).epsilon(1e-12));
    if (cv > best) {
      best = cv;
      best_cell = cell;
    }
  }
  CHECK(result.best_accuracy == doctest::Approx(best).epsilon(1e-12));
  CHECK(result.best.at("k") == grid[0].second[best_cell]);
}

TEST_CASE("grid ties keep the earliest cell") {
  // trivially separable data scores 1.0 everywhere; the first cell must win
  const LabeledDataset data = tiny_separable(40);
  const Grid grid = {{"trees", {3.0, 5.0, 9.0}}};
  const GridSearchResult result = grid_search(ModelKind::Forest, grid, data, 4, 5);
  CHECK(result.best_accuracy == 1.0);
  CHECK(result.best.at("trees") == 3.0);
}

TEST_CASE("a cell whose fit throws scores zero with a note") {
  const LabeledDataset data = tiny_separable(12);
  // k = 50 exceeds every fold's training size and must fail to fit
  const Grid grid = {{"k", {1.0, 50.0}}};
  const GridSearchResult result = grid_search(ModelKind::Knn, grid, data, 3, 1);
  REQUIRE(result.table.size() == 2);
  CHECK(result.table[0].note.empty());
  CHECK(result.table[1].cv_accuracy == 0.0);
  CHECK_FALSE(result.table[1].note.empty());
  CHECK(result.best.at("k") == 1.0);
}

TEST_CASE("grid cells enumerate lexicographically, first axis slowest") {
  const LabeledDataset data = tiny_separable(24);
  const Grid grid = {{"c", {0.1, 1.0}}, {"gamma", {0.5, 2.0}}};
  const GridSearchResult result = grid_search(ModelKind::SvmRbf, grid, data, 2, 3);
  REQUIRE(result.table.size() == 4);
  CHECK(result.table[0].params.at("c") == 0.1);
  CHECK(result.table[0].params.at("gamma") == 0.5);
  CHECK(result.table[1].params.at("c") == 0.1);
  CHECK(result.table[1].params.at("gamma") == 2.0);
  CHECK(result.table[2].params.at("c") == 1.0);
  CHECK(result.table[2].params.at("gamma") == 0.5);
  CHECK(result.table[3].params.at("c") == 1.0);
  CHECK(result.table[3].params.at("gamma") == 2.0);
}

TEST_CASE("grid search validates its inputs") {
  const LabeledDataset data = tiny_separable(12);
  CHECK_THROWS(grid_search(ModelKind::Knn, {{"k", {1.0}}}, data, 1, 0));
  CHECK_THROWS(grid_search(ModelKind::Knn, {}, data, 3, 0));
  CHECK_THROWS(grid_search(ModelKind::Knn, {{"k", {}}}, data, 3, 0));
}
