#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "isonet/baseline/lda.hpp"
#include "isonet/baseline/mww.hpp"
#include "isonet/baseline/pipeline.hpp"
#include "isonet/data/folds.hpp"
#include "isonet/data/normalize.hpp"
#include "isonet/data/synth.hpp"
#include "isonet/eval/leakage.hpp"

using namespace isonet;

namespace {

double brute_mww(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  for (double x : a)
    for (double y : b) {
      if (x < y)
        num += 1.0;
      else if (x == y)
        num += 0.5;
    }
  return num / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// With zero noise AND zero baseline the off-marker bins are exactly zero in
// both classes, so TIC normalization cannot introduce ulp-level class
// differences (with a shared baseline the two templates' row sums differ in
// the last f64 bit and a handful of scaled bins round to different floats).
SynthResult marker_cohort(float noise, std::uint64_t seed, float baseline = 0.5f) {
  SynthSpec spec;
  spec.markers = {{SynthMarker{55, 3, 1.0f, +1}}, {SynthMarker{70, 3, 1.0f, +1}}};
  spec.peak_width_bins = 1;
  spec.noise_sigma = noise;
  spec.baseline_amp = baseline;
  spec.seed = seed;
  auto result = synth_cohort(spec, 8, 5, 10);
  tic_normalize(result.dataset.spectra);
  return result;
}

std::set<int> support_bins(const SynthResult& synth, int width) {
  std::set<int> bins;
  for (const auto& per_class : synth.marker_bins)
    for (int center : per_class)
      for (int b = center - 3 * width; b <= center + 3 * width; ++b) bins.insert(b);
  return bins;
}

}  // namespace

TEST_CASE("mww statistic matches its definition on frozen instances") {
  REQUIRE(mww_statistic<double>({1, 3}, {2, 4}) == 0.75);
  REQUIRE(mww_statistic<double>({1, 2, 3}, {4, 5}) == 1.0);
  REQUIRE(mww_statistic<double>({5}, {5}) == 0.5);
  REQUIRE_THROWS_AS(mww_statistic<double>({}, {1.0}), validation_error);
  REQUIRE_THROWS_AS(mww_statistic<double>({1.0}, {}), validation_error);
}

TEST_CASE("mww statistic equals the brute-force pairwise count exactly") {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> size_dist(1, 50);
  std::uniform_int_distribution<int> tie_values(0, 9);
  std::uniform_real_distribution<double> real_dist(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const bool with_ties = trial % 2 == 0;
    std::vector<double> a(static_cast<std::size_t>(size_dist(rng)));
    std::vector<double> b(static_cast<std::size_t>(size_dist(rng)));
    for (auto& v : a) v = with_ties ? tie_values(rng) : real_dist(rng);
    for (auto& v : b) v = with_ties ? tie_values(rng) : real_dist(rng);
    const double fast = mww_statistic(a, b);
    const double brute = brute_mww(a, b);
    REQUIRE(fast == brute);
    REQUIRE(fast >= 0.0);
    REQUIRE(fast <= 1.0);
    // complement identity, exact
    REQUIRE(mww_statistic(b, a) + fast == 1.0);
  }
}

TEST_CASE("mww statistic is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.1, 4.0);
  std::vector<double> a(17), b(23);
  for (auto& v : a) v = dist(rng);
  for (auto& v : b) v = dist(rng);
  auto cube = [](std::vector<double> v) {
    for (auto& x : v) x = x * x * x;
    return v;
  };
  REQUIRE(mww_statistic(a, b) == mww_statistic(cube(a), cube(b)));
}

TEST_CASE("lda recovers the closed-form discriminant direction") {
  // Two classes of four points each with pooled covariance (2/3) * I.
  Eigen::MatrixXd x(8, 2);
  x << 0, 0, 2, 0, 1, 1, 1, -1,  // class 0, mean (1, 0)
      4, 1, 6, 1, 5, 2, 5, 0;    // class 1, mean (5, 1)
  std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
  auto model = lda_fit(x, y, 2, 0.0);

  REQUIRE(model.means(0, 0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(model.means(1, 1) == Catch::Approx(1.0).margin(1e-12));

  // Sigma^-1 (mu0 - mu1) = (3/2) * (-4, -1) = (-6, -1.5)
  Eigen::RowVectorXd direction = model.weights.row(0) - model.weights.row(1);
  REQUIRE(std::abs(direction(0) - (-6.0)) < 1e-10);
  REQUIRE(std::abs(direction(1) - (-1.5)) < 1e-10);

  SECTION("training accuracy matches a grid-search oracle over linear boundaries") {
    auto preds = lda_predict(model, x);
    std::size_t lda_hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i] == y[i]) ++lda_hits;

    std::size_t best_hits = 0;
    for (int ai = 0; ai < 720; ++ai) {
      const double angle = ai * std::acos(-1.0) / 720.0;
      const double wx = std::cos(angle), wy = std::sin(angle);
      std::vector<double> proj(8);
      for (int i = 0; i < 8; ++i) proj[static_cast<std::size_t>(i)] = wx * x(i, 0) + wy * x(i, 1);
      auto sorted = proj;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t t = 0; t + 1 <= sorted.size(); ++t) {
        const double thr =
            t + 1 < sorted.size() ? 0.5 * (sorted[t] + sorted[t + 1]) : sorted.back() + 1.0;
        std::size_t hits0 = 0, hits1 = 0;
        for (std::size_t i = 0; i < proj.size(); ++i) {
          const int side = proj[i] < thr ? 0 : 1;
          if (side == y[i]) ++hits0;
          if ((1 - side) == y[i]) ++hits1;
        }
        best_hits = std::max({best_hits, hits0, hits1});
      }
    }
    REQUIRE(lda_hits == best_hits);
    REQUIRE(lda_hits == 8);
  }
}

TEST_CASE("1d symmetric classes put the decision threshold at zero") {
  Eigen::MatrixXd x(4, 1);
  x << -1.5, -0.5, 0.5, 1.5;
  std::vector<int> y{0, 0, 1, 1};
  auto model = lda_fit(x, y, 2, 0.0);

  Eigen::MatrixXd probe(3, 1);
  probe << -0.2, 0.2, 0.0;
  auto preds = lda_predict(model, probe);
  REQUIRE(preds == std::vector<int>{0, 1, 0});  // exact midpoint ties to class 0
}

TEST_CASE("identical class means fall back to the larger prior") {
  Eigen::MatrixXd x(5, 1);
  x << 0.9, 1.0, 1.1, 0.8, 1.2;  // both classes mean 1.0
  std::vector<int> y{0, 0, 0, 1, 1};
  auto model = lda_fit(x, y, 2, 0.0);
  Eigen::MatrixXd probe(3, 1);
  probe << -10.0, 1.0, 10.0;
  auto preds = lda_predict(model, probe);
  REQUIRE(preds == std::vector<int>{0, 0, 0});
}

TEST_CASE("singular covariance at zero shrinkage raises an actionable error") {
  Eigen::MatrixXd x(6, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6;  // duplicated feature column
  std::vector<int> y{0, 0, 0, 1, 1, 1};
  REQUIRE_THROWS_WITH(lda_fit(x, y, 2, 0.0), Catch::Matchers::ContainsSubstring("shrinkage"));
  REQUIRE_NOTHROW(lda_fit(x, y, 2, 0.1));
}

TEST_CASE("zero within-class scatter degrades to the nearest-mean rule") {
  Eigen::MatrixXd x(6, 2);
  x << 1, 4, 1, 4, 1, 4, 3, 0, 3, 0, 3, 0;  // constant within each class
  std::vector<int> y{0, 0, 0, 1, 1, 1};
  REQUIRE_THROWS_AS(lda_fit(x, y, 2, 0.0), numeric_error);

  auto model = lda_fit(x, y, 2, 0.1);
  Eigen::MatrixXd probe(4, 2);
  probe << 1.0, 4.0, 3.0, 0.0, 1.2, 3.6, 2.9, 0.3;
  // score_0 - score_1 = (x.(mu0-mu1) - (|mu0|^2-|mu1|^2)/2) / ridge, so the
  // sign matches the nearest class mean: 0, 1, 0, 1 by hand.
  REQUIRE(lda_predict(model, probe) == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("lda decisions are invariant under a constant feature shift") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd x(40, 3);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    for (int j = 0; j < 3; ++j) x(i, j) = noise(rng) + (i % 2 == 0 ? 0.0 : 1.5 * (j + 1));
  }
  auto model = lda_fit(x, y, 2, 0.1);
  Eigen::MatrixXd shifted = x.array() + 7.25;
  auto model2 = lda_fit(shifted, y, 2, 0.1);
  REQUIRE(lda_predict(model, x) == lda_predict(model2, shifted));
}

TEST_CASE("rank_bins puts planted markers on top at zero noise") {
  auto synth = marker_cohort(0.0f, 41, 0.0f);
  const auto& ds = synth.dataset;
  std::vector<std::size_t> all(static_cast<std::size_t>(ds.spectra.n));
  std::iota(all.begin(), all.end(), std::size_t{0});

  auto ranking = rank_bins(ds, all);
  auto support = support_bins(synth, 1);

  // Envelope centers carry the maximal score; everything off-support is 0.5 AUC.
  for (const auto& per_class : synth.marker_bins)
    for (int center : per_class) REQUIRE(ranking.score[static_cast<std::size_t>(center)] == 0.5);
  for (int bin = 0; bin < ds.spectra.d; ++bin)
    if (support.find(bin) == support.end()) {
      REQUIRE(ranking.auc[static_cast<std::size_t>(bin)] == 0.5);
      REQUIRE(ranking.score[static_cast<std::size_t>(bin)] == 0.0);
    }

  for (int bin : select_top_k(ranking, 5)) REQUIRE(support.count(bin) == 1);

  SECTION("ties in score order by lower bin index") {
    for (std::size_t i = 0; i + 1 < ranking.order.size(); ++i) {
      const auto a = static_cast<std::size_t>(ranking.order[i]);
      const auto b = static_cast<std::size_t>(ranking.order[i + 1]);
      if (ranking.score[a] == ranking.score[b]) REQUIRE(ranking.order[i] < ranking.order[i + 1]);
    }
  }

  SECTION("ranking is invariant to spectrum order") {
    Dataset shuffled = ds;
    std::vector<std::size_t> perm(all);
    std::mt19937_64 rng(5);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      shuffled.meta.spectra[i] = ds.meta.spectra[perm[i]];
      for (std::int64_t j = 0; j < ds.spectra.d; ++j)
        shuffled.spectra.row(static_cast<std::int64_t>(i))[static_cast<std::size_t>(j)] =
            ds.spectra.at(static_cast<std::int64_t>(perm[i]), j);
    }
    auto ranking2 = rank_bins(shuffled, all);
    REQUIRE(ranking2.auc == ranking.auc);
    REQUIRE(ranking2.order == ranking.order);
  }

  SECTION("per-bin positive rescaling does not change the ranking") {
    Dataset scaled = ds;
    for (std::int64_t i = 0; i < scaled.spectra.n; ++i)
      for (std::int64_t j = 0; j < scaled.spectra.d; ++j)
        scaled.spectra.row(i)[static_cast<std::size_t>(j)] *= 0.5f + 0.01f * static_cast<float>(j);
    auto ranking2 = rank_bins(scaled, all);
    REQUIRE(ranking2.auc == ranking.auc);
    REQUIRE(ranking2.order == ranking.order);
  }

  SECTION("single-class input is rejected") {
    std::vector<std::size_t> class0_rows;
    for (std::size_t i = 0; i < ds.meta.spectra.size(); ++i)
      if (ds.meta.spectra[i].label == 0) class0_rows.push_back(i);
    REQUIRE_THROWS_AS(rank_bins(ds, class0_rows), validation_error);
  }
}

TEST_CASE("select_top_k bounds") {
  auto synth = marker_cohort(0.0f, 41, 0.0f);
  std::vector<std::size_t> all(static_cast<std::size_t>(synth.dataset.spectra.n));
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto ranking = rank_bins(synth.dataset, all);

  auto everything = select_top_k(ranking, 150);
  std::set<int> unique(everything.begin(), everything.end());
  REQUIRE(unique.size() == 150);
  REQUIRE(select_top_k(ranking, 1).size() == 1);
  REQUIRE(select_top_k(ranking, 1)[0] == ranking.order[0]);
  REQUIRE_THROWS_AS(select_top_k(ranking, 0), validation_error);
  REQUIRE_THROWS_AS(select_top_k(ranking, 151), validation_error);
}

TEST_CASE("roc/lda pipeline separates the zero-noise cohort perfectly") {
  auto synth = marker_cohort(0.0f, 41, 0.0f);
  auto plan = make_fold_plan(synth.dataset.meta, 4, 11);
  auto report = roc_lda_pipeline(synth.dataset, plan);
  REQUIRE(report.best_spot == 1.0);
  REQUIRE(report.best_core == 1.0);
}

TEST_CASE("roc/lda pipeline separates the near-noiseless cohort perfectly") {
  auto synth = marker_cohort(1e-4f, 29);
  auto plan = make_fold_plan(synth.dataset.meta, 4, 11);
  auto report = roc_lda_pipeline(synth.dataset, plan);

  REQUIRE(report.cells.size() == 5 * 4);  // K grid x folds
  REQUIRE(report.fold_train_hashes.size() == 4);
  REQUIRE(report.best_spot == 1.0);
  REQUIRE(report.best_core == 1.0);
  REQUIRE(report.worst_spot >= 0.0);
  REQUIRE(report.worst_spot <= report.best_spot);

  auto table = report.to_table();
  REQUIRE(table.rfind("fold\tK\tlevel\tbalanced_accuracy\n", 0) == 0);
  REQUIRE(std::count(table.begin(), table.end(), '\n') == 1 + 2 * 5 * 4);
}

TEST_CASE("permuted labels drive the pipeline to chance level") {
  auto synth = marker_cohort(0.01f, 47);
  Dataset permuted = synth.dataset;
  std::vector<int> labels;
  for (const auto& s : permuted.meta.spectra) labels.push_back(s.label);
  std::mt19937_64 rng(mix_seed(99, fnv1a("permute")));
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < labels.size(); ++i) permuted.meta.spectra[i].label = labels[i];

  auto plan = make_fold_plan(synth.dataset.meta, 4, 11);
  auto report = roc_lda_pipeline(permuted, plan);
  for (double v : report.spot_by_k) {
    REQUIRE(v > 0.45);
    REQUIRE(v < 0.55);
  }
}

TEST_CASE("touch recorder hashes sorted unique ids and detects overlap") {
  TouchRecorder rec;
  rec.touch(5);
  rec.touch(3);
  rec.touch(5);
  TouchRecorder rec2;
  rec2.touch(3);
  rec2.touch(5);
  REQUIRE(rec.hash() == rec2.hash());
  REQUIRE(rec.sorted_unique() == std::vector<std::int64_t>{3, 5});
  std::vector<std::int64_t> others{1, 2, 4};
  REQUIRE(rec.disjoint(others));
  others.push_back(3);
  REQUIRE_FALSE(rec.disjoint(others));
}
