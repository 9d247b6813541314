#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "sncpd/detector.hpp"

using namespace sncpd;

namespace {

Mat noise(std::size_t t, std::size_t d, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  Mat m(t, d);
  for (auto& v : m.values()) v = g(rng);
  return m;
}

// Mean direction rotates at the change point so angle statistics react too.
Mat step_series(std::size_t t, std::size_t d, std::size_t cp, double shift,
                std::uint64_t seed, double sd = 0.1) {
  Mat m = noise(t, d, seed, sd);
  for (std::size_t i = 0; i < t; ++i) {
    m(i, 0) += i < cp ? shift : 0.0;
    m(i, 1 % d) += i < cp ? 0.0 : shift;
  }
  return m;
}

EncoderModel small_encoder(std::size_t d, std::uint64_t seed) {
  EncoderSpec s;
  s.input_dim = d;
  s.hidden_dim = d;
  s.code_dim = d;
  s.identity_input = true;
  s.identity_head = true;
  for (int l = 0; l < 2; ++l) s.blocks.push_back(BlockSpec{});
  return EncoderModel::init(s, seed);
}

// Sweep restated as a plain loop for comparison.
struct OracleSweep {
  double threshold;
  double f1;
};

OracleSweep oracle_sweep(const DetectionTrace& trace, const std::vector<std::size_t>& cps,
                         std::size_t margin) {
  std::vector<double> vals = trace.statistic;
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  OracleSweep best{0.0, -1.0};
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const bool last = i + 1 == vals.size();
    const double delta = last ? vals[i] + 1.0 : 0.5 * (vals[i] + vals[i + 1]);
    std::vector<std::size_t> alarms;
    for (std::size_t k = 0; k < trace.statistic.size(); ++k)
      if (trace.statistic[k] > delta) alarms.push_back(trace.index[k]);
    const double f1 = margin_f1(alarms, cps, margin, trace.stride).f1;
    if (f1 > best.f1) best = {delta, f1};
  }
  return best;
}

}  // namespace

TEST_CASE("window pairs cover the series") {
  Mat x = noise(20, 2, 1);
  auto one = make_window_pairs(x, 10);
  CHECK(one.size() == 1);
  CHECK(one[0].index == 10);

  Mat y = noise(23, 2, 2);
  auto four = make_window_pairs(y, 10, 1);
  CHECK(four.size() == 4);
  for (std::size_t k = 0; k < four.size(); ++k) {
    CHECK(four[k].index == 10 + k);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(four[k].past(i, j) == y(four[k].index - 10 + i, j));
        CHECK(four[k].future(i, j) == y(four[k].index + i, j));
      }
  }

  auto strided = make_window_pairs(y, 10, 2);
  CHECK(strided.size() == 2);
  CHECK(strided[1].index == 12);

  CHECK_THROWS_AS(make_window_pairs(noise(5, 2, 3), 3), ConfigError);
  CHECK_THROWS_AS(make_window_pairs(x, 0), ConfigError);
}

TEST_CASE("cosine scores vanish on a constant series") {
  Mat x(40, 3, 1.0);
  auto pairs = make_window_pairs(x, 5);
  DetectionTrace trace = score_pairs(pairs, nullptr, {});
  for (double s : trace.statistic) CHECK(std::abs(s) < 1e-9);
}

TEST_CASE("mmd score is zero on identical halves") {
  Mat x = noise(10, 2, 4);
  Mat doubled(20, 2);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 2; ++j) doubled(i, j) = doubled(10 + i, j) = x(i, j);
  auto pairs = make_window_pairs(doubled, 10);
  ScoreOptions opt;
  opt.statistic = Statistic::Mmd;
  DetectionTrace trace = score_pairs(pairs, nullptr, opt);
  CHECK(trace.statistic.size() == 1);
  CHECK(trace.statistic[0] == 0.0);
  CHECK(trace.sigma > 0.0);
}

TEST_CASE("step change peaks near the true split") {
  const std::size_t cp = 100;
  Mat x = step_series(200, 2, cp, 3.0, 5);
  auto pairs = make_window_pairs(x, 20);
  DetectionTrace trace = score_pairs(pairs, nullptr, {});
  const std::size_t arg =
      trace.index[std::max_element(trace.statistic.begin(), trace.statistic.end()) -
                  trace.statistic.begin()];
  CHECK(arg >= cp - 20);
  CHECK(arg <= cp + 20);

  // The embedded trace is shaped the same way.
  EncoderModel enc = small_encoder(2, 6);
  DetectionTrace emb = score_pairs(pairs, &enc, {});
  const std::size_t arg_emb =
      emb.index[std::max_element(emb.statistic.begin(), emb.statistic.end()) -
                emb.statistic.begin()];
  CHECK(arg_emb >= cp - 20);
  CHECK(arg_emb <= cp + 20);
}

TEST_CASE("alarms are exactly the points above the threshold") {
  Mat x = step_series(120, 2, 60, 2.0, 7);
  auto pairs = make_window_pairs(x, 10);
  DetectionTrace trace = score_pairs(pairs, nullptr, {});
  CHECK_THROWS_AS(trace.alarms(), ConfigError);
  trace.threshold = 0.5;
  auto flags = trace.alarms();
  auto idx = trace.alarm_indices();
  std::size_t seen = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    CHECK(flags[i] == (trace.statistic[i] > 0.5));
    if (flags[i]) {
      CHECK(trace.index[i] == idx[seen]);
      ++seen;
    }
  }
  CHECK(seen == idx.size());

  // Raising the threshold never adds alarms.
  trace.threshold = 0.8;
  auto fewer = trace.alarm_indices();
  for (std::size_t a : fewer) CHECK(std::find(idx.begin(), idx.end(), a) != idx.end());
}

TEST_CASE("margin f1 on hand-built cases") {
  // Alarms exactly at every change point.
  F1Report perfect = margin_f1({100, 200}, {100, 200}, 10);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);

  // No alarms at all.
  F1Report silent = margin_f1({}, {100}, 10);
  CHECK(silent.f1 == 0.0);
  CHECK(silent.false_negatives == 1);

  // Two change points, one detected, one spurious run far from both.
  F1Report half = margin_f1({98, 99, 100, 300, 301}, {100, 200}, 10);
  CHECK(half.true_positives == 1);
  CHECK(half.false_positives == 1);
  CHECK(half.false_negatives == 1);
  CHECK(half.precision == doctest::Approx(0.5));
  CHECK(half.recall == doctest::Approx(0.5));
  CHECK(half.f1 == doctest::Approx(0.5));

  // Duplicating an alarm adjacent to a matched alarm changes nothing.
  F1Report base = margin_f1({100, 400}, {100}, 10);
  F1Report dup = margin_f1({100, 101, 400}, {100}, 10);
  CHECK(base.f1 == dup.f1);
  CHECK(base.false_positives == dup.false_positives);

  // That holds even when the duplicate itself falls outside the margin: it
  // joins the matched run instead of opening a false-positive run.
  F1Report edge = margin_f1({110, 400}, {100}, 10);
  F1Report shoulder = margin_f1({110, 111, 400}, {100}, 10);
  CHECK(edge.f1 == shoulder.f1);
  CHECK(edge.false_positives == shoulder.false_positives);
  CHECK(shoulder.false_positives == 1);

  // Two separated unmatched runs cost two false positives.
  F1Report runs = margin_f1({400, 401, 402, 500}, {100}, 10);
  CHECK(runs.false_positives == 2);

  // A gap wider than run_gap splits a run.
  F1Report gapped = margin_f1({400, 402}, {100}, 10, 1);
  CHECK(gapped.false_positives == 2);
  F1Report strided = margin_f1({400, 402}, {100}, 10, 2);
  CHECK(strided.false_positives == 1);

  CHECK_THROWS_AS(margin_f1({1}, {2}, 0), ConfigError);
  CHECK_THROWS_AS(margin_f1({5, 3}, {2}, 1), ConfigError);
}

TEST_CASE("threshold sweep separates a clean trace") {
  DetectionTrace trace;
  trace.window = 5;
  for (std::size_t i = 0; i < 40; ++i) {
    trace.index.push_back(10 + i);
    trace.statistic.push_back(i == 20 ? 3.0 : 0.1 * double(i % 4));
  }
  SweepResult res = threshold_sweep(trace, {30}, 5);
  CHECK(res.report.f1 == 1.0);
  // Perfect F1 needs a split between the noise band and the peak; the only
  // candidate inside that band is its midpoint.
  CHECK(res.threshold == doctest::Approx(0.5 * (0.3 + 3.0)));
  CHECK(res.candidates == 5);

  DetectionTrace flat;
  flat.window = 5;
  for (std::size_t i = 0; i < 10; ++i) {
    flat.index.push_back(5 + i);
    flat.statistic.push_back(0.7);
  }
  SweepResult degenerate = threshold_sweep(flat, {8}, 3);
  CHECK(degenerate.threshold > 0.7);
  CHECK(degenerate.report.f1 == 0.0);

  CHECK_THROWS_AS(threshold_sweep(trace, {}, 5), ConfigError);
}

TEST_CASE("threshold sweep matches the exhaustive oracle") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(10, 80);
  for (int rep = 0; rep < 30; ++rep) {
    DetectionTrace trace;
    trace.window = 10;
    for (std::size_t i = 0; i < 70; ++i) {
      trace.index.push_back(10 + i);
      // Quantized scores force plenty of ties.
      trace.statistic.push_back(std::round(u(rng) * 8.0) / 8.0);
    }
    std::vector<std::size_t> cps{pick(rng), pick(rng)};
    std::sort(cps.begin(), cps.end());
    if (cps[0] == cps[1]) cps.pop_back();
    SweepResult res = threshold_sweep(trace, cps, 6);
    OracleSweep oracle = oracle_sweep(trace, cps, 6);
    CHECK(res.threshold == oracle.threshold);
    CHECK(res.report.f1 == oracle.f1);
  }
}

TEST_CASE("dynamics curve is one when the spliced half matches") {
  const std::size_t t = 400, cp = 300;
  Mat x = noise(t, 2, 9);
  // Make the data after the change point repeat the half before it, so the
  // spliced stretch equals the original.
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 2; ++j) x(cp + i, j) = x(cp - 50 + i, j);
  EncoderModel enc = small_encoder(2, 10);
  DynamicsOptions opt;
  opt.window = 20;
  opt.subsequence = 100;
  DynamicsCurve curve = dynamics_experiment(enc, x, {cp}, opt);
  CHECK(curve.used == 1);
  CHECK(curve.offsets.size() == 81);
  for (double s : curve.similarity) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dynamics curve drops across a real shift") {
  const std::size_t cp = 300;
  Mat x = step_series(500, 3, cp, 2.0, 11);
  EncoderModel enc = small_encoder(3, 12);
  DynamicsOptions opt;
  opt.window = 20;
  opt.subsequence = 100;
  DynamicsCurve curve = dynamics_experiment(enc, x, {cp}, opt);
  // Windows fully inside the shared half compare identical inputs.
  const std::size_t half = opt.subsequence / 2;
  double shared_min = 1.0, after_max = -1.0;
  for (std::size_t k = 0; k < curve.offsets.size(); ++k) {
    if (curve.offsets[k] + opt.window <= half)
      shared_min = std::min(shared_min, curve.similarity[k]);
    if (curve.offsets[k] >= half) after_max = std::max(after_max, curve.similarity[k]);
  }
  CHECK(shared_min >= 1.0 - 1e-9);
  CHECK(after_max < shared_min - 0.05);

  // A change point without room on either side is skipped.
  DynamicsCurve skipped = dynamics_experiment(enc, x, {30, cp}, opt);
  CHECK(skipped.used == 1);
  CHECK(skipped.skipped == 1);
  CHECK_THROWS_AS(dynamics_experiment(enc, x, {30}, opt), ConfigError);
}

TEST_CASE("gaussian fit recovers mean and covariance") {
  Mat rows(4, 2);
  rows(0, 0) = 1.0; rows(0, 1) = 0.0;
  rows(1, 0) = -1.0; rows(1, 1) = 0.0;
  rows(2, 0) = 0.0; rows(2, 1) = 2.0;
  rows(3, 0) = 0.0; rows(3, 1) = -2.0;
  GaussianFit fit = fit_gaussian(rows);
  CHECK(fit.mean[0] == doctest::Approx(0.0));
  CHECK(fit.mean[1] == doctest::Approx(0.0));
  CHECK(fit.cov(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(fit.cov(1, 1) == doctest::Approx(8.0 / 3.0));
  CHECK(fit.cov(0, 1) == doctest::Approx(0.0));

  auto d = mahalanobis_scores(rows, fit, 0.0);
  CHECK(d[0] == doctest::Approx(1.0 / (2.0 / 3.0)));
  CHECK(d[2] == doctest::Approx(4.0 / (8.0 / 3.0)));
  CHECK_THROWS_AS(fit_gaussian(Mat(1, 2)), ConfigError);
}

TEST_CASE("rejection curve walks down to five percent") {
  const std::size_t w = 10;
  Mat test = step_series(520, 3, 260, 2.5, 13);
  Mat reference = noise(200, 3, 14, 0.1);
  EncoderModel enc = small_encoder(3, 15);
  RejectionOptions opt;
  opt.window = w;
  opt.margin = 15;
  RejectionCurve curve = rejection_curve(enc, reference, test, {260}, opt);

  CHECK(curve.points.size() == 59);
  const std::size_t n0 = 520 - 2 * w + 1;
  std::size_t kept = n0;
  for (const RejectionPoint& p : curve.points) {
    const std::size_t expect = std::min(std::size_t(std::ceil(0.95 * double(kept))),
                                        kept - 1);
    CHECK(p.kept == expect);
    CHECK(p.fraction_kept == doctest::Approx(double(expect) / double(n0)));
    CHECK(p.f1 >= 0.0);
    CHECK(p.f1 <= 1.0);
    kept = expect;
  }
  // Ceil rounding keeps slightly more than the nominal 0.95^59.
  CHECK(double(kept) / double(n0) < 0.08);
  CHECK(curve.baseline_f1 >= 0.0);

  Mat tiny = noise(25, 3, 16);
  CHECK_THROWS_AS(rejection_curve(enc, reference, tiny, {12}, opt), ConfigError);
}

TEST_CASE("gaussian generator moments and determinism") {
  SampleGenerator gen = gaussian_generator({1.0, -2.0}, 0.5);
  Rng a(17), b(17);
  Mat s1 = gen(4000, a), s2 = gen(10, b);
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < s1.rows(); ++i) {
    m0 += s1(i, 0);
    m1 += s1(i, 1);
  }
  CHECK(m0 / 4000.0 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(m1 / 4000.0 == doctest::Approx(-2.0).epsilon(0.05));
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(s1(i, j) == s2(i, j));
  CHECK_THROWS_AS(gaussian_generator({}, 1.0), ConfigError);
  CHECK_THROWS_AS(gaussian_generator({0.0}, 0.0), ConfigError);
}

TEST_CASE("power experiment reports calibrated errors per size") {
  SampleGenerator null_gen = gaussian_generator({0.0}, 0.5);
  SampleGenerator alt_gen = gaussian_generator({1.0}, 0.5);
  EncoderModel enc = small_encoder(1, 18);
  PowerOptions opt;
  opt.sizes = {25, 50};
  opt.trials = 40;
  opt.seed = 19;
  PowerResult res = mmd_power_experiment(null_gen, alt_gen, &enc, opt);
  CHECK(res.rows.size() == 2);
  for (const PowerRow& r : res.rows) {
    CHECK(r.type2_raw >= 0.0);
    CHECK(r.type2_raw <= 1.0);
    CHECK(r.type2_embedded >= 0.0);
    CHECK(r.type2_embedded <= 1.0);
    // The acceptance-region threshold is conservative under the null.
    CHECK(r.null_reject_raw <= 0.1);
    CHECK(r.null_reject_embedded <= 0.1);
  }
  PowerResult again = mmd_power_experiment(null_gen, alt_gen, &enc, opt);
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    CHECK(res.rows[i].type2_raw == again.rows[i].type2_raw);
    CHECK(res.rows[i].type2_embedded == again.rows[i].type2_embedded);
  }
  CHECK(std::isfinite(res.slope_raw));
  CHECK(std::isfinite(res.slope_embedded));

  // Identical generators: the test almost never rejects, so type-II is near 1.
  PowerResult vacuous = mmd_power_experiment(null_gen, null_gen, nullptr, opt);
  for (const PowerRow& r : vacuous.rows) CHECK(r.type2_raw >= 0.9);
}
