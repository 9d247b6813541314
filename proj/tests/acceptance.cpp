// Acceptance gate: eleven end-to-end checks of the toolkit's headline
// guarantees, from the norm cap certificate down to bitwise reproducibility.
// Each check prints a single PASS/FAIL line with its measurements; the
// process exits nonzero if any check fails. All tolerances are pinned here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sncpd/certify.hpp"
#include "sncpd/commands.hpp"
#include "sncpd/data.hpp"
#include "sncpd/detector.hpp"
#include "sncpd/encoders.hpp"
#include "sncpd/runconfig.hpp"
#include "sncpd/selfsup.hpp"
#include "sncpd/specnorm.hpp"
#include "sncpd/statistics.hpp"
#include "support/oracles.hpp"

using namespace sncpd;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double secs() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail,
            double secs) {
  std::printf("[%s] %2d %-28s %s  (%.1fs)\n", ok ? "PASS" : "FAIL", id, name,
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

Mat random_rows(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat m(r, c);
  for (auto& v : m.values()) v = d(rng);
  return m;
}

Mat identity_mat(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// The shared detection benchmark: ten evenly spaced mean shifts in a 5-d
// series, 0.4/0.2/0.4 splits, a capped dilated-conv encoder, cosine scores
// over width-50 windows and the threshold swept on the validation split.

constexpr std::size_t kSuiteDim = 5;
constexpr std::size_t kSuiteLength = 5000;
constexpr std::size_t kSuiteChangePoints = 10;
constexpr double kSuiteNoise = 1.0;
constexpr std::size_t kDetectWindow = 50;
constexpr std::size_t kMargin = 50;

EncoderSpec suite_spec(bool spectral) {
  EncoderSpec spec;
  spec.input_dim = kSuiteDim;
  spec.hidden_dim = 24;
  spec.code_dim = 16;
  spec.spectral_norm = spectral;
  spec.cap = 0.9;
  spec.blocks.resize(8);
  for (std::size_t l = 0; l < spec.blocks.size(); ++l) {
    spec.blocks[l].kind = BlockKind::Conv;
    spec.blocks[l].activation = Activation::Relu;
    spec.blocks[l].kernel = 3;
    spec.blocks[l].dilation = std::size_t{1} << (l % 4);
  }
  return spec;
}

SplitSeries suite_splits(std::uint64_t seed, double delta) {
  const auto cps = evenly_spaced_change_points(kSuiteLength, kSuiteChangePoints);
  TimeSeries series =
      make_mean_shift_series(kSuiteDim, kSuiteLength, cps, delta, kSuiteNoise, seed);
  return split_series(series, {0.4, 0.2, 0.4});
}

TrainOptions suite_train_options(std::uint64_t seed, std::size_t steps) {
  TrainOptions opt;
  opt.steps = steps;
  opt.batch = 8;
  opt.window = 100;
  opt.min_overlap = 16;
  opt.lr = 1e-3;
  opt.seed = seed;
  opt.val_every = 50;
  opt.val_batches = 4;
  return opt;
}

// Validation-swept test F1 of a trained encoder on one benchmark instance.
double swept_test_f1(const EncoderModel& model, const SplitSeries& splits) {
  ScoreOptions sopt;
  sopt.statistic = Statistic::Cosine;
  DetectionTrace val =
      score_pairs(make_window_pairs(splits.val.values, kDetectWindow, 1), &model, sopt);
  const SweepResult sweep = threshold_sweep(val, splits.val.change_points, kMargin);
  DetectionTrace test =
      score_pairs(make_window_pairs(splits.test.values, kDetectWindow, 1), &model, sopt);
  test.threshold = sweep.threshold;
  return margin_f1(test.alarm_indices(), splits.test.change_points, kMargin,
                   test.stride)
      .f1;
}

// ---------------------------------------------------------------------------
// 1. Every layer of a trained capped encoder certifies under the norm cap.

void check_trained_norm_cap(std::optional<TrainResult>& shared_model) {
  Timer t;
  constexpr double kCap = 0.9;
  constexpr double kSlack = 1e-4;
  SplitSeries splits = suite_splits(1, 1.5);
  shared_model = train_encoder(suite_spec(true), splits.train.values,
                               splits.val.values, suite_train_options(1, 200));
  Timer cert;
  double max_norm = 0.0;
  std::size_t weights = 0;
  for (double n : shared_model->model.layer_norms()) {
    max_norm = std::max(max_norm, n);
    ++weights;
  }
  const double cert_secs = cert.secs();
  const bool ok = max_norm <= kCap * (1.0 + kSlack) && cert_secs < 60.0;
  report(1, "trained norm cap", ok,
         fmt("max norm %.6f <= %.6f over %zu weights, certified in %.2fs",
             max_norm, kCap * (1.0 + kSlack), weights, cert_secs),
         t.secs());
}

// ---------------------------------------------------------------------------
// 2. Unit-sphere pairs stay inside the depth-8 distance band; rescaling one
//    layer to norm 3 is caught by the same certification.

void check_distance_band() {
  Timer t;
  constexpr std::size_t kDepth = 8;
  constexpr double kCap = 0.9;
  const double lo = std::pow(1.0 - kCap, double(kDepth));
  const double hi = std::pow(1.0 + kCap, double(kDepth));

  EncoderSpec spec;
  spec.input_dim = 8;
  spec.hidden_dim = 8;
  spec.code_dim = 8;
  spec.identity_input = true;
  spec.identity_head = true;
  spec.spectral_norm = true;
  spec.cap = kCap;
  spec.blocks.assign(kDepth, BlockSpec{BlockKind::Dense, Activation::Relu, 3, 1, 0.0});

  CertifyOptions copt;
  copt.pairs = 1000;
  copt.probe_rows = 1;
  copt.seed = 32;

  EncoderModel m = EncoderModel::init(spec, 31);
  const CertificationReport rep = certify_bilipschitz(m, copt);
  const bool clean_ok = rep.cap_ok && rep.band_ok && rep.pairs == 1000 &&
                        rep.ratio_min >= lo && rep.ratio_max <= hi;

  EncoderModel bad = EncoderModel::init(spec, 31);
  {
    auto cws = bad.capped_weights();
    Tensor w = cws[cws.size() / 2].weight;
    const double s = spectral_norm(weight_matrix_view(w));
    for (double& v : w.values()) v *= 3.0 / s;
  }
  const CertificationReport bad_rep = certify_bilipschitz(bad, copt);
  const bool caught = !bad_rep.cap_ok && !bad_rep.passed() &&
                      bad_rep.max_layer_norm > 2.99;

  const bool ok = clean_ok && caught && t.secs() < 60.0;
  report(2, "distance band", ok,
         fmt("ratios [%.3e, %.3f] in [%.3e, %.3f]; rescaled layer norm %.3f flagged=%s",
             rep.ratio_min, rep.ratio_max, lo, hi, bad_rep.max_layer_norm,
             caught ? "yes" : "NO"),
         t.secs());
}

// ---------------------------------------------------------------------------
// 3. The block stack inverts to 1e-6 under the cap, and a norm-1.5 layer makes
//    the fixed-point iteration fail loudly instead of silently.

void check_stack_inversion() {
  Timer t;
  EncoderSpec spec;
  spec.input_dim = 6;
  spec.hidden_dim = 6;
  spec.code_dim = 6;
  spec.identity_input = true;
  spec.identity_head = true;
  spec.spectral_norm = true;
  spec.cap = 0.9;
  spec.blocks.assign(8, BlockSpec{BlockKind::Dense, Activation::Relu, 3, 1, 0.0});
  EncoderModel m = EncoderModel::init(spec, 41);

  Rng rng(42);
  double max_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Mat x = random_rows(4, 6, rng);
    const Mat y = m.hidden_values(x);
    const InvertResult inv = invert_hidden(m, y, {500, 1e-10});
    for (std::size_t k = 0; k < x.size(); ++k)
      max_err = std::max(max_err, std::abs(inv.x.values()[k] - x.values()[k]));
  }

  // One expansive layer: relu(1.5 x + 2) cycles instead of contracting.
  EncoderSpec bad_spec = spec;
  bad_spec.input_dim = 3;
  bad_spec.hidden_dim = 3;
  bad_spec.code_dim = 3;
  bad_spec.spectral_norm = false;
  bad_spec.blocks.resize(1);
  EncoderModel bad = EncoderModel::init(bad_spec, 43);
  {
    auto params = bad.parameters();
    std::fill(params[0].values().begin(), params[0].values().end(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) params[0].values()[i * 3 + i] = 1.5;
    std::fill(params[1].values().begin(), params[1].values().end(), 2.0);
  }
  bool reported = false;
  int bad_iters = 0;
  double bad_residual = 0.0;
  try {
    invert_hidden(bad, Mat(1, 3, 1.0), {500, 1e-10});
  } catch (const ConvergenceError& e) {
    reported = true;
    bad_iters = e.iterations;
    bad_residual = e.residual;
  }

  const bool ok = max_err < 1e-6 && reported && bad_iters == 500;
  report(3, "stack inversion", ok,
         fmt("round-trip err %.2e < 1e-6 on 100 inputs; norm-1.5 layer: "
             "non-convergence reported after %d iters (residual %.2f)",
             max_err, bad_iters, bad_residual),
         t.secs());
}

// ---------------------------------------------------------------------------
// 4. Log-likelihood ratios survive the square affine map plus capped stack:
//    the embedded ratio equals the raw one and decisions agree.

void check_lr_preservation() {
  Timer t;
  constexpr std::size_t kRows = 8, kCols = 4;
  EncoderSpec spec;
  spec.input_dim = kCols;
  spec.hidden_dim = kCols;
  spec.code_dim = kCols;
  spec.identity_head = true;
  spec.spectral_norm = true;
  spec.cap = 0.9;
  spec.blocks.assign(6, BlockSpec{BlockKind::Dense, Activation::Relu, 3, 1, 0.0});
  EncoderModel m = EncoderModel::init(spec, 51);

  MatrixNormalParams null_params{Mat(kRows, kCols, 0.0), identity_mat(kRows),
                                 identity_mat(kCols)};
  MatrixNormalParams alt_params{Mat(kRows, kCols, 0.5), identity_mat(kRows),
                                identity_mat(kCols)};

  Rng rng(52);
  double max_gap = 0.0;
  int decided = 0, agreed = 0;
  for (int i = 0; i < 100; ++i) {
    Mat x = random_rows(kRows, kCols, rng);
    if (i >= 50)  // second half drawn from the alternative
      for (double& v : x.values()) v += 0.5;
    const LrCheck c = lr_preservation_check(m, x, null_params, alt_params,
                                            {500, 1e-10});
    max_gap = std::max(max_gap, std::abs(c.raw - c.embedded));
    if (std::abs(c.raw) > 1e-3) {
      ++decided;
      if ((c.raw > 0.0) == (c.embedded > 0.0)) ++agreed;
    }
  }

  const bool ok = max_gap < 1e-4 && decided > 0 && agreed == decided;
  report(4, "likelihood ratio preserved", ok,
         fmt("max |raw-embedded| %.2e < 1e-4; decisions %d/%d agree", max_gap,
             agreed, decided),
         t.secs());
}

// ---------------------------------------------------------------------------
// 5. The MMD estimator equals the scalar-loop oracle and the closed form.

void check_mmd_oracle() {
  Timer t;
  Rng rng(61);
  std::uniform_int_distribution<std::size_t> size_d(1, 20), dim_d(1, 6);
  std::uniform_real_distribution<double> sigma_d(0.5, 2.0);
  double max_diff = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t mrows = size_d(rng), nrows = size_d(rng), d = dim_d(rng);
    const double sigma = sigma_d(rng);
    const Mat z = random_rows(mrows, d, rng), xi = random_rows(nrows, d, rng);
    std::vector<std::vector<double>> zl(mrows), xl(nrows);
    for (std::size_t i = 0; i < mrows; ++i)
      for (std::size_t j = 0; j < d; ++j) zl[i].push_back(z(i, j));
    for (std::size_t i = 0; i < nrows; ++i)
      for (std::size_t j = 0; j < d; ++j) xl[i].push_back(xi(i, j));
    max_diff = std::max(max_diff, std::abs(mmd2_biased(z, xi, sigma) -
                                           oracles::mmd2_biased_loops(zl, xl, sigma)));
  }

  // Two single points at distance 1 with unit bandwidth.
  Mat a(1, 1, 1.0), b(1, 1, 0.0);
  const double analytic = 2.0 - 2.0 * std::exp(-0.5);
  const double analytic_diff = std::abs(mmd2_biased(a, b, 1.0) - analytic);

  const bool ok = max_diff <= 1e-12 && analytic_diff <= 1e-12;
  report(5, "mmd oracle agreement", ok,
         fmt("max |estimator-oracle| %.2e over 50 draws; closed form off by %.2e",
             max_diff, analytic_diff),
         t.secs());
}

// ---------------------------------------------------------------------------
// 6. Two-sample test power: embedded type-II errors fall with sample size at
//    the raw-space rate, and null rejections respect the level.

void check_test_power() {
  Timer t;
  EncoderSpec spec;
  spec.input_dim = 1;
  spec.hidden_dim = 8;
  spec.code_dim = 8;
  spec.spectral_norm = true;
  spec.cap = 0.9;
  spec.blocks.assign(4, BlockSpec{BlockKind::Dense, Activation::Relu, 3, 1, 0.0});
  EncoderModel enc = EncoderModel::init(spec, 101);

  PowerOptions opt;
  opt.trials = 200;
  opt.seed = 1;
  const PowerResult res = mmd_power_experiment(gaussian_generator({0.0}, 0.5),
                                               gaussian_generator({1.0}, 0.5),
                                               &enc, opt);

  bool monotone = true;
  double max_null = 0.0;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    if (i > 0 && res.rows[i].type2_embedded > res.rows[i - 1].type2_embedded + 1e-12)
      monotone = false;
    max_null = std::max({max_null, res.rows[i].null_reject_raw,
                         res.rows[i].null_reject_embedded});
  }
  // Level plus a 99.5% binomial bound on 200 trials.
  const double null_bound =
      opt.alpha + 2.576 * std::sqrt(opt.alpha * (1.0 - opt.alpha) / opt.trials);
  const double slope_gap = std::abs(res.slope_embedded - res.slope_raw);

  const bool ok =
      monotone && max_null <= null_bound && slope_gap <= 0.3 && t.secs() < 600.0;
  report(6, "two-sample power", ok,
         fmt("embedded type-II monotone=%s; slope gap %.3f <= 0.3; null rate %.3f <= %.3f",
             monotone ? "yes" : "NO", slope_gap, max_null, null_bound),
         t.secs());
}

// ---------------------------------------------------------------------------
// 7. All four training losses equal their scalar-loop oracles and their
//    gradients match central differences.

void check_losses() {
  Timer t;
  Rng rng(71);
  double max_value_diff = 0.0;
  Tape tape(false);

  {
    std::vector<Mat> z1, z2;
    for (int i = 0; i < 4; ++i) {
      z1.push_back(random_rows(6, 3, rng, 0.7));
      z2.push_back(random_rows(6, 3, rng, 0.7));
    }
    std::vector<Tensor> t1, t2;
    for (const Mat& z : z1) t1.push_back(Tensor::from_mat(z));
    for (const Mat& z : z2) t2.push_back(Tensor::from_mat(z));
    max_value_diff = std::max(
        max_value_diff, std::abs(instance_contrastive_loss(tape, t1, t2).item() -
                                 oracles::instance_loss_loops(z1, z2)));
    max_value_diff = std::max(
        max_value_diff, std::abs(temporal_contrastive_loss(tape, t1, t2).item() -
                                 oracles::temporal_loss_loops(z1, z2)));
  }
  {
    std::vector<Mat> z1, z2;
    for (int i = 0; i < 3; ++i) {
      z1.push_back(random_rows(7, 3, rng, 0.5));
      z2.push_back(random_rows(7, 3, rng, 0.5));
    }
    std::vector<Tensor> t1, t2;
    for (const Mat& z : z1) t1.push_back(Tensor::from_mat(z));
    for (const Mat& z : z2) t2.push_back(Tensor::from_mat(z));
    max_value_diff = std::max(
        max_value_diff,
        std::abs(hierarchical_contrastive_loss(tape, t1, t2).item() -
                 oracles::hierarchical_loss_loops(z1, z2)));
  }
  const Mat pred = random_rows(5, 4, rng), target = random_rows(5, 4, rng);
  max_value_diff = std::max(
      max_value_diff,
      std::abs(bootstrap_regression_loss(tape, Tensor::from_mat(pred),
                                         Tensor::from_mat(target))
                   .item() -
               oracles::bootstrap_loss_loops(pred, target)));

  // Gradients of each loss on leaf code tensors; smooth activations keep the
  // finite differences clean where an encoder sits in the path.
  double max_grad_err = 0.0;
  {
    std::vector<Tensor> params;
    for (int i = 0; i < 2; ++i) params.push_back(Tensor::from_mat(random_rows(4, 3, rng, 0.6), true));
    for (int i = 0; i < 2; ++i) params.push_back(Tensor::from_mat(random_rows(4, 3, rng, 0.6), true));
    std::vector<Tensor> z1{params[0], params[1]}, z2{params[2], params[3]};
    auto inst = [&](Tape& tp) { return instance_contrastive_loss(tp, z1, z2); };
    max_grad_err = std::max(max_grad_err, oracles::check_gradients(inst, params).max_rel_err);
    auto temp = [&](Tape& tp) { return temporal_contrastive_loss(tp, z1, z2); };
    max_grad_err = std::max(max_grad_err, oracles::check_gradients(temp, params).max_rel_err);
  }
  {
    EncoderSpec spec;
    spec.input_dim = 2;
    spec.hidden_dim = 4;
    spec.code_dim = 3;
    spec.spectral_norm = false;
    spec.blocks.assign(2, BlockSpec{BlockKind::Dense, Activation::Sigmoid, 3, 1, 0.0});
    EncoderModel m = EncoderModel::init(spec, 72);
    const Mat xa = random_rows(6, 2, rng), xb = random_rows(6, 2, rng);
    const Mat xc = random_rows(6, 2, rng), xd = random_rows(6, 2, rng);
    auto params = m.parameters();
    auto hier = [&](Tape& tp) {
      std::vector<Tensor> z1{m.encode_sequence(tp, Tensor::from_mat(xa)),
                             m.encode_sequence(tp, Tensor::from_mat(xc))};
      std::vector<Tensor> z2{m.encode_sequence(tp, Tensor::from_mat(xb)),
                             m.encode_sequence(tp, Tensor::from_mat(xd))};
      return hierarchical_contrastive_loss(tp, z1, z2);
    };
    max_grad_err = std::max(max_grad_err, oracles::check_gradients(hier, params).max_rel_err);
  }
  {
    Tensor p = Tensor::from_mat(random_rows(4, 3, rng), true);
    const Mat q = random_rows(4, 3, rng);
    std::vector<Tensor> params{p};
    auto boot = [&](Tape& tp) {
      return bootstrap_regression_loss(tp, p, Tensor::from_mat(q));
    };
    max_grad_err = std::max(max_grad_err, oracles::check_gradients(boot, params).max_rel_err);
  }

  const bool ok = max_value_diff <= 1e-10 && max_grad_err < 1e-4;
  report(7, "loss oracles and gradients", ok,
         fmt("max |loss-oracle| %.2e <= 1e-10; max gradient rel err %.2e < 1e-4",
             max_value_diff, max_grad_err),
         t.secs());
}

// ---------------------------------------------------------------------------
// 8. The capped encoder detects mean shifts: validation-swept margin-F1
//    averaged over three seeded benchmark instances.

void check_detection_f1(const std::optional<TrainResult>& shared_model,
                        double& sn_mean_out) {
  Timer t;
  std::vector<double> f1s;
  std::ostringstream per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    SplitSeries splits = suite_splits(seed, 1.5);
    EncoderModel model;
    if (seed == 1 && shared_model)
      model = shared_model->model;
    else
      model = train_encoder(suite_spec(true), splits.train.values,
                            splits.val.values, suite_train_options(seed, 200))
                  .model;
    f1s.push_back(swept_test_f1(model, splits));
    per_seed << (f1s.size() > 1 ? " " : "") << fmt("%.4f", f1s.back());
  }
  double mean = 0.0;
  for (double f : f1s) mean += f / double(f1s.size());
  sn_mean_out = mean;

  const bool ok = mean >= 0.9 && t.secs() < 900.0;
  report(8, "mean-shift detection f1", ok,
         fmt("per-seed f1 [%s], mean %.4f >= 0.9", per_seed.str().c_str(), mean),
         t.secs());
}

// ---------------------------------------------------------------------------
// 9. Capping costs nothing: the capped encoder's mean F1 stays within 0.01 of
//    the uncapped one under the identical protocol.

void check_capped_vs_uncapped(double sn_mean) {
  Timer t;
  std::vector<double> f1s;
  std::ostringstream per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    SplitSeries splits = suite_splits(seed, 1.5);
    EncoderModel model = train_encoder(suite_spec(false), splits.train.values,
                                       splits.val.values,
                                       suite_train_options(seed, 200))
                             .model;
    f1s.push_back(swept_test_f1(model, splits));
    per_seed << (f1s.size() > 1 ? " " : "") << fmt("%.4f", f1s.back());
  }
  double vanilla_mean = 0.0;
  for (double f : f1s) vanilla_mean += f / double(f1s.size());

  const bool ok = sn_mean >= vanilla_mean - 0.01;
  report(9, "capped vs uncapped f1", ok,
         fmt("capped mean %.4f vs uncapped %.4f [%s]; margin -0.01", sn_mean,
             vanilla_mean, per_seed.str().c_str()),
         t.secs());
}

// ---------------------------------------------------------------------------
// 10. Representation probes: spliced windows sharing a regime keep similarity
//     1, windows straddling a splice drop; divergence-ranked rejection never
//     hurts F1 over the first removals and ends near the 5% tail.

void check_dynamics_and_rejection() {
  Timer t;
  bool ok = true;
  std::ostringstream detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto cps = evenly_spaced_change_points(kSuiteLength, kSuiteChangePoints);
    TimeSeries series =
        make_mean_shift_series(kSuiteDim, kSuiteLength, cps, 1.0, kSuiteNoise, seed);
    SplitSeries splits = split_series(series, {0.4, 0.2, 0.4});
    EncoderModel model = train_encoder(suite_spec(true), splits.train.values,
                                       splits.val.values,
                                       suite_train_options(seed, 150))
                             .model;

    const DynamicsOptions dopt{50, 300};
    const DynamicsCurve curve =
        dynamics_experiment(model, series.values, series.change_points, dopt);
    const std::size_t half = dopt.subsequence / 2;
    double shared_min = 1.0, straddle_min = 1.0;
    for (std::size_t off = 0; off < curve.offsets.size(); ++off) {
      if (curve.offsets[off] + dopt.window <= half)
        shared_min = std::min(shared_min, curve.similarity[off]);
      else
        straddle_min = std::min(straddle_min, curve.similarity[off]);
    }
    const bool dyn_ok =
        shared_min >= 1.0 - 1e-9 && straddle_min <= shared_min - 0.02;

    RejectionOptions ropt;
    ropt.window = kDetectWindow;
    ropt.margin = kMargin;
    ropt.seed = seed;
    const RejectionCurve rc =
        rejection_curve(model, splits.train.values, splits.test.values,
                        splits.test.change_points, ropt);
    bool weakly_improving = true;
    double prev = rc.baseline_f1;
    for (std::size_t i = 0; i < 10 && i < rc.points.size(); ++i) {
      if (rc.points[i].f1 < prev - 1e-12) weakly_improving = false;
      prev = rc.points[i].f1;
    }
    const bool rej_ok = rc.points.size() == 59 && weakly_improving &&
                        rc.points.back().fraction_kept <= 0.08;

    ok = ok && dyn_ok && rej_ok;
    detail << fmt("%ss%llu: shared %.3f straddle %.3f, %zu pts %s",
                  seed > 1 ? "; " : "", (unsigned long long)seed, shared_min,
                  straddle_min, rc.points.size(),
                  weakly_improving ? "weakly improving" : "DEGRADES");
  }
  report(10, "dynamics and rejection", ok, detail.str(), t.secs());
}

// ---------------------------------------------------------------------------
// 11. Bitwise determinism: the same config and seed reproduce every artifact.

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_determinism() {
  Timer t;
  RunConfig cfg;
  cfg.dims = 3;
  cfg.length = 1000;
  cfg.change_count = 3;  // one change point inside each split
  cfg.delta = 1.5;
  cfg.model = "sn-ts2vec";
  cfg.block = "conv";
  cfg.depth = 4;
  cfg.hidden_dim = 12;
  cfg.code_dim = 8;
  cfg.window = 30;
  cfg.margins = {30};
  cfg.steps = 25;
  cfg.batch = 4;
  cfg.val_every = 10;
  cfg.train_window = 60;
  cfg.min_overlap = 8;
  cfg.seed = 7;
  cfg.svg = false;

  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path();
  std::vector<fs::path> roots{base / "sncpd_acceptance_a", base / "sncpd_acceptance_b"};
  for (const fs::path& root : roots) {
    fs::remove_all(root);
    cfg.out = root.string();
    cfg.checkpoint.clear();
    cmd_train(cfg);
    cfg.checkpoint = (root / "train" / "checkpoint.bin").string();
    cmd_detect(cfg);
  }

  const char* files[] = {"train/loss.csv", "train/val_loss.csv",
                         "train/checkpoint.bin", "detect/trace.csv"};
  bool ok = true;
  std::size_t compared = 0;
  for (const char* rel : files) {
    const std::string a = read_bytes(roots[0] / rel);
    const std::string b = read_bytes(roots[1] / rel);
    if (a.empty() || a != b) ok = false;
    ++compared;
  }
  for (const fs::path& root : roots) fs::remove_all(root);
  report(11, "deterministic reruns", ok,
         fmt("%zu artifacts byte-identical across repeated runs", compared),
         t.secs());
}

}  // namespace

int main() {
  std::printf("acceptance gate: 11 checks\n");
  Timer total;
  std::optional<TrainResult> shared_model;
  double sn_mean = 0.0;

  check_trained_norm_cap(shared_model);
  check_distance_band();
  check_stack_inversion();
  check_lr_preservation();
  check_mmd_oracle();
  check_test_power();
  check_losses();
  check_detection_f1(shared_model, sn_mean);
  check_capped_vs_uncapped(sn_mean);
  check_dynamics_and_rejection();
  check_determinism();

  std::printf("acceptance: %d/11 passed  (%.1fs total)\n", 11 - failures,
              total.secs());
  return failures == 0 ? 0 : 1;
}
