#include "sncpd/selfsup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sncpd/errors.hpp"

namespace sncpd {
namespace {

void require_aligned(std::span<const Tensor> z1, std::span<const Tensor> z2,
                     const char* what) {
  if (z1.empty() || z1.size() != z2.size())
    throw DimensionError(std::string(what) + ": batch sizes differ or are empty");
  const std::size_t t = z1[0].rows(), d = z1[0].cols();
  if (t == 0) throw DimensionError(std::string(what) + ": empty codes");
  for (std::size_t i = 0; i < z1.size(); ++i) {
    if (z1[i].rank() != 2 || z2[i].rank() != 2)
      throw DimensionError(std::string(what) + ": codes must be rank 2");
    if (z1[i].rows() != t || z2[i].rows() != t || z1[i].cols() != d || z2[i].cols() != d)
      throw DimensionError(std::string(what) + ": code shapes differ across the batch");
  }
}

// Mask that keeps every column except the self column of the second half.
Mat drop_self_mask(std::size_t n) {
  Mat mask(n, 2 * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) mask(i, n + i) = 0.0;
  return mask;
}

Tensor batch_at_time(Tape& tape, std::span<const Tensor> z, std::size_t t) {
  std::vector<Tensor> rows;
  rows.reserve(z.size());
  for (const Tensor& zi : z) rows.push_back(slice_rows(tape, zi, t, t + 1));
  return concat_rows(tape, rows);
}

}  // namespace

Tensor instance_contrastive_loss(Tape& tape, std::span<const Tensor> z1,
                                 std::span<const Tensor> z2) {
  require_aligned(z1, z2, "instance_contrastive_loss");
  const std::size_t b = z1.size(), t = z1[0].rows();
  const Mat mask = drop_self_mask(b);
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t s = 0; s < t; ++s) {
    Tensor a = batch_at_time(tape, z1, s);   // (B, d)
    Tensor p = batch_at_time(tape, z2, s);
    Tensor cross = matmul(tape, a, transpose(tape, p));  // (B, B)
    Tensor self = matmul(tape, a, transpose(tape, a));
    std::vector<Tensor> parts{cross, self};
    Tensor denom = logsumexp_rows_masked(tape, concat_cols(tape, parts), mask);
    Tensor num = diag_part(tape, cross);
    total = add(tape, total, sum(tape, sub(tape, denom, num)));
  }
  return scale(tape, total, 1.0 / double(b * t));
}

Tensor temporal_contrastive_loss(Tape& tape, std::span<const Tensor> z1,
                                 std::span<const Tensor> z2) {
  require_aligned(z1, z2, "temporal_contrastive_loss");
  const std::size_t b = z1.size(), t = z1[0].rows();
  const Mat mask = drop_self_mask(t);
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < b; ++i) {
    Tensor cross = matmul(tape, z1[i], transpose(tape, z2[i]));  // (t, t)
    Tensor self = matmul(tape, z1[i], transpose(tape, z1[i]));
    std::vector<Tensor> parts{cross, self};
    Tensor denom = logsumexp_rows_masked(tape, concat_cols(tape, parts), mask);
    Tensor num = diag_part(tape, cross);
    total = add(tape, total, sum(tape, sub(tape, denom, num)));
  }
  return scale(tape, total, 1.0 / double(b * t));
}

Tensor hierarchical_contrastive_loss(Tape& tape, std::vector<Tensor> z1,
                                     std::vector<Tensor> z2) {
  require_aligned(z1, z2, "hierarchical_contrastive_loss");
  Tensor total = Tensor::scalar(0.0);
  std::size_t levels = 0;
  for (;;) {
    const std::size_t t = z1[0].rows();
    Tensor inst = instance_contrastive_loss(tape, z1, z2);
    Tensor level = inst;
    if (t > 1) {
      Tensor temp = temporal_contrastive_loss(tape, z1, z2);
      level = scale(tape, add(tape, inst, temp), 0.5);
    }
    total = add(tape, total, level);
    ++levels;
    if (t <= 1) break;
    for (std::size_t i = 0; i < z1.size(); ++i) {
      z1[i] = max_pool_time(tape, z1[i], 2);
      z2[i] = max_pool_time(tape, z2[i], 2);
    }
  }
  return scale(tape, total, 1.0 / double(levels));
}

CropPair random_crop_pair(std::size_t t, std::size_t min_overlap, Rng& rng) {
  if (min_overlap == 0) throw ConfigError("random_crop_pair: min_overlap must be positive");
  if (t < min_overlap)
    throw ConfigError("random_crop_pair: series shorter than the overlap floor");
  CropPair c;
  c.start2 = std::uniform_int_distribution<std::size_t>(0, t - min_overlap)(rng);
  c.end1 = std::uniform_int_distribution<std::size_t>(c.start2 + min_overlap, t)(rng);
  c.start1 = std::uniform_int_distribution<std::size_t>(0, c.start2)(rng);
  c.end2 = std::uniform_int_distribution<std::size_t>(c.end1, t)(rng);
  return c;
}

Mlp Mlp::init(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed,
              bool requires_grad) {
  if (in == 0 || hidden == 0 || out == 0)
    throw ConfigError("Mlp::init: zero layer width");
  Rng rng = make_rng(seed, Stream::Init);
  auto gaussian = [&rng](Shape shape, double scale) {
    std::normal_distribution<double> d(0.0, scale);
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return Tensor(std::move(shape), std::move(v), true);
  };
  Mlp m;
  m.w1 = gaussian({hidden, in}, 1.0 / std::sqrt(double(in)));
  m.b1 = Tensor::zeros({hidden}, true);
  m.w2 = gaussian({out, hidden}, 1.0 / std::sqrt(double(hidden)));
  m.b2 = Tensor::zeros({out}, true);
  if (!requires_grad)
    for (Tensor p : {m.w1, m.b1, m.w2, m.b2}) p.set_requires_grad(false);
  return m;
}

Tensor Mlp::forward(Tape& tape, const Tensor& x) const {
  Tensor h = relu(tape, add_rowvec(tape, matmul(tape, x, transpose(tape, w1)), b1));
  return add_rowvec(tape, matmul(tape, h, transpose(tape, w2)), b2);
}

std::vector<Tensor> Mlp::parameters() { return {w1, b1, w2, b2}; }

Tensor bootstrap_regression_loss(Tape& tape, const Tensor& prediction,
                                 const Tensor& target) {
  if (prediction.rank() != 2 || target.rank() != 2 ||
      prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw DimensionError("bootstrap_regression_loss: shapes differ");
  Tensor cos = rows_dot(tape, l2_normalize_rows(tape, prediction),
                        l2_normalize_rows(tape, target));
  return mean(tape, add_scalar(tape, scale(tape, cos, -2.0), 2.0));
}

void ema_update(std::span<Tensor> target, std::span<Tensor> online, double decay) {
  if (target.size() != online.size())
    throw DimensionError("ema_update: parameter lists differ in length");
  if (decay < 0.0 || decay > 1.0) throw ConfigError("ema_update: decay outside [0, 1]");
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto& tv = target[i].values();
    const auto& ov = online[i].values();
    if (tv.size() != ov.size())
      throw DimensionError("ema_update: parameter " + std::to_string(i) + " shape differs");
    for (std::size_t j = 0; j < tv.size(); ++j)
      tv[j] = decay * tv[j] + (1.0 - decay) * ov[j];
  }
}

namespace {

Mat window_of(const Mat& series, std::size_t start, std::size_t len) {
  Mat w(len, series.cols());
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < series.cols(); ++j) w(i, j) = series(start + i, j);
  return w;
}

struct BatchSpec {
  std::vector<std::size_t> starts;
  CropPair crop;  // shared so the batch codes align
};

BatchSpec sample_batch(const Mat& series, const TrainOptions& opt, Rng& start_rng,
                       Rng& crop_rng) {
  BatchSpec b;
  std::uniform_int_distribution<std::size_t> d(0, series.rows() - opt.window);
  for (std::size_t i = 0; i < opt.batch; ++i) b.starts.push_back(d(start_rng));
  b.crop = random_crop_pair(opt.window, opt.min_overlap, crop_rng);
  return b;
}

struct BootstrapHeads {
  Mlp projector, target_projector, predictor;
};

// Loss of one batch. Gradients flow when the tape records.
double contrastive_batch_loss(Tape& tape, const EncoderModel& model, const Mat& series,
                              const BatchSpec& batch, bool training, Rng* dropout_rng,
                              Tensor* out) {
  std::vector<Tensor> z1, z2;
  const CropPair& c = batch.crop;
  for (std::size_t i = 0; i < batch.starts.size(); ++i) {
    const std::size_t s = batch.starts[i];
    Mat x1 = window_of(series, s + c.start1, c.end1 - c.start1);
    Mat x2 = window_of(series, s + c.start2, c.end2 - c.start2);
    Tensor e1 = model.encode_sequence(tape, Tensor::from_mat(x1), training, dropout_rng);
    Tensor e2 = model.encode_sequence(tape, Tensor::from_mat(x2), training, dropout_rng);
    z1.push_back(slice_rows(tape, e1, c.start2 - c.start1, c.end1 - c.start1));
    z2.push_back(slice_rows(tape, e2, 0, c.end1 - c.start2));
  }
  Tensor loss = hierarchical_contrastive_loss(tape, std::move(z1), std::move(z2));
  if (out) *out = loss;
  return loss.item();
}

double bootstrap_batch_loss(Tape& tape, const EncoderModel& online,
                            const EncoderModel& target, BootstrapHeads& heads,
                            const Mat& series, const BatchSpec& batch, bool training,
                            Rng* dropout_rng, Tensor* out) {
  std::vector<Tensor> v1, v2, t1, t2;
  const CropPair& c = batch.crop;
  for (std::size_t i = 0; i < batch.starts.size(); ++i) {
    const std::size_t s = batch.starts[i];
    Tensor x1 = Tensor::from_mat(window_of(series, s + c.start1, c.end1 - c.start1));
    Tensor x2 = Tensor::from_mat(window_of(series, s + c.start2, c.end2 - c.start2));
    Shape row{1, online.spec().code_dim};
    v1.push_back(reshape(tape, online.encode_vector(tape, x1, training, dropout_rng), row));
    v2.push_back(reshape(tape, online.encode_vector(tape, x2, training, dropout_rng), row));
    t1.push_back(reshape(tape, target.encode_vector(tape, x1), row));
    t2.push_back(reshape(tape, target.encode_vector(tape, x2), row));
  }
  Tensor o1 = heads.predictor.forward(tape, heads.projector.forward(tape, concat_rows(tape, v1)));
  Tensor o2 = heads.predictor.forward(tape, heads.projector.forward(tape, concat_rows(tape, v2)));
  Tensor g1 = heads.target_projector.forward(tape, concat_rows(tape, t1));
  Tensor g2 = heads.target_projector.forward(tape, concat_rows(tape, t2));
  Tensor loss = scale(tape,
                      add(tape, bootstrap_regression_loss(tape, o1, g2),
                          bootstrap_regression_loss(tape, o2, g1)),
                      0.5);
  if (out) *out = loss;
  return loss.item();
}

std::vector<std::vector<double>> snapshot(std::vector<Tensor> params) {
  std::vector<std::vector<double>> s;
  s.reserve(params.size());
  for (const Tensor& p : params) s.push_back(p.values());
  return s;
}

void restore(std::vector<Tensor> params, const std::vector<std::vector<double>>& s) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].values() = s[i];
}

}  // namespace

TrainResult train_encoder(const EncoderSpec& spec, const Mat& train, const Mat& val,
                          const TrainOptions& opt) {
  spec.validate();
  if (opt.steps == 0 || opt.batch == 0) throw ConfigError("train_encoder: empty schedule");
  if (opt.window == 0 || train.rows() < opt.window || val.rows() < opt.window)
    throw ConfigError("train_encoder: series shorter than the training window");
  if (train.cols() != spec.input_dim || val.cols() != spec.input_dim)
    throw ConfigError("train_encoder: series dimension differs from the encoder input");

  TrainResult res;
  res.model = EncoderModel::init(spec, opt.seed);
  EncoderModel& model = res.model;

  const bool bootstrap = opt.objective == Objective::Bootstrap;
  EncoderModel target;
  BootstrapHeads heads;
  if (bootstrap) {
    target = EncoderModel::init(spec, opt.seed);  // same weights, separate storage
    heads.projector = Mlp::init(spec.code_dim, opt.head_hidden, opt.head_dim,
                                derive_seed(opt.seed, Stream::Init, 1));
    heads.target_projector = Mlp::init(spec.code_dim, opt.head_hidden, opt.head_dim,
                                       derive_seed(opt.seed, Stream::Init, 1), false);
    heads.predictor = Mlp::init(opt.head_dim, opt.head_hidden, opt.head_dim,
                                derive_seed(opt.seed, Stream::Init, 2));
    for (Tensor p : target.parameters()) p.set_requires_grad(false);
  }

  std::vector<Tensor> trained = model.parameters();
  if (bootstrap) {
    for (const Tensor& p : heads.projector.parameters()) trained.push_back(p);
    for (const Tensor& p : heads.predictor.parameters()) trained.push_back(p);
  }
  std::vector<Tensor> ema_target, ema_online;
  if (bootstrap) {
    ema_target = target.parameters();
    for (const Tensor& p : heads.target_projector.parameters()) ema_target.push_back(p);
    ema_online = model.parameters();
    for (const Tensor& p : heads.projector.parameters()) ema_online.push_back(p);
  }

  AdamState adam;
  res.best_val = std::numeric_limits<double>::infinity();

  auto evaluate = [&](std::size_t eval_idx) {
    Tape tape(false);
    Rng start_rng = make_rng(opt.seed, Stream::Shuffle, (1ull << 32) + eval_idx);
    Rng crop_rng = make_rng(opt.seed, Stream::Crop, (1ull << 32) + eval_idx);
    double total = 0.0;
    for (std::size_t b = 0; b < opt.val_batches; ++b) {
      BatchSpec batch = sample_batch(val, opt, start_rng, crop_rng);
      total += bootstrap ? bootstrap_batch_loss(tape, model, target, heads, val, batch,
                                                false, nullptr, nullptr)
                         : contrastive_batch_loss(tape, model, val, batch, false, nullptr,
                                                  nullptr);
    }
    return total / double(opt.val_batches);
  };

  std::vector<std::vector<double>> best;
  std::size_t eval_idx = 0;
  auto run_validation = [&](std::size_t step) {
    const double v = evaluate(eval_idx++);
    res.val_loss.push_back(v);
    res.val_steps.push_back(step);
    if (v < res.best_val) {
      res.best_val = v;
      res.best_step = step;
      best = snapshot(model.parameters());
    }
  };

  run_validation(0);
  for (std::size_t step = 0; step < opt.steps; ++step) {
    if (spec.spectral_norm) model.project_weights(opt.power_iterations);

    Rng start_rng = make_rng(opt.seed, Stream::Shuffle, step);
    Rng crop_rng = make_rng(opt.seed, Stream::Crop, step);
    Rng dropout_rng = make_rng(opt.seed, Stream::Dropout, step);
    BatchSpec batch = sample_batch(train, opt, start_rng, crop_rng);

    Tape tape(true);
    Tensor loss;
    const double value =
        bootstrap ? bootstrap_batch_loss(tape, model, target, heads, train, batch, true,
                                         &dropout_rng, &loss)
                  : contrastive_batch_loss(tape, model, train, batch, true, &dropout_rng,
                                           &loss);
    if (!std::isfinite(value))
      throw ConvergenceError("train_encoder: loss left the reals at step " +
                                 std::to_string(step),
                             value, int(step));
    res.train_loss.push_back(value);

    tape.backward(loss);
    adam_step(trained, adam, opt.lr);
    zero_grads(trained);
    if (bootstrap) ema_update(ema_target, ema_online, opt.ema_decay);

    if ((step + 1) % opt.val_every == 0 || step + 1 == opt.steps)
      run_validation(step + 1);
  }

  restore(model.parameters(), best);
  if (spec.spectral_norm) {
    for (EncoderModel::CappedWeight cw : model.capped_weights()) *cw.state = SpectralNormState{};
    model.project_weights(opt.final_power_iterations);
  }
  return res;
}

}  // namespace sncpd
