#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sncpd/encoders.hpp"

namespace sncpd {

// --- contrastive losses over per-timestep codes ---
//
// z1 and z2 hold one (t, d) code matrix per instance, aligned so that row t of
// z1[i] and row t of z2[i] describe the same timestamp seen under two crops.

// Contrast each timestamp against the other instances in the batch.
Tensor instance_contrastive_loss(Tape& tape, std::span<const Tensor> z1,
                                 std::span<const Tensor> z2);

// Contrast each timestamp against the other timestamps of the same instance.
Tensor temporal_contrastive_loss(Tape& tape, std::span<const Tensor> z1,
                                 std::span<const Tensor> z2);

// Average of both losses, recomputed after each time halving (max pool of
// width 2) until a single timestamp remains; that last level drops the
// temporal term. The result is the mean over levels.
Tensor hierarchical_contrastive_loss(Tape& tape, std::vector<Tensor> z1,
                                     std::vector<Tensor> z2);

// --- crop sampling ---

// Two overlapping crops of [0, t): start1 <= start2 < end1 <= end2.
struct CropPair {
  std::size_t start1 = 0, end1 = 0;
  std::size_t start2 = 0, end2 = 0;

  std::size_t overlap_start() const { return start2; }
  std::size_t overlap_end() const { return end1; }
  std::size_t overlap_length() const { return end1 - start2; }
};

CropPair random_crop_pair(std::size_t t, std::size_t min_overlap, Rng& rng);

// --- bootstrapped pair loss (online / target networks) ---

struct Mlp {
  Tensor w1, b1;  // (hidden, in), (hidden)
  Tensor w2, b2;  // (out, hidden), (out)

  static Mlp init(std::size_t in, std::size_t hidden, std::size_t out,
                  std::uint64_t seed, bool requires_grad = true);
  Tensor forward(Tape& tape, const Tensor& x) const;  // rows are instances
  std::vector<Tensor> parameters();
};

// 2 - 2 cos(prediction, target) per row, averaged.
Tensor bootstrap_regression_loss(Tape& tape, const Tensor& prediction,
                                 const Tensor& target);

// target <- decay * target + (1 - decay) * online, elementwise over the
// parameter lists (which must align).
void ema_update(std::span<Tensor> target, std::span<Tensor> online, double decay);

// --- training ---

enum class Objective { Contrastive, Bootstrap };

struct TrainOptions {
  Objective objective = Objective::Contrastive;
  std::size_t steps = 300;
  std::size_t batch = 8;
  std::size_t window = 64;       // training window length
  std::size_t min_overlap = 2;   // crop pair overlap floor
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int power_iterations = 1;      // norm projection per step
  int final_power_iterations = 50;
  std::size_t val_every = 25;
  std::size_t val_batches = 4;
  // bootstrap objective only
  double ema_decay = 0.996;
  std::size_t head_hidden = 64;
  std::size_t head_dim = 16;
};

struct TrainResult {
  EncoderModel model;  // weights of the best validation evaluation
  std::vector<double> train_loss;       // one entry per step
  std::vector<double> val_loss;         // one entry per evaluation
  std::vector<std::size_t> val_steps;   // step index of each evaluation
  double best_val = 0.0;
  std::size_t best_step = 0;
};

// Trains an encoder on the rows of `train`, tracking the same objective on
// `val` and returning the weights of the best evaluation. Throws
// ConvergenceError if the loss leaves the reals.
TrainResult train_encoder(const EncoderSpec& spec, const Mat& train, const Mat& val,
                          const TrainOptions& opt);

}  // namespace sncpd
