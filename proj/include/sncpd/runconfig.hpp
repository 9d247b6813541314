#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sncpd/detector.hpp"
#include "sncpd/encoders.hpp"
#include "sncpd/selfsup.hpp"

namespace sncpd {

// Flat key=value run description. File keys and CLI flags set the same
// fields; precedence is flags > file > defaults.
struct RunConfig {
  // data
  std::string data = "mean-shift";  // mean-shift | elliptical | csv
  std::string csv_path;
  std::size_t dims = 5;
  std::size_t length = 5000;
  std::size_t change_count = 10;
  double delta = 1.5;
  double noise = 1.0;
  double dof = 5.0;     // elliptical tail weight
  double spread = 1.5;  // elliptical scale step
  bool normalize = false;
  double split_train = 0.4, split_val = 0.2, split_test = 0.4;

  // model
  std::string model = "sn-ts2vec";  // sn-ts2vec | ts2vec | sn-byol | ts-byol
  std::string block = "conv";      // conv | dense
  std::size_t depth = 8;
  std::size_t hidden_dim = 32;
  std::size_t code_dim = 16;
  std::size_t kernel = 3;
  double dropout = 0.0;
  double cap_c = 0.9;

  // detection
  std::size_t window = 50;
  std::string statistic = "cos";  // cos | mmd
  std::string mode = "auto";      // auto | vector | sequence
  std::vector<std::size_t> margins{50};
  double mmd_sigma = 0.0;
  std::size_t stride = 1;

  // training
  std::size_t steps = 300;
  std::size_t batch = 8;
  double lr = 1e-3;
  std::size_t val_every = 25;
  std::size_t val_batches = 4;
  std::size_t train_window = 0;  // 0 = twice the detection window
  std::size_t min_overlap = 16;
  double ema = 0.996;
  std::size_t head_hidden = 64;
  std::size_t head_dim = 16;

  // experiments
  std::size_t subsequence = 300;
  double ridge = 1e-6;

  // run
  std::uint64_t seed = 0;
  std::string out;
  std::string checkpoint;
  bool svg = true;

  // Assigns one field from its text form; unknown key or bad value throws.
  void set(const std::string& key, const std::string& value);

  // Strict flat key=value file; '#' comments and blank lines allowed.
  static RunConfig from_file(const std::string& path);
  void apply(const std::vector<std::pair<std::string, std::string>>& overrides);

  void validate() const;

  // Every key in sorted order with normalized number formatting.
  std::string canonical() const;
  std::uint64_t hash() const;  // FNV-1a over canonical()

  bool spectral_norm() const { return model.rfind("sn-", 0) == 0; }
  Objective objective() const;
  Statistic statistic_kind() const;
  // vector | sequence after resolving "auto" from the statistic.
  std::string resolved_mode() const;
  EncoderSpec encoder_spec(std::size_t input_dim) const;
  TrainOptions train_options() const;
  // Output directory: explicit `out`, else $SNCPD_OUT, else "out".
  std::string out_root() const;
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace sncpd
