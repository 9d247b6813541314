#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sncpd/diffcore.hpp"
#include "sncpd/specnorm.hpp"

namespace sncpd {

enum class Activation { Sigmoid, Relu };
enum class BlockKind { Dense, Conv };

struct BlockSpec {
  BlockKind kind = BlockKind::Dense;
  Activation activation = Activation::Relu;
  std::size_t kernel = 3;    // conv only, odd
  std::size_t dilation = 1;  // conv only
  double dropout = 0.0;
};

struct EncoderSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t code_dim = 0;
  std::vector<BlockSpec> blocks;
  bool identity_input = false;  // no input map; needs hidden_dim == input_dim
  bool identity_head = false;   // no head; needs code_dim == hidden_dim
  bool spectral_norm = true;
  double cap = 0.9;

  void validate() const;
};

struct ResidualBlock {
  BlockSpec spec;
  Tensor weight;  // dense (H,H), conv (H,H,kernel)
  Tensor bias;    // (H)
  SpectralNormState sn;
};

// Residual encoder: affine input map, a stack of x + act(W x + b) blocks,
// affine head. Rows are time steps.
class EncoderModel {
 public:
  EncoderModel() = default;
  static EncoderModel init(EncoderSpec spec, std::uint64_t seed);

  const EncoderSpec& spec() const { return spec_; }
  std::size_t depth() const { return blocks_.size(); }
  bool has_input_map() const { return !spec_.identity_input; }
  bool has_head() const { return !spec_.identity_head; }

  // Forward pieces on the tape. x is (t, input_dim).
  Tensor project_input(Tape& tape, const Tensor& x) const;
  // The residual branch g_l alone.
  Tensor branch(Tape& tape, std::size_t l, const Tensor& x, bool training = false,
                Rng* dropout_rng = nullptr) const;
  Tensor hidden(Tape& tape, const Tensor& x, bool training = false,
                Rng* dropout_rng = nullptr) const;
  Tensor head(Tape& tape, const Tensor& h) const;
  // Full forward, one code per time step: (t, code_dim).
  Tensor encode_sequence(Tape& tape, const Tensor& x, bool training = false,
                         Rng* dropout_rng = nullptr) const;
  // Time-pooled forward: mean of the block output over rows, then the head.
  Tensor encode_vector(Tape& tape, const Tensor& x, bool training = false,
                       Rng* dropout_rng = nullptr) const;

  // Value-only conveniences.
  Mat encode_sequence_values(const Mat& x) const;
  std::vector<double> encode_vector_values(const Mat& x) const;
  Mat hidden_values(const Mat& x) const;
  Mat branch_values(std::size_t l, const Mat& x) const;

  std::vector<Tensor> parameters();

  struct CappedWeight {
    Tensor weight;
    SpectralNormState* state;
    std::string name;
  };
  // Every weight the norm cap applies to (input map, blocks, head).
  std::vector<CappedWeight> capped_weights();
  // Projects all capped weights; iterations <= 0 runs each to convergence.
  void project_weights(int iterations);
  // Converged norm estimates of the capped weights, states untouched.
  std::vector<double> layer_norms() const;

  const Tensor& input_weight() const { return in_w_; }
  const Tensor& input_bias() const { return in_b_; }
  const Tensor& head_weight() const { return head_w_; }
  const Tensor& head_bias() const { return head_b_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }

  void save(const std::string& path) const;
  static EncoderModel load(const std::string& path);

 private:
  EncoderSpec spec_;
  Tensor in_w_, in_b_;      // (H,D), (H)
  Tensor head_w_, head_b_;  // (d,H), (d)
  SpectralNormState in_sn_, head_sn_;
  std::vector<ResidualBlock> blocks_;
};

}  // namespace sncpd
