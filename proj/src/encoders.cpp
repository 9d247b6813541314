#include "sncpd/encoders.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sncpd/rng.hpp"

namespace sncpd {

namespace {

Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor apply_activation(Tape& tape, Activation act, const Tensor& x) {
  switch (act) {
    case Activation::Sigmoid:
      return sigmoid(tape, x);
    case Activation::Relu:
      return relu(tape, x);
  }
  throw ConfigError("unknown activation");
}

// ---- checkpoint encoding, explicit little endian ----

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  std::uint64_t v = get_u64(in);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

constexpr char kMagic[4] = {'S', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::string spec_to_kv(const EncoderSpec& s) {
  std::ostringstream out;
  out << "input_dim=" << s.input_dim << '\n'
      << "hidden_dim=" << s.hidden_dim << '\n'
      << "code_dim=" << s.code_dim << '\n'
      << "identity_input=" << (s.identity_input ? 1 : 0) << '\n'
      << "identity_head=" << (s.identity_head ? 1 : 0) << '\n'
      << "spectral_norm=" << (s.spectral_norm ? 1 : 0) << '\n';
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", s.cap);
  out << "cap=" << buf << '\n' << "depth=" << s.blocks.size() << '\n';
  for (std::size_t l = 0; l < s.blocks.size(); ++l) {
    const BlockSpec& b = s.blocks[l];
    std::snprintf(buf, sizeof(buf), "%.17g", b.dropout);
    out << "block." << l << '='
        << (b.kind == BlockKind::Dense ? "dense" : "conv") << ','
        << (b.activation == Activation::Sigmoid ? "sigmoid" : "relu") << ','
        << b.kernel << ',' << b.dilation << ',' << buf << '\n';
  }
  return out.str();
}

EncoderSpec spec_from_kv(const std::string& text, const std::string& path) {
  EncoderSpec s;
  std::size_t depth = 0;
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path, lineno, "expected key=value");
    kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  auto need = [&](const std::string& key) -> const std::string& {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    throw ParseError(path, 0, "missing config key " + key);
  };
  s.input_dim = std::stoull(need("input_dim"));
  s.hidden_dim = std::stoull(need("hidden_dim"));
  s.code_dim = std::stoull(need("code_dim"));
  s.identity_input = need("identity_input") == "1";
  s.identity_head = need("identity_head") == "1";
  s.spectral_norm = need("spectral_norm") == "1";
  s.cap = std::stod(need("cap"));
  depth = std::stoull(need("depth"));
  for (std::size_t l = 0; l < depth; ++l) {
    std::istringstream bs(need("block." + std::to_string(l)));
    std::string kind, act, kernel, dil, drop;
    if (!std::getline(bs, kind, ',') || !std::getline(bs, act, ',') ||
        !std::getline(bs, kernel, ',') || !std::getline(bs, dil, ',') ||
        !std::getline(bs, drop))
      throw ParseError(path, 0, "malformed block." + std::to_string(l));
    BlockSpec b;
    if (kind == "dense")
      b.kind = BlockKind::Dense;
    else if (kind == "conv")
      b.kind = BlockKind::Conv;
    else
      throw ParseError(path, 0, "unknown block kind " + kind);
    if (act == "sigmoid")
      b.activation = Activation::Sigmoid;
    else if (act == "relu")
      b.activation = Activation::Relu;
    else
      throw ParseError(path, 0, "unknown activation " + act);
    b.kernel = std::stoull(kernel);
    b.dilation = std::stoull(dil);
    b.dropout = std::stod(drop);
    s.blocks.push_back(b);
  }
  return s;
}

}  // namespace

void EncoderSpec::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || code_dim == 0)
    throw ConfigError("encoder: zero dimension");
  if (identity_input && hidden_dim != input_dim)
    throw ConfigError("encoder: identity input map needs hidden_dim == input_dim");
  if (identity_head && code_dim != hidden_dim)
    throw ConfigError("encoder: identity head needs code_dim == hidden_dim");
  if (!(cap > 0.0)) throw ConfigError("encoder: cap must be positive");
  for (const BlockSpec& b : blocks) {
    if (b.kind == BlockKind::Conv) {
      if (b.kernel == 0 || b.kernel % 2 == 0)
        throw ConfigError("encoder: conv kernel must be odd");
      if (b.dilation == 0) throw ConfigError("encoder: conv dilation must be positive");
    }
    if (b.dropout < 0.0 || b.dropout >= 1.0)
      throw ConfigError("encoder: dropout must be in [0, 1)");
  }
}

EncoderModel EncoderModel::init(EncoderSpec spec, std::uint64_t seed) {
  spec.validate();
  EncoderModel m;
  m.spec_ = std::move(spec);
  const EncoderSpec& s = m.spec_;
  Rng rng = make_rng(seed, Stream::Init);
  if (!s.identity_input) {
    m.in_w_ = init_weight({s.hidden_dim, s.input_dim}, s.input_dim, rng);
    m.in_b_ = Tensor::zeros({s.hidden_dim}, true);
  }
  for (const BlockSpec& b : s.blocks) {
    ResidualBlock rb;
    rb.spec = b;
    if (b.kind == BlockKind::Dense) {
      rb.weight = init_weight({s.hidden_dim, s.hidden_dim}, s.hidden_dim, rng);
    } else {
      rb.weight = init_weight({s.hidden_dim, s.hidden_dim, b.kernel},
                              s.hidden_dim * b.kernel, rng);
    }
    rb.bias = Tensor::zeros({s.hidden_dim}, true);
    m.blocks_.push_back(std::move(rb));
  }
  if (!s.identity_head) {
    m.head_w_ = init_weight({s.code_dim, s.hidden_dim}, s.hidden_dim, rng);
    m.head_b_ = Tensor::zeros({s.code_dim}, true);
  }
  if (s.spectral_norm) m.project_weights(0);
  return m;
}

Tensor EncoderModel::project_input(Tape& tape, const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != spec_.input_dim)
    throw DimensionError("encoder: input must be t x input_dim");
  if (spec_.identity_input) return x;
  Tensor y = matmul(tape, x, transpose(tape, in_w_));
  return add_rowvec(tape, y, in_b_);
}

Tensor EncoderModel::branch(Tape& tape, std::size_t l, const Tensor& x, bool training,
                            Rng* dropout_rng) const {
  if (l >= blocks_.size()) throw DimensionError("encoder: block index out of range");
  const ResidualBlock& b = blocks_[l];
  Tensor z;
  if (b.spec.kind == BlockKind::Dense) {
    z = matmul(tape, x, transpose(tape, b.weight));
  } else {
    z = conv1d(tape, x, b.weight, b.spec.dilation);
  }
  z = add_rowvec(tape, z, b.bias);
  z = apply_activation(tape, b.spec.activation, z);
  if (training && b.spec.dropout > 0.0) {
    if (!dropout_rng) throw ConfigError("encoder: dropout requires an rng in training mode");
    z = dropout(tape, z, b.spec.dropout, true, *dropout_rng);
  }
  return z;
}

Tensor EncoderModel::hidden(Tape& tape, const Tensor& x, bool training,
                            Rng* dropout_rng) const {
  Tensor h = project_input(tape, x);
  for (std::size_t l = 0; l < blocks_.size(); ++l)
    h = add(tape, h, branch(tape, l, h, training, dropout_rng));
  return h;
}

Tensor EncoderModel::head(Tape& tape, const Tensor& h) const {
  if (spec_.identity_head) return h;
  Tensor y = matmul(tape, h, transpose(tape, head_w_));
  return add_rowvec(tape, y, head_b_);
}

Tensor EncoderModel::encode_sequence(Tape& tape, const Tensor& x, bool training,
                                     Rng* dropout_rng) const {
  return head(tape, hidden(tape, x, training, dropout_rng));
}

Tensor EncoderModel::encode_vector(Tape& tape, const Tensor& x, bool training,
                                   Rng* dropout_rng) const {
  Tensor h = hidden(tape, x, training, dropout_rng);
  Tensor pooled = mean_rows(tape, h);
  Tensor row = reshape(tape, pooled, {1, spec_.hidden_dim});
  Tensor code = head(tape, row);
  return reshape(tape, code, {spec_.code_dim});
}

Mat EncoderModel::encode_sequence_values(const Mat& x) const {
  Tape tape(false);
  return encode_sequence(tape, Tensor::from_mat(x)).to_mat();
}

std::vector<double> EncoderModel::encode_vector_values(const Mat& x) const {
  Tape tape(false);
  return encode_vector(tape, Tensor::from_mat(x)).values();
}

Mat EncoderModel::hidden_values(const Mat& x) const {
  Tape tape(false);
  return hidden(tape, Tensor::from_mat(x)).to_mat();
}

Mat EncoderModel::branch_values(std::size_t l, const Mat& x) const {
  Tape tape(false);
  return branch(tape, l, Tensor::from_mat(x)).to_mat();
}

std::vector<Tensor> EncoderModel::parameters() {
  std::vector<Tensor> ps;
  if (!spec_.identity_input) {
    ps.push_back(in_w_);
    ps.push_back(in_b_);
  }
  for (ResidualBlock& b : blocks_) {
    ps.push_back(b.weight);
    ps.push_back(b.bias);
  }
  if (!spec_.identity_head) {
    ps.push_back(head_w_);
    ps.push_back(head_b_);
  }
  return ps;
}

std::vector<EncoderModel::CappedWeight> EncoderModel::capped_weights() {
  std::vector<CappedWeight> ws;
  if (!spec_.identity_input) ws.push_back({in_w_, &in_sn_, "w_in"});
  for (std::size_t l = 0; l < blocks_.size(); ++l)
    ws.push_back({blocks_[l].weight, &blocks_[l].sn, "w_block_" + std::to_string(l)});
  if (!spec_.identity_head) ws.push_back({head_w_, &head_sn_, "w_head"});
  return ws;
}

void EncoderModel::project_weights(int iterations) {
  if (!spec_.spectral_norm) return;
  for (CappedWeight cw : capped_weights())
    project_spectral_norm(cw.weight, spec_.cap, *cw.state, iterations);
}

std::vector<double> EncoderModel::layer_norms() const {
  std::vector<double> norms;
  auto& self = const_cast<EncoderModel&>(*this);
  for (const CappedWeight& cw : self.capped_weights())
    norms.push_back(spectral_norm(weight_matrix_view(cw.weight)));
  return norms;
}

void EncoderModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save: cannot open " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  const std::string cfg = spec_to_kv(spec_);
  put_u64(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  auto& self = const_cast<EncoderModel&>(*this);
  std::vector<std::pair<std::string, Tensor>> blobs;
  if (!spec_.identity_input) {
    blobs.emplace_back("w_in", self.in_w_);
    blobs.emplace_back("b_in", self.in_b_);
  }
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    blobs.emplace_back("w_block_" + std::to_string(l), self.blocks_[l].weight);
    blobs.emplace_back("b_block_" + std::to_string(l), self.blocks_[l].bias);
  }
  if (!spec_.identity_head) {
    blobs.emplace_back("w_head", self.head_w_);
    blobs.emplace_back("b_head", self.head_b_);
  }
  put_u32(out, static_cast<std::uint32_t>(blobs.size()));
  for (const auto& [name, t] : blobs) {
    if (name.size() > 0xffff) throw Error("save: blob name too long");
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.values()) put_f64(out, v);
  }
  if (!out) throw Error("save: write failed for " + path);
}

EncoderModel EncoderModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open checkpoint");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError(path, 0, "bad checkpoint magic");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw ParseError(path, 0, "unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t cfg_len = get_u64(in);
  if (cfg_len > (1u << 20)) throw ParseError(path, 0, "oversized config block");
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), static_cast<std::streamsize>(cfg_len));
  if (!in) throw ParseError(path, 0, "truncated config block");

  EncoderSpec spec = spec_from_kv(cfg, path);
  spec.validate();
  EncoderModel m = EncoderModel::init(spec, 0);

  const std::uint32_t n_blobs = get_u32(in);
  for (std::uint32_t i = 0; i < n_blobs; ++i) {
    const std::uint32_t name_len = get_u32(in);
    if (name_len > 4096) throw ParseError(path, 0, "oversized blob name");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = get_u32(in);
    if (rank > 4) throw ParseError(path, 0, "blob rank above 4");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = get_u64(in);
      n *= d;
    }
    if (!in || n > (1ull << 28)) throw ParseError(path, 0, "bad blob header");
    std::vector<double> vals(n);
    for (auto& v : vals) v = get_f64(in);
    if (!in) throw ParseError(path, 0, "truncated blob " + name);

    Tensor* target = nullptr;
    if (name == "w_in")
      target = &m.in_w_;
    else if (name == "b_in")
      target = &m.in_b_;
    else if (name == "w_head")
      target = &m.head_w_;
    else if (name == "b_head")
      target = &m.head_b_;
    else if (name.rfind("w_block_", 0) == 0)
      target = &m.blocks_.at(std::stoull(name.substr(8))).weight;
    else if (name.rfind("b_block_", 0) == 0)
      target = &m.blocks_.at(std::stoull(name.substr(8))).bias;
    else
      throw ParseError(path, 0, "unknown blob " + name);
    if (!target->defined() || target->shape() != shape)
      throw ParseError(path, 0, "blob " + name + " has unexpected shape");
    target->values() = std::move(vals);
  }
  // Warm starts from init no longer match the loaded weights.
  for (CappedWeight cw : m.capped_weights()) *cw.state = SpectralNormState{};
  return m;
}

}  // namespace sncpd
