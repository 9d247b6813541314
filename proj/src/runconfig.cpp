#include "sncpd/runconfig.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sncpd/errors.hpp"

namespace sncpd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      value + "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key +
                      "': expected a non-negative integer, got '" + value +
                      "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on")
    return true;
  if (value == "0" || value == "false" || value == "no" || value == "off")
    return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" +
                    value + "'");
}

std::vector<std::size_t> parse_margins(const std::string& key,
                                       const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(parse_uint(key, item)));
  }
  if (out.empty())
    throw ConfigError("config key '" + key + "': expected at least one value");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "data") data = value;
  else if (key == "csv_path") csv_path = value;
  else if (key == "dims") dims = parse_uint(key, value);
  else if (key == "length") length = parse_uint(key, value);
  else if (key == "change_count") change_count = parse_uint(key, value);
  else if (key == "delta") delta = parse_double(key, value);
  else if (key == "noise") noise = parse_double(key, value);
  else if (key == "dof") dof = parse_double(key, value);
  else if (key == "spread") spread = parse_double(key, value);
  else if (key == "normalize") normalize = parse_bool(key, value);
  else if (key == "split_train") split_train = parse_double(key, value);
  else if (key == "split_val") split_val = parse_double(key, value);
  else if (key == "split_test") split_test = parse_double(key, value);
  else if (key == "model") model = value;
  else if (key == "block") block = value;
  else if (key == "depth") depth = parse_uint(key, value);
  else if (key == "hidden_dim") hidden_dim = parse_uint(key, value);
  else if (key == "code_dim") code_dim = parse_uint(key, value);
  else if (key == "kernel") kernel = parse_uint(key, value);
  else if (key == "dropout") dropout = parse_double(key, value);
  else if (key == "cap_c") cap_c = parse_double(key, value);
  else if (key == "window") window = parse_uint(key, value);
  else if (key == "statistic") statistic = value;
  else if (key == "mode") mode = value;
  else if (key == "margins") margins = parse_margins(key, value);
  else if (key == "mmd_sigma") mmd_sigma = parse_double(key, value);
  else if (key == "stride") stride = parse_uint(key, value);
  else if (key == "steps") steps = parse_uint(key, value);
  else if (key == "batch") batch = parse_uint(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "val_every") val_every = parse_uint(key, value);
  else if (key == "val_batches") val_batches = parse_uint(key, value);
  else if (key == "train_window") train_window = parse_uint(key, value);
  else if (key == "min_overlap") min_overlap = parse_uint(key, value);
  else if (key == "ema") ema = parse_double(key, value);
  else if (key == "head_hidden") head_hidden = parse_uint(key, value);
  else if (key == "head_dim") head_dim = parse_uint(key, value);
  else if (key == "subsequence") subsequence = parse_uint(key, value);
  else if (key == "ridge") ridge = parse_double(key, value);
  else if (key == "seed") seed = parse_uint(key, value);
  else if (key == "out") out = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "svg") svg = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ParseError(path, line_no, "expected key=value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ParseError(path, line_no, "empty key");
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  return cfg;
}

void RunConfig::apply(
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  for (const auto& [key, value] : overrides) set(key, value);
}

void RunConfig::validate() const {
  if (data != "mean-shift" && data != "elliptical" && data != "csv")
    throw ConfigError("data must be mean-shift, elliptical, or csv; got '" +
                      data + "'");
  if (data == "csv" && csv_path.empty())
    throw ConfigError("data=csv requires csv_path");
  if (dims == 0) throw ConfigError("dims must be positive");
  if (data != "csv" && length < 8) throw ConfigError("length must be >= 8");
  if (noise <= 0.0) throw ConfigError("noise must be positive");
  if (dof <= 2.0) throw ConfigError("dof must exceed 2");
  if (spread <= 0.0) throw ConfigError("spread must be positive");
  const double split_sum = split_train + split_val + split_test;
  if (split_train <= 0.0 || split_val < 0.0 || split_test <= 0.0 ||
      std::abs(split_sum - 1.0) > 1e-9)
    throw ConfigError("split fractions must be positive and sum to 1");
  if (model != "sn-ts2vec" && model != "ts2vec" && model != "sn-byol" &&
      model != "ts-byol")
    throw ConfigError(
        "model must be one of sn-ts2vec, ts2vec, sn-byol, ts-byol; got '" +
        model + "'");
  if (block != "conv" && block != "dense")
    throw ConfigError("block must be conv or dense; got '" + block + "'");
  if (depth == 0) throw ConfigError("depth must be positive");
  if (hidden_dim == 0 || code_dim == 0)
    throw ConfigError("hidden_dim and code_dim must be positive");
  if (kernel == 0 || kernel % 2 == 0)
    throw ConfigError("kernel must be odd and positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("dropout must lie in [0, 1)");
  if (cap_c <= 0.0) throw ConfigError("cap_c must be positive");
  if (window == 0) throw ConfigError("window must be positive");
  if (statistic != "cos" && statistic != "mmd")
    throw ConfigError("statistic must be cos or mmd; got '" + statistic + "'");
  if (mode != "auto" && mode != "vector" && mode != "sequence")
    throw ConfigError("mode must be auto, vector, or sequence; got '" + mode +
                      "'");
  // The MMD statistic compares distributions of per-step codes, so it needs
  // sequence-mode encodings; pooled vectors only support the cosine statistic.
  if (statistic == "mmd" && mode == "vector")
    throw ConfigError("statistic=mmd requires sequence-mode encodings");
  if (statistic == "cos" && mode == "sequence")
    throw ConfigError("statistic=cos requires vector-mode encodings");
  if (margins.empty()) throw ConfigError("margins must not be empty");
  for (std::size_t m : margins)
    if (m == 0) throw ConfigError("margins must be positive");
  if (mmd_sigma < 0.0) throw ConfigError("mmd_sigma must be non-negative");
  if (stride == 0) throw ConfigError("stride must be positive");
  if (steps == 0) throw ConfigError("steps must be positive");
  if (batch == 0) throw ConfigError("batch must be positive");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (val_every == 0) throw ConfigError("val_every must be positive");
  if (val_batches == 0) throw ConfigError("val_batches must be positive");
  if (min_overlap == 0) throw ConfigError("min_overlap must be positive");
  if (ema < 0.0 || ema > 1.0) throw ConfigError("ema must lie in [0, 1]");
  if (head_hidden == 0 || head_dim == 0)
    throw ConfigError("head_hidden and head_dim must be positive");
  if (subsequence < 2) throw ConfigError("subsequence must be at least 2");
  if (ridge < 0.0) throw ConfigError("ridge must be non-negative");
}

std::string RunConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("batch", std::to_string(batch));
  kv.emplace_back("block", block);
  kv.emplace_back("cap_c", format_double(cap_c));
  kv.emplace_back("change_count", std::to_string(change_count));
  kv.emplace_back("checkpoint", checkpoint);
  kv.emplace_back("code_dim", std::to_string(code_dim));
  kv.emplace_back("csv_path", csv_path);
  kv.emplace_back("data", data);
  kv.emplace_back("delta", format_double(delta));
  kv.emplace_back("depth", std::to_string(depth));
  kv.emplace_back("dims", std::to_string(dims));
  kv.emplace_back("dof", format_double(dof));
  kv.emplace_back("dropout", format_double(dropout));
  kv.emplace_back("ema", format_double(ema));
  kv.emplace_back("head_dim", std::to_string(head_dim));
  kv.emplace_back("head_hidden", std::to_string(head_hidden));
  kv.emplace_back("hidden_dim", std::to_string(hidden_dim));
  kv.emplace_back("kernel", std::to_string(kernel));
  kv.emplace_back("length", std::to_string(length));
  kv.emplace_back("lr", format_double(lr));
  {
    std::string joined;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      if (i) joined += ',';
      joined += std::to_string(margins[i]);
    }
    kv.emplace_back("margins", joined);
  }
  kv.emplace_back("min_overlap", std::to_string(min_overlap));
  kv.emplace_back("mmd_sigma", format_double(mmd_sigma));
  kv.emplace_back("mode", mode);
  kv.emplace_back("model", model);
  kv.emplace_back("noise", format_double(noise));
  kv.emplace_back("normalize", normalize ? "1" : "0");
  // `out` is deliberately absent: it moves artifacts without changing them.
  kv.emplace_back("ridge", format_double(ridge));
  kv.emplace_back("seed", std::to_string(seed));
  kv.emplace_back("spread", format_double(spread));
  kv.emplace_back("split_test", format_double(split_test));
  kv.emplace_back("split_train", format_double(split_train));
  kv.emplace_back("split_val", format_double(split_val));
  kv.emplace_back("statistic", statistic);
  kv.emplace_back("steps", std::to_string(steps));
  kv.emplace_back("stride", std::to_string(stride));
  kv.emplace_back("subsequence", std::to_string(subsequence));
  kv.emplace_back("svg", svg ? "1" : "0");
  kv.emplace_back("train_window", std::to_string(train_window));
  kv.emplace_back("val_batches", std::to_string(val_batches));
  kv.emplace_back("val_every", std::to_string(val_every));
  kv.emplace_back("window", std::to_string(window));
  std::string text;
  for (const auto& [key, value] : kv) {
    text += key;
    text += '=';
    text += value;
    text += '\n';
  }
  return text;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }

Objective RunConfig::objective() const {
  return model.find("byol") != std::string::npos ? Objective::Bootstrap
                                                 : Objective::Contrastive;
}

Statistic RunConfig::statistic_kind() const {
  return statistic == "mmd" ? Statistic::Mmd : Statistic::Cosine;
}

std::string RunConfig::resolved_mode() const {
  if (mode != "auto") return mode;
  return statistic == "mmd" ? "sequence" : "vector";
}

EncoderSpec RunConfig::encoder_spec(std::size_t input_dim) const {
  EncoderSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_dim = hidden_dim;
  spec.code_dim = code_dim;
  spec.spectral_norm = spectral_norm();
  spec.cap = cap_c;
  spec.blocks.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    BlockSpec& b = spec.blocks[l];
    b.kind = block == "dense" ? BlockKind::Dense : BlockKind::Conv;
    b.activation = Activation::Relu;
    b.kernel = kernel;
    b.dilation = std::size_t{1} << (l % 4);
    b.dropout = dropout;
  }
  return spec;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions opt;
  opt.objective = objective();
  opt.steps = steps;
  opt.batch = batch;
  opt.window = train_window == 0 ? 2 * window : train_window;
  opt.min_overlap = std::min(min_overlap, opt.window);
  opt.lr = lr;
  opt.seed = seed;
  opt.val_every = val_every;
  opt.val_batches = val_batches;
  opt.ema_decay = ema;
  opt.head_hidden = head_hidden;
  opt.head_dim = head_dim;
  return opt;
}

std::string RunConfig::out_root() const {
  if (!out.empty()) return out;
  if (const char* env = std::getenv("SNCPD_OUT"); env && *env) return env;
  return "out";
}

}  // namespace sncpd
