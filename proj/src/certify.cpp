#include "sncpd/certify.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sncpd/data.hpp"
#include "sncpd/rng.hpp"

namespace sncpd {

namespace {

double frobenius_dist(const Mat& a, const Mat& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double activation_lipschitz(Activation a) {
  return a == Activation::Sigmoid ? 0.25 : 1.0;
}

Mat random_sphere_rows(std::size_t rows, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat m(rows, dim);
  for (auto& v : m.values()) v = gauss(rng);
  normalize_rows_to_sphere(m);
  return m;
}

void kv_line(std::ostringstream& out, const char* key, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << key << '=' << buf << '\n';
}

void kv_line(std::ostringstream& out, const char* key, std::size_t v) {
  out << key << '=' << v << '\n';
}

void kv_line(std::ostringstream& out, const char* key, bool v) {
  out << key << '=' << (v ? 1 : 0) << '\n';
}

}  // namespace

InvertResult invert_residual_block(const EncoderModel& m, std::size_t l, const Mat& y,
                                   const InvertOptions& opt) {
  const double scale = std::max(1.0, y.frobenius_norm());
  Mat x = y;
  double residual = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    Mat gx = m.branch_values(l, x);
    Mat next(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i)
      next.values()[i] = y.values()[i] - gx.values()[i];
    residual = frobenius_dist(next, x);
    x = std::move(next);
    if (residual <= opt.tol * scale) return {std::move(x), it, residual};
  }
  throw ConvergenceError(
      "invert_residual_block: block " + std::to_string(l) + " did not converge",
      residual, opt.max_iterations);
}

InvertResult invert_hidden(const EncoderModel& m, const Mat& y,
                           const InvertOptions& opt) {
  InvertResult out;
  out.x = y;
  for (std::size_t l = m.depth(); l-- > 0;) {
    InvertResult step = invert_residual_block(m, l, out.x, opt);
    out.x = std::move(step.x);
    out.iterations += step.iterations;
    out.residual = std::max(out.residual, step.residual);
  }
  return out;
}

Mat invert_input_map(const EncoderModel& m, const Mat& h) {
  if (!m.has_input_map()) return h;
  const Tensor& w = m.input_weight();
  if (w.rows() != w.cols())
    throw ConfigError("invert_input_map: input map is not square");
  const std::size_t d = w.cols();
  if (h.cols() != w.rows()) throw DimensionError("invert_input_map: width mismatch");
  const Mat a = w.to_mat();
  const auto& b = m.input_bias().values();
  Mat x(h.rows(), d);
  for (std::size_t r = 0; r < h.rows(); ++r) {
    std::vector<double> rhs(d);
    for (std::size_t j = 0; j < d; ++j) rhs[j] = h(r, j) - b[j];
    std::vector<double> sol = lu_solve(a, std::move(rhs));
    for (std::size_t j = 0; j < d; ++j) x(r, j) = sol[j];
  }
  return x;
}

InvertResult invert_encoder(const EncoderModel& m, const Mat& y,
                            const InvertOptions& opt) {
  if (m.has_head())
    throw ConfigError("invert_encoder: exact inversion needs an identity head");
  InvertResult res = invert_hidden(m, y, opt);
  res.x = invert_input_map(m, res.x);
  return res;
}

bool CertificationReport::passed() const {
  return cap_ok && band_ok && (!kernel_checked || kernel_ok);
}

std::string CertificationReport::to_kv() const {
  std::ostringstream out;
  kv_line(out, "cap", cap);
  kv_line(out, "cap_slack", cap_slack);
  kv_line(out, "depth", depth);
  for (std::size_t i = 0; i < layer_norms.size(); ++i)
    kv_line(out, ("layer_norm." + std::to_string(i)).c_str(), layer_norms[i]);
  kv_line(out, "max_layer_norm", max_layer_norm);
  kv_line(out, "cap_ok", cap_ok);
  kv_line(out, "alpha", alpha);
  kv_line(out, "l1", l1);
  kv_line(out, "l2", l2);
  kv_line(out, "affine_smin", affine_smin);
  kv_line(out, "affine_smax", affine_smax);
  kv_line(out, "l1_total", l1_total);
  kv_line(out, "l2_total", l2_total);
  kv_line(out, "pairs", pairs);
  kv_line(out, "skipped", skipped);
  kv_line(out, "ratio_min", ratio_min);
  kv_line(out, "ratio_max", ratio_max);
  kv_line(out, "band_ok", band_ok);
  kv_line(out, "kernel_checked", kernel_checked);
  if (kernel_checked) {
    kv_line(out, "kernel_sigma", kernel_sigma);
    kv_line(out, "kernel_window", kernel_window);
    kv_line(out, "kernel_c_lower", kernel_c_lower);
    kv_line(out, "kernel_c_upper", kernel_c_upper);
    kv_line(out, "kernel_ratio_min", kernel_ratio_min);
    kv_line(out, "kernel_ratio_max", kernel_ratio_max);
    kv_line(out, "kernel_ok", kernel_ok);
  }
  kv_line(out, "passed", passed());
  return out.str();
}

CertificationReport certify_bilipschitz(const EncoderModel& m,
                                        const CertifyOptions& opt) {
  const EncoderSpec& spec = m.spec();
  CertificationReport rep;
  rep.cap = spec.cap;
  rep.cap_slack = opt.cap_slack;
  rep.depth = m.depth();

  rep.layer_norms = m.layer_norms();
  for (double n : rep.layer_norms) rep.max_layer_norm = std::max(rep.max_layer_norm, n);
  rep.cap_ok = spec.spectral_norm &&
               rep.max_layer_norm <= spec.cap * (1.0 + opt.cap_slack);

  // Residual branch Lipschitz bounds. A dense branch is tight at the weight
  // norm; for a conv branch the flattened-kernel norm understates the
  // operator norm by at most sqrt(kernel width).
  rep.alpha = 0.0;
  for (const ResidualBlock& b : m.blocks()) {
    double bound = spectral_norm(weight_matrix_view(b.weight)) *
                   activation_lipschitz(b.spec.activation);
    if (b.spec.kind == BlockKind::Conv)
      bound *= std::sqrt(static_cast<double>(b.spec.kernel));
    rep.alpha = std::max(rep.alpha, bound);
  }
  const double l = static_cast<double>(rep.depth);
  rep.l1 = std::pow(std::max(0.0, 1.0 - rep.alpha), l);
  rep.l2 = std::pow(1.0 + rep.alpha, l);

  if (m.has_input_map()) {
    const Mat a = weight_matrix_view(m.input_weight());
    rep.affine_smin *= a.rows() < a.cols() ? 0.0 : min_singular_value(a);
    rep.affine_smax *= spectral_norm(a);
  }
  if (m.has_head()) {
    const Mat a = weight_matrix_view(m.head_weight());
    rep.affine_smin *= a.rows() < a.cols() ? 0.0 : min_singular_value(a);
    rep.affine_smax *= spectral_norm(a);
  }
  rep.l1_total = rep.l1 * rep.affine_smin;
  rep.l2_total = rep.l2 * rep.affine_smax;

  Rng rng = make_rng(opt.seed, Stream::Certify);
  rep.pairs = opt.pairs;
  rep.ratio_min = std::numeric_limits<double>::infinity();
  rep.ratio_max = 0.0;
  for (std::size_t p = 0; p < opt.pairs; ++p) {
    Mat x0 = random_sphere_rows(opt.probe_rows, spec.input_dim, rng);
    Mat x1 = random_sphere_rows(opt.probe_rows, spec.input_dim, rng);
    const double dx = frobenius_dist(x0, x1);
    if (dx < 1e-12) {
      ++rep.skipped;
      continue;
    }
    const double dy = frobenius_dist(m.encode_sequence_values(x0),
                                     m.encode_sequence_values(x1));
    const double ratio = dy / dx;
    rep.ratio_min = std::min(rep.ratio_min, ratio);
    rep.ratio_max = std::max(rep.ratio_max, ratio);
  }
  if (rep.skipped == rep.pairs) {
    rep.ratio_min = rep.ratio_max = 0.0;
    rep.band_ok = false;
    return rep;
  }
  rep.band_ok = rep.ratio_min >= rep.l1_total * (1.0 - 1e-9) - 1e-12 &&
                rep.ratio_max <= rep.l2_total * (1.0 + 1e-9) + 1e-12;
  return rep;
}

void check_kernel_preservation(const EncoderModel& m, CertificationReport& rep,
                               const CertifyOptions& opt) {
  const EncoderSpec& spec = m.spec();
  const double sigma = opt.kernel_sigma;
  if (!(sigma > 0.0)) throw ConfigError("check_kernel_preservation: sigma must be positive");
  const std::size_t w = opt.probe_rows;

  rep.kernel_checked = true;
  rep.kernel_sigma = sigma;
  rep.kernel_window = w;

  // Envelope constants: windows of w unit-sphere rows differ by at most
  // 4(w-1) beyond their final rows, and the pointwise kernel never drops
  // below exp(-4 / (2 sigma^2)) on the sphere.
  const double two_sigma2 = 2.0 * sigma * sigma;
  const double k_min = std::exp(-4.0 / two_sigma2);
  const double c_w = 4.0 * static_cast<double>(w - 1);
  const double l1s = rep.l1_total * rep.l1_total;
  const double l2s = rep.l2_total * rep.l2_total;
  rep.kernel_c_lower =
      std::exp(-l2s * c_w / two_sigma2) * std::pow(k_min, std::max(l2s - 1.0, 0.0));
  rep.kernel_c_upper = std::pow(k_min, std::min(l1s - 1.0, 0.0));

  Rng rng = make_rng(opt.seed, Stream::Certify, 1);
  rep.kernel_ratio_min = std::numeric_limits<double>::infinity();
  rep.kernel_ratio_max = 0.0;
  for (std::size_t p = 0; p < opt.pairs; ++p) {
    Mat x0 = random_sphere_rows(w, spec.input_dim, rng);
    Mat x1 = random_sphere_rows(w, spec.input_dim, rng);
    const double kx = rbf_kernel(x0.row(w - 1), x1.row(w - 1), sigma);
    const Mat y0 = m.encode_sequence_values(x0);
    const Mat y1 = m.encode_sequence_values(x1);
    const double dy = frobenius_dist(y0, y1);
    const double ky = std::exp(-(dy * dy) / two_sigma2);
    const double ratio = ky / kx;
    rep.kernel_ratio_min = std::min(rep.kernel_ratio_min, ratio);
    rep.kernel_ratio_max = std::max(rep.kernel_ratio_max, ratio);
  }
  rep.kernel_ok = rep.kernel_ratio_min >= rep.kernel_c_lower * (1.0 - 1e-9) &&
                  rep.kernel_ratio_max <= rep.kernel_c_upper * (1.0 + 1e-9);
}

LrCheck lr_preservation_check(const EncoderModel& m, const Mat& x,
                              const MatrixNormalParams& null_params,
                              const MatrixNormalParams& alt_params,
                              const InvertOptions& opt) {
  LrCheck out;
  out.raw = log_likelihood_ratio(x, null_params, alt_params);
  const Mat y = m.encode_sequence_values(x);
  // The density ratio in embedding space equals the raw ratio evaluated at
  // the preimage: the Jacobian factors cancel.
  InvertResult inv = invert_encoder(m, y, opt);
  out.embedded = log_likelihood_ratio(inv.x, null_params, alt_params);
  return out;
}

}  // namespace sncpd
