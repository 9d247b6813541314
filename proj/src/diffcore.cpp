#include "sncpd/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace sncpd {

namespace {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": operand shapes differ");
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + std::to_string(a.rank()));
}

bool track(const Tape& tape, std::initializer_list<const Tensor*> ins) {
  if (!tape.recording()) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

template <class F, class D>
Tensor unary_ew(Tape& tape, const Tensor& a, const char* /*name*/, F f, D dlocal) {
  std::vector<double> out_v(a.size());
  const auto& x = a.values();
  for (std::size_t i = 0; i < x.size(); ++i) out_v[i] = f(x[i]);
  Tensor out(a.shape(), std::move(out_v));
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov, dlocal]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      const auto& x = av.values();
      const auto& y = ov.values();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += dlocal(x[i], y[i]) * go[i];
    });
  }
  return out;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> value, bool requires_grad)
    : rec_(std::make_shared<detail::TensorRec>()) {
  if (shape_size(shape) != value.size())
    throw DimensionError("Tensor: shape does not match value size");
  rec_->shape = std::move(shape);
  rec_->value = std::move(value);
  rec_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_size(shape), 0.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::from_mat(const Mat& m, bool requires_grad) {
  return Tensor({m.rows(), m.cols()}, m.values(), requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows: tensor is not rank 2");
  return rec_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols: tensor is not rank 2");
  return rec_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item: tensor is not a scalar");
  return rec_->value[0];
}

std::vector<double>& Tensor::grad() {
  if (rec_->grad.empty()) rec_->grad.assign(rec_->value.size(), 0.0);
  return rec_->grad;
}

void Tensor::zero_grad() {
  std::fill(rec_->grad.begin(), rec_->grad.end(), 0.0);
}

Mat Tensor::to_mat() const {
  if (rank() == 1) {
    Mat m(1, size());
    std::copy(values().begin(), values().end(), m.data());
    return m;
  }
  if (rank() != 2) throw DimensionError("to_mat: tensor rank above 2");
  Mat m(rows(), cols());
  std::copy(values().begin(), values().end(), m.data());
  return m;
}

void Tape::push(std::function<void()> backward_step) {
  nodes_.push_back(std::move(backward_step));
}

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1) throw DimensionError("backward: loss must be scalar");
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
  Tensor out(a.shape(), std::move(v));
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor av = a, bv = b, ov = out;
    tape.push([av, bv, ov]() mutable {
      const auto& go = ov.grad();
      if (av.requires_grad()) {
        auto& ga = av.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (bv.requires_grad()) {
        auto& gb = bv.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] - b.values()[i];
  Tensor out(a.shape(), std::move(v));
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor av = a, bv = b, ov = out;
    tape.push([av, bv, ov]() mutable {
      const auto& go = ov.grad();
      if (av.requires_grad()) {
        auto& ga = av.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (bv.requires_grad()) {
        auto& gb = bv.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
  Tensor out(a.shape(), std::move(v));
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor av = a, bv = b, ov = out;
    tape.push([av, bv, ov]() mutable {
      const auto& go = ov.grad();
      if (av.requires_grad()) {
        auto& ga = av.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += bv.values()[i] * go[i];
      }
      if (bv.requires_grad()) {
        auto& gb = bv.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += av.values()[i] * go[i];
      }
    });
  }
  return out;
}

Tensor divide(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "divide");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] / b.values()[i];
  Tensor out(a.shape(), std::move(v));
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor av = a, bv = b, ov = out;
    tape.push([av, bv, ov]() mutable {
      const auto& go = ov.grad();
      if (av.requires_grad()) {
        auto& ga = av.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / bv.values()[i];
      }
      if (bv.requires_grad()) {
        auto& gb = bv.grad();
        for (std::size_t i = 0; i < go.size(); ++i) {
          const double bi = bv.values()[i];
          gb[i] -= av.values()[i] / (bi * bi) * go[i];
        }
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double s) {
  return unary_ew(tape, a, "scale", [s](double x) { return s * x; },
                  [s](double, double) { return s; });
}

Tensor add_scalar(Tape& tape, const Tensor& a, double s) {
  return unary_ew(tape, a, "add_scalar", [s](double x) { return x + s; },
                  [](double, double) { return 1.0; });
}

Tensor neg(Tape& tape, const Tensor& a) { return scale(tape, a, -1.0); }

Tensor exp_t(Tape& tape, const Tensor& a) {
  return unary_ew(tape, a, "exp", [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log_t(Tape& tape, const Tensor& a) {
  return unary_ew(tape, a, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_t(Tape& tape, const Tensor& a) {
  return unary_ew(tape, a, "sqrt", [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary_ew(tape, a, "sigmoid",
                  [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(Tape& tape, const Tensor& a) {
  return unary_ew(tape, a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor dropout(Tape& tape, const Tensor& a, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.size());
  for (auto& m : mask) m = keep(rng) ? inv : 0.0;
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * mask[i];
  Tensor out(a.shape(), std::move(v));
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov, mask = std::move(mask)]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += mask[i] * go[i];
    });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw DimensionError("matmul: inner dimensions differ");
  std::vector<double> v(m * n, 0.0);
  const auto& av_ = a.values();
  const auto& bv_ = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av_[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) v[i * n + j] += aip * bv_[p * n + j];
    }
  Tensor out({m, n}, std::move(v));
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor at = a, bt = b, ot = out;
    tape.push([at, bt, ot, m, k, n]() mutable {
      const auto& go = ot.grad();
      const auto& av = at.values();
      const auto& bv = bt.values();
      if (at.requires_grad()) {
        auto& ga = at.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = go[i * n + j];
            if (g == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g * bv[p * n + j];
          }
      }
      if (bt.requires_grad()) {
        auto& gb = bt.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * go[i * n + j];
          }
      }
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = a.values()[i * c + j];
  Tensor out({c, r}, std::move(v));
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov, r, c]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw DimensionError("reshape: element count changes");
  Tensor out(std::move(shape), a.values());
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
    });
  }
  return out;
}

Tensor add_rowvec(Tape& tape, const Tensor& m, const Tensor& v) {
  require_rank(m, 2, "add_rowvec");
  require_rank(v, 1, "add_rowvec");
  const std::size_t r = m.rows(), c = m.cols();
  if (v.size() != c) throw DimensionError("add_rowvec: vector length differs from columns");
  std::vector<double> out_v(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out_v[i * c + j] = m.values()[i * c + j] + v.values()[j];
  Tensor out({r, c}, std::move(out_v));
  if (track(tape, {&m, &v})) {
    out.set_requires_grad(true);
    Tensor mt = m, vt = v, ot = out;
    tape.push([mt, vt, ot, r, c]() mutable {
      const auto& go = ot.grad();
      if (mt.requires_grad()) {
        auto& gm = mt.grad();
        for (std::size_t i = 0; i < r * c; ++i) gm[i] += go[i];
      }
      if (vt.requires_grad()) {
        auto& gv = vt.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gv[j] += go[i * c + j];
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  Tensor out({1}, {s});
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov]() mutable {
      auto& ga = av.grad();
      const double g = ov.grad()[0];
      for (auto& x : ga) x += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean: empty tensor");
  Tensor s = sum(tape, a);
  return scale(tape, s, 1.0 / static_cast<double>(a.size()));
}

Tensor rows_dot(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "rows_dot");
  require_same_shape(a, b, "rows_dot");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> v(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[i] += a.values()[i * c + j] * b.values()[i * c + j];
  Tensor out({r}, std::move(v));
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor at = a, bt = b, ot = out;
    tape.push([at, bt, ot, r, c]() mutable {
      const auto& go = ot.grad();
      if (at.requires_grad()) {
        auto& ga = at.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[i] * bt.values()[i * c + j];
      }
      if (bt.requires_grad()) {
        auto& gb = bt.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[i * c + j] += go[i] * at.values()[i * c + j];
      }
    });
  }
  return out;
}

Tensor slice_rows(Tape& tape, const Tensor& a, std::size_t r0, std::size_t r1) {
  require_rank(a, 2, "slice_rows");
  if (r0 > r1 || r1 > a.rows()) throw DimensionError("slice_rows: range out of bounds");
  const std::size_t c = a.cols(), n = r1 - r0;
  std::vector<double> v(a.values().begin() + r0 * c, a.values().begin() + r1 * c);
  Tensor out({n, c}, std::move(v));
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov, r0, c, n]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      for (std::size_t i = 0; i < n * c; ++i) ga[r0 * c + i] += go[i];
    });
  }
  return out;
}

Tensor concat_rows(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.cols() != c) throw DimensionError("concat_rows: column counts differ");
    total += p.rows();
  }
  std::vector<double> v;
  v.reserve(total * c);
  for (const Tensor& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
  Tensor out({total, c}, std::move(v));
  bool rec = false;
  for (const Tensor& p : parts)
    if (tape.recording() && p.requires_grad()) rec = true;
  if (rec) {
    out.set_requires_grad(true);
    std::vector<Tensor> ps(parts.begin(), parts.end());
    Tensor ov = out;
    tape.push([ps = std::move(ps), ov, c]() mutable {
      const auto& go = ov.grad();
      std::size_t off = 0;
      for (Tensor& p : ps) {
        const std::size_t n = p.rows() * c;
        if (p.requires_grad()) {
          auto& gp = p.grad();
          for (std::size_t i = 0; i < n; ++i) gp[i] += go[off + i];
        }
        off += n;
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.rows() != r) throw DimensionError("concat_cols: row counts differ");
    total += p.cols();
  }
  std::vector<double> v(r * total);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) v[i * total + off + j] = p.values()[i * c + j];
    off += c;
  }
  Tensor out({r, total}, std::move(v));
  bool rec = false;
  for (const Tensor& p : parts)
    if (tape.recording() && p.requires_grad()) rec = true;
  if (rec) {
    out.set_requires_grad(true);
    std::vector<Tensor> ps(parts.begin(), parts.end());
    Tensor ov = out;
    tape.push([ps = std::move(ps), ov, r, total]() mutable {
      const auto& go = ov.grad();
      std::size_t off = 0;
      for (Tensor& p : ps) {
        const std::size_t c = p.cols();
        if (p.requires_grad()) {
          auto& gp = p.grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += go[i * total + off + j];
        }
        off += c;
      }
    });
  }
  return out;
}

Tensor mean_rows(Tape& tape, const Tensor& a) {
  require_rank(a, 2, "mean_rows");
  const std::size_t r = a.rows(), c = a.cols();
  if (r == 0) throw DimensionError("mean_rows: no rows");
  std::vector<double> v(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j] += a.values()[i * c + j];
  for (auto& x : v) x /= static_cast<double>(r);
  Tensor out({c}, std::move(v));
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov, r, c]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      const double inv = 1.0 / static_cast<double>(r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j] * inv;
    });
  }
  return out;
}

Tensor max_pool_time(Tape& tape, const Tensor& a, std::size_t width) {
  require_rank(a, 2, "max_pool_time");
  if (width == 0) throw DimensionError("max_pool_time: zero width");
  const std::size_t r = a.rows(), c = a.cols(), n = r / width;
  if (n == 0) throw DimensionError("max_pool_time: fewer rows than pool width");
  std::vector<double> v(n * c);
  std::vector<std::size_t> arg(n * c);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = p * width;
      double bv = a.values()[best * c + j];
      for (std::size_t q = 1; q < width; ++q) {
        const std::size_t row = p * width + q;
        const double x = a.values()[row * c + j];
        if (x > bv) {
          bv = x;
          best = row;
        }
      }
      v[p * c + j] = bv;
      arg[p * c + j] = best;
    }
  Tensor out({n, c}, std::move(v));
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov, arg = std::move(arg), n, c]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      for (std::size_t p = 0; p < n; ++p)
        for (std::size_t j = 0; j < c; ++j) ga[arg[p * c + j] * c + j] += go[p * c + j];
    });
  }
  return out;
}

Tensor l2_normalize(Tape& tape, const Tensor& a) {
  double n2 = 0.0;
  for (double x : a.values()) n2 += x * x;
  const double n = std::sqrt(n2);
  if (n < 1e-12) {
    warn("l2_normalize: zero vector left unnormalized");
    return a;
  }
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] / n;
  Tensor out(a.shape(), std::move(v));
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov, n]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      const auto& y = ov.values();
      double ydotg = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) ydotg += y[i] * go[i];
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += (go[i] - y[i] * ydotg) / n;
    });
  }
  return out;
}

Tensor l2_normalize_rows(Tape& tape, const Tensor& a) {
  require_rank(a, 2, "l2_normalize_rows");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> norms(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double x = a.values()[i * c + j];
      s += x * x;
    }
    norms[i] = std::sqrt(s);
  }
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    if (norms[i] < 1e-12) {
      warn("l2_normalize_rows: zero row left unnormalized");
      norms[i] = 1.0;
    }
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = a.values()[i * c + j] / norms[i];
  }
  Tensor out({r, c}, std::move(v));
  if (track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    tape.push([av, ov, norms = std::move(norms), r, c]() mutable {
      auto& ga = av.grad();
      const auto& go = ov.grad();
      const auto& y = ov.values();
      for (std::size_t i = 0; i < r; ++i) {
        double ydotg = 0.0;
        for (std::size_t j = 0; j < c; ++j) ydotg += y[i * c + j] * go[i * c + j];
        for (std::size_t j = 0; j < c; ++j)
          ga[i * c + j] += (go[i * c + j] - y[i * c + j] * ydotg) / norms[i];
      }
    });
  }
  return out;
}

Tensor logsumexp_rows_masked(Tape& tape, const Tensor& m, const Mat& mask) {
  require_rank(m, 2, "logsumexp_rows_masked");
  const std::size_t r = m.rows(), c = m.cols();
  if (mask.rows() != r || mask.cols() != c)
    throw DimensionError("logsumexp_rows_masked: mask shape differs");
  std::vector<double> v(r);
  for (std::size_t i = 0; i < r; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < c; ++j)
      if (mask(i, j) != 0.0) {
        any = true;
        hi = std::max(hi, m.values()[i * c + j]);
      }
    if (!any) throw DimensionError("logsumexp_rows_masked: empty mask row " + std::to_string(i));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      if (mask(i, j) != 0.0) s += std::exp(m.values()[i * c + j] - hi);
    v[i] = hi + std::log(s);
  }
  Tensor out({r}, std::move(v));
  if (track(tape, {&m})) {
    out.set_requires_grad(true);
    Tensor mt = m, ov = out;
    tape.push([mt, ov, mask, r, c]() mutable {
      auto& gm = mt.grad();
      const auto& go = ov.grad();
      const auto& y = ov.values();
      for (std::size_t i = 0; i < r; ++i) {
        if (go[i] == 0.0) continue;
        for (std::size_t j = 0; j < c; ++j)
          if (mask(i, j) != 0.0)
            gm[i * c + j] += go[i] * std::exp(mt.values()[i * c + j] - y[i]);
      }
    });
  }
  return out;
}

Tensor diag_part(Tape& tape, const Tensor& m) {
  require_rank(m, 2, "diag_part");
  if (m.rows() != m.cols()) throw DimensionError("diag_part: matrix not square");
  const std::size_t n = m.rows();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = m.values()[i * n + i];
  Tensor out({n}, std::move(v));
  if (track(tape, {&m})) {
    out.set_requires_grad(true);
    Tensor mt = m, ov = out;
    tape.push([mt, ov, n]() mutable {
      auto& gm = mt.grad();
      const auto& go = ov.grad();
      for (std::size_t i = 0; i < n; ++i) gm[i * n + i] += go[i];
    });
  }
  return out;
}

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, std::size_t dilation) {
  require_rank(x, 2, "conv1d");
  if (kernel.rank() != 3) throw DimensionError("conv1d: kernel must be rank 3");
  if (dilation == 0) throw DimensionError("conv1d: zero dilation");
  const std::size_t t = x.rows(), ci = x.cols();
  const std::size_t co = kernel.shape()[0], kci = kernel.shape()[1], kw = kernel.shape()[2];
  if (kci != ci) throw DimensionError("conv1d: kernel input channels differ from input");
  const std::size_t pad = ((kw - 1) * dilation) / 2;
  std::vector<double> v(t * co, 0.0);
  const auto& xv = x.values();
  const auto& kv = kernel.values();
  for (std::size_t tau = 0; tau < t; ++tau)
    for (std::size_t j = 0; j < kw; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(tau + j * dilation) -
                                 static_cast<std::ptrdiff_t>(pad);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
      for (std::size_t o = 0; o < co; ++o) {
        double s = 0.0;
        for (std::size_t c = 0; c < ci; ++c)
          s += xv[static_cast<std::size_t>(src) * ci + c] * kv[(o * ci + c) * kw + j];
        v[tau * co + o] += s;
      }
    }
  Tensor out({t, co}, std::move(v));
  if (track(tape, {&x, &kernel})) {
    out.set_requires_grad(true);
    Tensor xt = x, kt = kernel, ot = out;
    tape.push([xt, kt, ot, t, ci, co, kw, dilation, pad]() mutable {
      const auto& go = ot.grad();
      const auto& xv = xt.values();
      const auto& kv = kt.values();
      for (std::size_t tau = 0; tau < t; ++tau)
        for (std::size_t j = 0; j < kw; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(tau + j * dilation) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
          const std::size_t s = static_cast<std::size_t>(src);
          for (std::size_t o = 0; o < co; ++o) {
            const double g = go[tau * co + o];
            if (g == 0.0) continue;
            if (xt.requires_grad()) {
              auto& gx = xt.grad();
              for (std::size_t c = 0; c < ci; ++c)
                gx[s * ci + c] += g * kv[(o * ci + c) * kw + j];
            }
            if (kt.requires_grad()) {
              auto& gk = kt.grad();
              for (std::size_t c = 0; c < ci; ++c)
                gk[(o * ci + c) * kw + j] += g * xv[s * ci + c];
            }
          }
        }
    });
  }
  return out;
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

void sgd_step(std::span<Tensor> params, double lr) {
  for (Tensor& p : params) {
    if (!p.has_grad()) continue;
    auto& v = p.values();
    const auto& g = p.rec()->grad;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  }
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw DimensionError("adam_step: state does not match parameter list");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto& val = p.values();
    const std::vector<double>* g = p.has_grad() ? &p.rec()->grad : nullptr;
    for (std::size_t j = 0; j < val.size(); ++j) {
      const double gj = g ? (*g)[j] : 0.0;
      state.m[i][j] = beta1 * state.m[i][j] + (1.0 - beta1) * gj;
      state.v[i][j] = beta2 * state.v[i][j] + (1.0 - beta2) * gj * gj;
      const double mh = state.m[i][j] / bc1;
      const double vh = state.v[i][j] / bc2;
      val[j] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

}  // namespace sncpd
