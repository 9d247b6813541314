#include "sncpd/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sncpd/errors.hpp"

namespace sncpd {
namespace {

Mat slice(const Mat& x, std::size_t r0, std::size_t r1) {
  Mat out(r1 - r0, x.cols());
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i - r0, j) = x(i, j);
  return out;
}

std::vector<double> pooled_embedding(const EncoderModel* encoder, const Mat& window) {
  if (encoder) return encoder->encode_vector_values(window);
  std::vector<double> mean(window.cols(), 0.0);
  for (std::size_t i = 0; i < window.rows(); ++i)
    for (std::size_t j = 0; j < window.cols(); ++j) mean[j] += window(i, j);
  for (auto& v : mean) v /= double(window.rows());
  return mean;
}

Mat sequence_embedding(const EncoderModel* encoder, const Mat& window) {
  return encoder ? encoder->encode_sequence_values(window) : window;
}

// Rows for the bandwidth heuristic: both halves of up to eight evenly spaced
// pairs, embedded the same way the statistic embeds them.
double trace_bandwidth(const std::vector<WindowPair>& pairs, const EncoderModel* encoder,
                       const ScoreOptions& opt) {
  if (opt.mmd_sigma > 0.0) return opt.mmd_sigma;
  const std::size_t step = std::max<std::size_t>(1, pairs.size() / 8);
  std::vector<Mat> chunks;
  std::size_t rows = 0, cols = 0;
  for (std::size_t i = 0; i < pairs.size() && rows < 512; i += step) {
    Mat p = sequence_embedding(encoder, pairs[i].past);
    Mat f = sequence_embedding(encoder, pairs[i].future);
    rows += p.rows() + f.rows();
    cols = p.cols();
    chunks.push_back(std::move(p));
    chunks.push_back(std::move(f));
  }
  Mat stacked(rows, cols);
  std::size_t at = 0;
  for (const Mat& c : chunks)
    for (std::size_t i = 0; i < c.rows(); ++i, ++at)
      for (std::size_t j = 0; j < cols; ++j) stacked(at, j) = c(i, j);
  return median_heuristic_sigma(stacked, 256, opt.seed);
}

}  // namespace

std::vector<WindowPair> make_window_pairs(const Mat& x, std::size_t w,
                                          std::size_t stride) {
  if (w == 0) throw ConfigError("make_window_pairs: window must be positive");
  if (stride == 0) throw ConfigError("make_window_pairs: stride must be positive");
  if (x.rows() < 2 * w)
    throw ConfigError("make_window_pairs: series shorter than two windows");
  std::vector<WindowPair> pairs;
  for (std::size_t i = w; i + w <= x.rows(); i += stride)
    pairs.push_back({i, slice(x, i - w, i), slice(x, i, i + w)});
  return pairs;
}

std::vector<bool> DetectionTrace::alarms() const {
  if (!has_threshold()) throw ConfigError("DetectionTrace: threshold not set");
  std::vector<bool> a(statistic.size());
  for (std::size_t i = 0; i < statistic.size(); ++i) a[i] = statistic[i] > threshold;
  return a;
}

std::vector<std::size_t> DetectionTrace::alarm_indices() const {
  if (!has_threshold()) throw ConfigError("DetectionTrace: threshold not set");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < statistic.size(); ++i)
    if (statistic[i] > threshold) out.push_back(index[i]);
  return out;
}

DetectionTrace score_pairs(const std::vector<WindowPair>& pairs,
                           const EncoderModel* encoder, const ScoreOptions& opt) {
  if (pairs.empty()) throw ConfigError("score_pairs: no window pairs");
  DetectionTrace trace;
  trace.window = pairs[0].past.rows();
  trace.stride = pairs.size() > 1 ? pairs[1].index - pairs[0].index : 1;
  if (opt.statistic == Statistic::Mmd) trace.sigma = trace_bandwidth(pairs, encoder, opt);
  for (const WindowPair& p : pairs) {
    trace.index.push_back(p.index);
    if (opt.statistic == Statistic::Cosine) {
      const auto a = pooled_embedding(encoder, p.past);
      const auto b = pooled_embedding(encoder, p.future);
      trace.statistic.push_back(cosine_distance(a, b));
    } else {
      const Mat a = sequence_embedding(encoder, p.past);
      const Mat b = sequence_embedding(encoder, p.future);
      trace.statistic.push_back(mmd_biased(a, b, trace.sigma));
    }
  }
  return trace;
}

F1Report margin_f1(const std::vector<std::size_t>& alarms,
                   const std::vector<std::size_t>& change_points, std::size_t margin,
                   std::size_t run_gap) {
  if (margin == 0) throw ConfigError("margin_f1: margin must be positive");
  if (run_gap == 0) throw ConfigError("margin_f1: run_gap must be positive");
  if (!std::is_sorted(alarms.begin(), alarms.end()))
    throw ConfigError("margin_f1: alarms must be sorted");

  F1Report rep;
  rep.margin = margin;
  std::vector<char> detected(change_points.size(), 0);
  for (std::size_t k = 0; k < change_points.size(); ++k) {
    const std::size_t cp = change_points[k];
    for (std::size_t a : alarms)
      if (a + margin >= cp && a <= cp + margin) {
        detected[k] = 1;
        break;
      }
    if (detected[k])
      ++rep.true_positives;
    else
      ++rep.false_negatives;
  }
  // Alarms within twice the margin of a detected change point belong to that
  // detection (so duplicating an alarm next to a matched one never changes
  // the report); the remaining alarms collapse into runs of consecutive
  // indices, each run costing one false positive.
  auto near_detection = [&](std::size_t a) {
    for (std::size_t k = 0; k < change_points.size(); ++k)
      if (detected[k] && a + 2 * margin >= change_points[k] &&
          a <= change_points[k] + 2 * margin)
        return true;
    return false;
  };
  bool in_run = false;
  std::size_t prev = 0;
  for (std::size_t a : alarms) {
    if (near_detection(a)) {
      in_run = false;
      continue;
    }
    if (!in_run || a > prev + run_gap) ++rep.false_positives;
    in_run = true;
    prev = a;
  }

  const std::size_t tp = rep.true_positives;
  rep.precision = tp + rep.false_positives ? double(tp) / double(tp + rep.false_positives) : 0.0;
  rep.recall = tp + rep.false_negatives ? double(tp) / double(tp + rep.false_negatives) : 0.0;
  rep.f1 = rep.precision + rep.recall > 0.0
               ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
               : 0.0;
  return rep;
}

SweepResult threshold_sweep(const DetectionTrace& trace,
                            const std::vector<std::size_t>& change_points,
                            std::size_t margin) {
  if (trace.statistic.empty()) throw ConfigError("threshold_sweep: empty trace");
  if (change_points.empty())
    throw ConfigError("threshold_sweep: no validation change points");

  std::vector<double> values = trace.statistic;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  auto alarms_above = [&](double delta) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < trace.statistic.size(); ++i)
      if (trace.statistic[i] > delta) out.push_back(trace.index[i]);
    return out;
  };

  SweepResult best;
  bool have = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const F1Report rep = margin_f1(alarms_above(values[i]), change_points, margin,
                                   trace.stride);
    const bool last = i + 1 == values.size();
    const double delta = last ? values[i] + 1.0 : 0.5 * (values[i] + values[i + 1]);
    // Candidates ascend, so on ties the smallest maximizing midpoint wins:
    // the most sensitive threshold that is still optimal on validation, which
    // carries to colder test traces better than any higher tie.
    if (!have || rep.f1 > best.report.f1) {
      best.report = rep;
      best.threshold = delta;
      have = true;
    }
  }
  best.candidates = values.size();
  return best;
}

DynamicsCurve dynamics_experiment(const EncoderModel& model, const Mat& series,
                                  const std::vector<std::size_t>& change_points,
                                  const DynamicsOptions& opt) {
  const std::size_t len = opt.subsequence, half = len / 2, w = opt.window;
  if (w == 0 || w > half)
    throw ConfigError("dynamics_experiment: window must be in [1, subsequence/2]");
  DynamicsCurve curve;
  curve.offsets.resize(len - w + 1);
  std::iota(curve.offsets.begin(), curve.offsets.end(), 0u);
  curve.similarity.assign(curve.offsets.size(), 0.0);

  for (std::size_t cp : change_points) {
    if (cp < len || cp + half > series.rows()) {
      ++curve.skipped;
      continue;
    }
    // Stretch before the change point; copy with the second half replaced by
    // the stretch right after it.
    Mat original = slice(series, cp - len, cp);
    Mat spliced = original;
    for (std::size_t i = 0; i < half; ++i)
      for (std::size_t j = 0; j < series.cols(); ++j)
        spliced(half + i, j) = series(cp + i, j);
    for (std::size_t off = 0; off + w <= len; ++off) {
      const auto a = model.encode_vector_values(slice(original, off, off + w));
      const auto b = model.encode_vector_values(slice(spliced, off, off + w));
      curve.similarity[off] += 1.0 - cosine_distance(a, b);
    }
    ++curve.used;
  }
  if (curve.used == 0) throw ConfigError("dynamics_experiment: no usable change points");
  for (auto& s : curve.similarity) s /= double(curve.used);
  return curve;
}

GaussianFit fit_gaussian(const Mat& rows) {
  if (rows.rows() < 2) throw ConfigError("fit_gaussian: need at least two rows");
  GaussianFit fit;
  const std::size_t n = rows.rows(), d = rows.cols();
  fit.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) fit.mean[j] += rows(i, j);
  for (auto& v : fit.mean) v /= double(n);
  fit.cov = Mat(d, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double da = rows(i, a) - fit.mean[a];
      for (std::size_t b = 0; b <= a; ++b)
        fit.cov(a, b) += da * (rows(i, b) - fit.mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      fit.cov(a, b) /= double(n - 1);
      fit.cov(b, a) = fit.cov(a, b);
    }
  return fit;
}

std::vector<double> mahalanobis_scores(const Mat& rows, const GaussianFit& fit,
                                       double ridge) {
  std::vector<double> out(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i)
    out[i] = mahalanobis2(rows.row(i), fit.mean, fit.cov, ridge);
  return out;
}

RejectionCurve rejection_curve(const EncoderModel& model, const Mat& reference,
                               const Mat& test,
                               const std::vector<std::size_t>& test_change_points,
                               const RejectionOptions& opt) {
  const std::size_t w = opt.window;
  auto pairs = make_window_pairs(test, w, 1);
  if (pairs.size() < 20) throw ConfigError("rejection_curve: need at least 20 pairs");

  ScoreOptions score_opt;
  score_opt.statistic = opt.statistic;
  score_opt.seed = opt.seed;
  DetectionTrace trace = score_pairs(pairs, &model, score_opt);
  SweepResult sweep = threshold_sweep(trace, test_change_points, opt.margin);

  // Reference distribution of pooled full-pair embeddings.
  const std::size_t stride = opt.reference_stride ? opt.reference_stride
                                                  : std::max<std::size_t>(1, w / 5);
  if (reference.rows() < 2 * w)
    throw ConfigError("rejection_curve: reference shorter than two windows");
  std::vector<std::vector<double>> ref_rows;
  for (std::size_t i = 0; i + 2 * w <= reference.rows(); i += stride)
    ref_rows.push_back(model.encode_vector_values(slice(reference, i, i + 2 * w)));
  Mat ref(ref_rows.size(), ref_rows.empty() ? 0 : ref_rows[0].size());
  for (std::size_t i = 0; i < ref_rows.size(); ++i)
    for (std::size_t j = 0; j < ref.cols(); ++j) ref(i, j) = ref_rows[i][j];
  GaussianFit fit = fit_gaussian(ref);

  Mat pair_emb(pairs.size(), ref.cols());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto e = model.encode_vector_values(
        slice(test, pairs[i].index - w, pairs[i].index + w));
    for (std::size_t j = 0; j < pair_emb.cols(); ++j) pair_emb(i, j) = e[j];
  }
  const std::vector<double> distance = mahalanobis_scores(pair_emb, fit, opt.ridge);

  // Order of removal: largest distance first, index breaks ties.
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distance[a] != distance[b] ? distance[a] < distance[b] : a < b;
  });

  RejectionCurve curve;
  curve.threshold = sweep.threshold;
  auto f1_of_first = [&](std::size_t kept) {
    std::vector<std::size_t> alarms;
    for (std::size_t r = 0; r < kept; ++r) {
      const std::size_t i = order[r];
      if (trace.statistic[i] > curve.threshold) alarms.push_back(trace.index[i]);
    }
    std::sort(alarms.begin(), alarms.end());
    return margin_f1(alarms, test_change_points, opt.margin, trace.stride).f1;
  };

  const std::size_t n0 = pairs.size();
  curve.baseline_f1 = f1_of_first(n0);
  const std::size_t steps =
      std::size_t(std::ceil(std::log(0.05) / std::log(0.95)));  // 59
  std::size_t kept = n0;
  for (std::size_t k = 0; k < steps && kept > 1; ++k) {
    kept = std::min(std::size_t(std::ceil(0.95 * double(kept))), kept - 1);
    curve.points.push_back({double(kept) / double(n0), kept, f1_of_first(kept)});
  }
  return curve;
}

SampleGenerator gaussian_generator(std::vector<double> mean, double sd) {
  if (mean.empty()) throw ConfigError("gaussian_generator: empty mean");
  if (sd <= 0.0) throw ConfigError("gaussian_generator: sd must be positive");
  return [mean = std::move(mean), sd](std::size_t n, Rng& rng) {
    std::normal_distribution<double> d(0.0, sd);
    Mat out(n, mean.size());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < mean.size(); ++j) out(i, j) = mean[j] + d(rng);
    return out;
  };
}

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

}  // namespace

PowerResult mmd_power_experiment(const SampleGenerator& p_inf, const SampleGenerator& p0,
                                 const EncoderModel* encoder, const PowerOptions& opt) {
  if (opt.sizes.empty() || opt.trials == 0)
    throw ConfigError("mmd_power_experiment: empty schedule");
  if (opt.alpha <= 0.0 || opt.alpha >= 1.0)
    throw ConfigError("mmd_power_experiment: alpha outside (0, 1)");

  PowerResult res;
  res.clamp = 0.5 / double(opt.trials);

  auto reject = [&](const Mat& x, const Mat& y, double thr, std::uint64_t salt) {
    const double sigma =
        opt.sigma > 0.0 ? opt.sigma : [&] {
          Mat pooled(x.rows() + y.rows(), x.cols());
          for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) pooled(i, j) = x(i, j);
          for (std::size_t i = 0; i < y.rows(); ++i)
            for (std::size_t j = 0; j < y.cols(); ++j)
              pooled(x.rows() + i, j) = y(i, j);
          return median_heuristic_sigma(pooled, 256, salt);
        }();
    return mmd_biased(x, y, sigma) > thr;
  };

  for (std::size_t si = 0; si < opt.sizes.size(); ++si) {
    const std::size_t n = opt.sizes[si];
    const double thr = mmd_threshold(n, 1.0, opt.alpha);
    PowerRow row;
    row.n = n;
    std::size_t alt_rej_raw = 0, alt_rej_emb = 0, null_rej_raw = 0, null_rej_emb = 0;
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const std::uint64_t salt = si * 1000003ull + t;
      Rng rng = make_rng(opt.seed, Stream::Experiment, salt);
      const Mat x = p_inf(n, rng), y = p0(n, rng);
      const Mat xn = p_inf(n, rng), yn = p_inf(n, rng);
      alt_rej_raw += reject(x, y, thr, salt);
      null_rej_raw += reject(xn, yn, thr, salt);
      if (encoder) {
        alt_rej_emb += reject(encoder->encode_sequence_values(x),
                              encoder->encode_sequence_values(y), thr, salt);
        null_rej_emb += reject(encoder->encode_sequence_values(xn),
                               encoder->encode_sequence_values(yn), thr, salt);
      }
    }
    row.type2_raw = 1.0 - double(alt_rej_raw) / double(opt.trials);
    row.null_reject_raw = double(null_rej_raw) / double(opt.trials);
    if (encoder) {
      row.type2_embedded = 1.0 - double(alt_rej_emb) / double(opt.trials);
      row.null_reject_embedded = double(null_rej_emb) / double(opt.trials);
    }
    res.rows.push_back(row);
  }

  std::vector<double> lx, lraw, lemb;
  for (const PowerRow& r : res.rows) {
    lx.push_back(std::log(double(r.n)));
    lraw.push_back(std::log(std::max(r.type2_raw, res.clamp)));
    lemb.push_back(std::log(std::max(r.type2_embedded, res.clamp)));
  }
  res.slope_raw = fit_slope(lx, lraw);
  if (encoder) res.slope_embedded = fit_slope(lx, lemb);
  return res;
}

}  // namespace sncpd
