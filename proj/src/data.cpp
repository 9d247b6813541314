#include "sncpd/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sncpd/errors.hpp"
#include "sncpd/rng.hpp"

namespace sncpd {

void TimeSeries::validate() const {
  if (length() == 0 || dim() == 0) throw ConfigError("series: empty");
  if (!values.all_finite()) throw ConfigError("series: non-finite values");
  std::size_t prev = 0;
  for (std::size_t cp : change_points) {
    if (cp == 0 || cp >= length())
      throw ConfigError("series: change point " + std::to_string(cp) +
                        " outside (0, " + std::to_string(length()) + ")");
    if (cp <= prev && prev != 0)
      throw ConfigError("series: change points not strictly increasing");
    prev = cp;
  }
}

std::vector<std::size_t> evenly_spaced_change_points(std::size_t length,
                                                     std::size_t count) {
  std::vector<std::size_t> cps;
  cps.reserve(count);
  for (std::size_t j = 0; j < count; ++j)
    cps.push_back(length * (j + 1) / (count + 1));
  return cps;
}

TimeSeries make_mean_shift_series(std::size_t dim, std::size_t length,
                                  std::vector<std::size_t> change_points,
                                  double delta, double noise_std,
                                  std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::Data);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TimeSeries s;
  s.values = Mat(length, dim);
  s.change_points = std::move(change_points);
  s.name = "mean_shift";

  std::vector<double> mu(dim, 0.0);
  std::size_t next_cp = 0;
  for (std::size_t t = 0; t < length; ++t) {
    if (next_cp < s.change_points.size() && t == s.change_points[next_cp]) {
      std::vector<double> dir(dim);
      double n = 0.0;
      for (auto& x : dir) {
        x = gauss(rng);
        n += x * x;
      }
      n = std::sqrt(n);
      for (std::size_t j = 0; j < dim; ++j) mu[j] += delta * dir[j] / n;
      ++next_cp;
    }
    for (std::size_t j = 0; j < dim; ++j)
      s.values(t, j) = mu[j] + noise_std * gauss(rng);
  }
  s.validate();
  return s;
}

TimeSeries make_elliptical_series(std::size_t dim, std::size_t length,
                                  std::vector<std::size_t> change_points,
                                  double spread, double dof, std::uint64_t seed) {
  if (!(dof > 2.0)) throw ConfigError("elliptical series: dof must exceed 2");
  Rng rng = make_rng(seed, Stream::Data, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(dof);

  TimeSeries s;
  s.values = Mat(length, dim);
  s.change_points = std::move(change_points);
  s.name = "elliptical";

  Mat mix(dim, dim);
  auto resample_mix = [&](double scale) {
    for (auto& v : mix.values()) v = scale * gauss(rng) / std::sqrt(static_cast<double>(dim));
    for (std::size_t i = 0; i < dim; ++i) mix(i, i) += 0.3 * scale;
  };
  resample_mix(1.0);

  std::size_t next_cp = 0, segment = 0;
  std::vector<double> z(dim);
  for (std::size_t t = 0; t < length; ++t) {
    if (next_cp < s.change_points.size() && t == s.change_points[next_cp]) {
      ++segment;
      ++next_cp;
      resample_mix(segment % 2 == 1 ? spread : 1.0);
    }
    for (auto& x : z) x = gauss(rng);
    const double mult = std::sqrt(dof / chi2(rng));
    std::vector<double> row = matvec(mix, z);
    for (std::size_t j = 0; j < dim; ++j) s.values(t, j) = mult * row[j];
  }
  s.validate();
  return s;
}

void normalize_rows_to_sphere(Mat& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    const double n = norm2(r);
    if (n < 1e-12) {
      warn("normalize_rows_to_sphere: zero row " + std::to_string(i));
      continue;
    }
    for (auto& v : r) v /= n;
  }
}

SplitSeries split_series(const TimeSeries& s, const SplitSpec& spec) {
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
    throw ConfigError("split: fractions must sum to 1");
  if (spec.train <= 0.0 || spec.val < 0.0 || spec.test < 0.0)
    throw ConfigError("split: negative fraction");
  const std::size_t t = s.length();
  const std::size_t n_train = static_cast<std::size_t>(spec.train * t);
  const std::size_t n_val = static_cast<std::size_t>(spec.val * t);
  const std::size_t n_test = t - n_train - n_val;
  if (n_train == 0 || (spec.val > 0 && n_val == 0) || (spec.test > 0 && n_test == 0))
    throw ConfigError("split: a requested segment came out empty");

  auto cut = [&](std::size_t begin, std::size_t count, const char* tag) {
    TimeSeries part;
    part.values = Mat(count, s.dim());
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < s.dim(); ++j) part.values(i, j) = s.values(begin + i, j);
    for (std::size_t cp : s.change_points) {
      if (cp <= begin || cp >= begin + count) {
        if (cp == begin && cp != 0)
          warn("split: change point " + std::to_string(cp) + " lies on the " +
               tag + " boundary and was dropped");
        continue;
      }
      part.change_points.push_back(cp - begin);
    }
    part.name = s.name.empty() ? tag : s.name + ":" + tag;
    return part;
  };

  SplitSeries out;
  out.train = cut(0, n_train, "train");
  out.val = cut(n_train, n_val, "val");
  out.test = cut(n_train + n_val, n_test, "test");
  return out;
}

TimeSeries load_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> cols;
  std::stringstream hs(line);
  std::string field;
  while (std::getline(hs, field, ',')) cols.push_back(field);
  if (cols.empty() || cols[0] != "timestamp")
    throw ParseError(path, 1, "header must start with 'timestamp'");
  bool has_cp = !cols.empty() && cols.back() == "is_cp";
  const std::size_t d = cols.size() - 1 - (has_cp ? 1 : 0);
  if (d == 0) throw ParseError(path, 1, "no value columns");
  for (std::size_t j = 0; j < d; ++j)
    if (cols[1 + j] != "c" + std::to_string(j))
      throw ParseError(path, 1, "expected column c" + std::to_string(j) +
                                ", found " + cols[1 + j]);

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> cps;
  std::size_t lineno = 1;
  long long prev_ts = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != cols.size())
      throw ParseError(path, lineno, "expected " + std::to_string(cols.size()) +
                                     " fields, found " + std::to_string(fields.size()));
    char* end = nullptr;
    const long long ts = std::strtoll(fields[0].c_str(), &end, 10);
    if (end == fields[0].c_str() || *end != '\0')
      throw ParseError(path, lineno, "bad timestamp '" + fields[0] + "'");
    if (ts <= prev_ts) throw ParseError(path, lineno, "timestamps must increase");
    prev_ts = ts;
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = std::strtod(fields[1 + j].c_str(), &end);
      if (end == fields[1 + j].c_str() || *end != '\0')
        throw ParseError(path, lineno, "bad value '" + fields[1 + j] + "'");
      row[j] = v;
    }
    if (has_cp) {
      const std::string& f = fields.back();
      if (f != "0" && f != "1") throw ParseError(path, lineno, "is_cp must be 0 or 1");
      if (f == "1") cps.push_back(rows.size());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path, lineno, "no data rows");

  TimeSeries s;
  s.values = Mat::from_rows(rows);
  s.change_points = std::move(cps);
  s.name = path;
  s.validate();
  return s;
}

void save_series_csv(const TimeSeries& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_series_csv: cannot open " + path);
  out << "timestamp";
  for (std::size_t j = 0; j < s.dim(); ++j) out << ",c" << j;
  out << ",is_cp\n";
  char buf[32];
  std::size_t next_cp = 0;
  for (std::size_t t = 0; t < s.length(); ++t) {
    out << t;
    for (std::size_t j = 0; j < s.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.values(t, j));
      out << ',' << buf;
    }
    const bool is_cp = next_cp < s.change_points.size() && s.change_points[next_cp] == t;
    if (is_cp) ++next_cp;
    out << ',' << (is_cp ? 1 : 0) << '\n';
  }
  if (!out) throw Error("save_series_csv: write failed for " + path);
}

}  // namespace sncpd
