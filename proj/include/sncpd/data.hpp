#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sncpd/mat.hpp"

namespace sncpd {

// Multivariate series with known change points. A change point nu means the
// generating distribution switches starting at row nu.
struct TimeSeries {
  Mat values;                              // t x d
  std::vector<std::size_t> change_points;  // strictly increasing, interior
  std::string name;

  std::size_t length() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
  void validate() const;
};

// Interior points length*(j+1)/(count+1).
std::vector<std::size_t> evenly_spaced_change_points(std::size_t length,
                                                     std::size_t count);

// Unit-variance Gaussian noise around a piecewise-constant mean that jumps
// by delta along a fresh random unit direction at every change point.
TimeSeries make_mean_shift_series(std::size_t dim, std::size_t length,
                                  std::vector<std::size_t> change_points,
                                  double delta, double noise_std,
                                  std::uint64_t seed);

// Zero-mean Student-t segments; every segment draws a fresh mixing matrix,
// odd segments additionally scaled by spread.
TimeSeries make_elliptical_series(std::size_t dim, std::size_t length,
                                  std::vector<std::size_t> change_points,
                                  double spread, double dof, std::uint64_t seed);

// Projects every row onto the unit sphere. Zero rows stay put with a warning.
void normalize_rows_to_sphere(Mat& m);

struct SplitSpec {
  double train = 0.6, val = 0.2, test = 0.2;
};

struct SplitSeries {
  TimeSeries train, val, test;
};

// Contiguous train/val/test cut; change points are reindexed per segment and
// ones landing exactly on a boundary are dropped with a warning.
SplitSeries split_series(const TimeSeries& s, const SplitSpec& spec);

// CSV with header "timestamp,c0,...,c{D-1}[,is_cp]".
TimeSeries load_series_csv(const std::string& path);
void save_series_csv(const TimeSeries& s, const std::string& path);

}  // namespace sncpd
