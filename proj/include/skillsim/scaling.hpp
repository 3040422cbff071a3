#pragma once
#include <cmath>
#include <stdexcept>
#include <vector>

#include "domino.hpp"

namespace skillsim {

struct PowerLawFit {
  double exponent = 0.0;   // loss ~ prefactor * x^(-exponent)
  double prefactor = 1.0;
  double window_lo = 0.0, window_hi = 0.0;
  double residual = 0.0;   // rmse in log space
  double jackknife_std = 0.0;
  int n_points = 0;
};

namespace detail {
inline void window_points(const std::vector<double>& xs, const std::vector<double>& ys, double lo, double hi,
                          std::vector<double>& lx, std::vector<double>& ly) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_powerlaw: xs/ys length mismatch");
  lx.clear();
  ly.clear();
  for (size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < lo || xs[i] > hi) continue;
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::domain_error("fit_powerlaw: nonpositive value inside fit window");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
}

inline void ols(const std::vector<double>& lx, const std::vector<double>& ly, double& slope, double& icept) {
  size_t n = lx.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double den = n * sxx - sx * sx;
  if (den == 0.0) throw std::domain_error("fit_powerlaw: degenerate abscissa");
  slope = (n * sxy - sx * sy) / den;
  icept = (sy - slope * sx) / n;
}
}  // namespace detail

inline PowerLawFit fit_powerlaw(const std::vector<double>& xs, const std::vector<double>& ys,
                                double window_lo, double window_hi) {
  std::vector<double> lx, ly;
  detail::window_points(xs, ys, window_lo, window_hi, lx, ly);
  if (lx.size() < 3) throw std::invalid_argument("fit_powerlaw: need at least 3 in-window points");
  double slope, icept;
  detail::ols(lx, ly, slope, icept);
  PowerLawFit f;
  f.exponent = -slope;
  f.prefactor = std::exp(icept);
  f.window_lo = window_lo;
  f.window_hi = window_hi;
  f.n_points = static_cast<int>(lx.size());
  double ss = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    double r = ly[i] - (icept + slope * lx[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / lx.size());
  return f;
}

// leave-one-out spread of the exponent: sqrt((n-1)/n * sum (e_k - mean)^2)
inline double jackknife(const std::vector<double>& xs, const std::vector<double>& ys,
                        double window_lo, double window_hi) {
  std::vector<double> lx, ly;
  detail::window_points(xs, ys, window_lo, window_hi, lx, ly);
  size_t n = lx.size();
  if (n < 4) throw std::invalid_argument("jackknife: need at least 4 in-window points");
  std::vector<double> es(n);
  std::vector<double> tx(n - 1), ty(n - 1);
  for (size_t k = 0; k < n; ++k) {
    size_t w = 0;
    for (size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      tx[w] = lx[i];
      ty[w] = ly[i];
      ++w;
    }
    double slope, icept;
    detail::ols(tx, ty, slope, icept);
    es[k] = -slope;
  }
  double mean = 0.0;
  for (double e : es) mean += e;
  mean /= n;
  double ss = 0.0;
  for (double e : es) ss += (e - mean) * (e - mean);
  return std::sqrt(ss * (n - 1.0) / n);
}

enum class ScalingAxis { steps, dims };

struct ExponentReport {
  PowerLawFit fit;
  ScalingAxis axis;
  ScalingExponents reference;  // quanta/domino predictions at the data exponent
};

inline ExponentReport exponent_report(const std::vector<double>& xs, const std::vector<double>& ys,
                                      ScalingAxis axis, double window_lo, double window_hi,
                                      double data_alpha) {
  ExponentReport r;
  r.fit = fit_powerlaw(xs, ys, window_lo, window_hi);
  if (r.fit.n_points >= 4) r.fit.jackknife_std = jackknife(xs, ys, window_lo, window_hi);
  r.axis = axis;
  r.reference = scaling_exponents(data_alpha);
  return r;
}

}  // namespace skillsim
