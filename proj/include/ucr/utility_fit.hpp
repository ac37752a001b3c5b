#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucr/model.hpp"

namespace ucr::fit {

// One subjective rating: score assigned to a video at a given bitrate and
// resolution.
struct RatingPoint {
  double rate_bps = 0.0;
  double resolution_pixels = 0.0;
  double score = 0.0;
};

struct FitResult {
  LogUtility coeffs;
  double rss = 0.0;
  double r2 = 0.0;
  double alpha_norm = 0.0;  // lr * r_max + ls * s_max over the dataset
  double r_max = 0.0;
  double s_max = 0.0;
  bool degenerate = false;  // constant scores
  bool converged = true;
  std::string warning;
};

namespace detail_fit {

// Rates are conditioned in units of 100 Mbps and resolutions in units of
// 1e6 pixels so the normal equations stay well scaled.
constexpr double kRateUnit = 1e8;
constexpr double kResUnit = 1e6;

struct Normalized {
  std::vector<double> s, r, y;
};

inline double rss_of(const Normalized& d, double kappa, double ls,
                     double lr) {
  double rss = 0.0;
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    const double e = kappa * std::log1p(ls * d.s[i] + lr * d.r[i]) - d.y[i];
    rss += e * e;
  }
  return rss;
}

// Closed-form conditional least squares for kappa given the inner
// coefficients (the model is linear in kappa).
inline double kappa_given(const Normalized& d, double ls, double lr) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    const double phi = std::log1p(ls * d.s[i] + lr * d.r[i]);
    num += d.y[i] * phi;
    den += phi * phi;
  }
  return den > 0 ? std::max(num / den, 0.0) : 0.0;
}

// Damped Gauss-Newton from one seed; parameters are projected onto the
// nonnegative orthant after every step.
struct GnOutcome {
  double kappa, ls, lr, rss;
  bool converged;
};

inline GnOutcome gauss_newton(const Normalized& d, double ls, double lr) {
  double kappa = kappa_given(d, ls, lr);
  double rss = rss_of(d, kappa, ls, lr);
  double lambda = 1e-3;
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    // Accumulate J^T J and J^T e for the residuals e_i = model - y.
    double jtj[3][3] = {{0}}, jte[3] = {0};
    for (std::size_t i = 0; i < d.y.size(); ++i) {
      const double u = ls * d.s[i] + lr * d.r[i];
      const double phi = std::log1p(u);
      const double e = kappa * phi - d.y[i];
      const double row[3] = {phi, kappa * d.s[i] / (1.0 + u),
                             kappa * d.r[i] / (1.0 + u)};
      for (int a = 0; a < 3; ++a) {
        jte[a] += row[a] * e;
        for (int b = 0; b < 3; ++b) jtj[a][b] += row[a] * row[b];
      }
    }
    bool improved = false;
    for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
      double m[3][4];
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) m[a][b] = jtj[a][b];
        m[a][a] += lambda * (jtj[a][a] + 1e-12);
        m[a][3] = -jte[a];
      }
      // Gaussian elimination with partial pivoting on the 3x4 system.
      bool singular = false;
      for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int rr = col + 1; rr < 3; ++rr)
          if (std::abs(m[rr][col]) > std::abs(m[piv][col])) piv = rr;
        if (std::abs(m[piv][col]) < 1e-300) {
          singular = true;
          break;
        }
        std::swap(m[col], m[piv]);
        for (int rr = 0; rr < 3; ++rr) {
          if (rr == col) continue;
          const double f = m[rr][col] / m[col][col];
          for (int cc = col; cc < 4; ++cc) m[rr][cc] -= f * m[col][cc];
        }
      }
      if (singular) {
        lambda *= 10;
        continue;
      }
      const double nk = std::max(kappa + m[0][3] / m[0][0], 0.0);
      const double nls = std::max(ls + m[1][3] / m[1][1], 0.0);
      const double nlr = std::max(lr + m[2][3] / m[2][2], 0.0);
      const double nrss = rss_of(d, nk, nls, nlr);
      if (nrss <= rss) {
        const double drop = rss - nrss;
        kappa = nk;
        ls = nls;
        lr = nlr;
        rss = nrss;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        if (drop <= 1e-14 * (rss + 1e-30)) {
          converged = true;
          it = 1000;
        }
      } else {
        lambda *= 10;
      }
    }
    if (!improved) {
      converged = true;  // stationary to machine precision
      break;
    }
  }
  return {kappa, ls, lr, rss, converged};
}

}  // namespace detail_fit

// Nonlinear least squares of score ~ kappa * ln(1 + ls*s + lr*r) with
// nonnegative coefficients, multi-started over log-spaced inner seeds.
// `theta` converts the dataset's bitrates into wireless rates (bitrate =
// theta * wireless rate); the returned lr is in wireless-rate units.
inline FitResult fit_log_utility(const std::vector<RatingPoint>& points,
                                 double theta = 1.0) {
  if (points.size() < 4)
    throw std::invalid_argument(
        "fit_log_utility: need at least 4 rating points");
  FitResult out;
  double y_mean = 0.0;
  detail_fit::Normalized d;
  for (const auto& pt : points) {
    if (pt.rate_bps < 0 || pt.resolution_pixels <= 0 || pt.score < 0)
      throw std::invalid_argument("fit_log_utility: invalid rating point");
    d.s.push_back(pt.resolution_pixels / detail_fit::kResUnit);
    d.r.push_back(pt.rate_bps / detail_fit::kRateUnit);
    d.y.push_back(pt.score);
    y_mean += pt.score;
    out.r_max = std::max(out.r_max, pt.rate_bps);
    out.s_max = std::max(out.s_max, pt.resolution_pixels);
  }
  y_mean /= points.size();
  double tss = 0.0;
  for (double y : d.y) tss += (y - y_mean) * (y - y_mean);
  if (tss == 0.0) {
    out.degenerate = true;
    out.coeffs = {0.0, 0.0, 0.0};
    out.rss = 0.0;
    for (double y : d.y) out.rss += y * y;
    out.r2 = 0.0;
    out.warning = "constant scores; degenerate fit";
    return out;
  }

  double smax_n = 0.0, rmax_n = 0.0;
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    smax_n = std::max(smax_n, d.s[i]);
    rmax_n = std::max(rmax_n, d.r[i]);
  }
  smax_n = std::max(smax_n, 1e-12);
  rmax_n = std::max(rmax_n, 1e-12);
  static constexpr std::array<std::array<double, 2>, 8> kSeedFactors = {{
      {0.3, 0.3},
      {0.3, 3.0},
      {3.0, 0.3},
      {3.0, 3.0},
      {30.0, 3.0},
      {3.0, 30.0},
      {30.0, 30.0},
      {0.03, 0.03},
  }};
  detail_fit::GnOutcome best{0, 0, 0, std::numeric_limits<double>::infinity(),
                             false};
  for (const auto& f : kSeedFactors) {
    auto cand = detail_fit::gauss_newton(d, f[0] / smax_n, f[1] / rmax_n);
    if (cand.rss < best.rss) best = cand;
  }
  out.coeffs.kappa = best.kappa;
  out.coeffs.ls = best.ls / detail_fit::kResUnit;
  out.coeffs.lr = best.lr / detail_fit::kRateUnit * theta;
  out.rss = best.rss;
  out.r2 = 1.0 - best.rss / tss;
  out.converged = best.converged;
  if (!best.converged)
    out.warning = "optimizer stagnated; returning best candidate";
  out.alpha_norm =
      out.coeffs.lr * out.r_max + out.coeffs.ls * out.s_max;
  return out;
}

// One-dimensional normalized view of a fit: kappa * ln(1 + alpha * x) with
// x in [0, 1] standing for (lr*r + ls*s)/alpha.
inline double rescaled_curve(const FitResult& fit, double x) {
  return fit.coeffs.kappa * std::log1p(fit.alpha_norm * x);
}

// CSV with the exact header rate_bps,resolution_pixels,score.
inline std::vector<RatingPoint> load_rating_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("rating csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string header = line;
  header.erase(std::remove_if(header.begin(), header.end(), ::isspace),
               header.end());
  if (header != "rate_bps,resolution_pixels,score")
    throw std::invalid_argument(
        "rating csv: expected header rate_bps,resolution_pixels,score, got " +
        line);
  std::vector<RatingPoint> points;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    RatingPoint pt;
    char c1, c2;
    if (!(row >> pt.rate_bps >> c1 >> pt.resolution_pixels >> c2 >>
          pt.score) ||
        c1 != ',' || c2 != ',')
      throw std::invalid_argument("rating csv: malformed line " +
                                  std::to_string(lineno));
    points.push_back(pt);
  }
  return points;
}

}  // namespace ucr::fit
