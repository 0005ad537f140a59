#pragma once

// Rule detector: Pearson correlation between a window's packet counts and
// mean gaps, flagged when the correlation is at or below a threshold.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "canids/common.hpp"
#include "canids/segmentation.hpp"

namespace canids {

struct PearsonConfig {
  double threshold = -0.7;
  int abstain_value = 0;  // flag reported when the correlation is undefined
  // Optional band mode: flag below `band_lower`, clear above `band_upper`,
  // abstain in between.
  bool hysteresis = false;
  double band_upper = -0.6;
  double band_lower = -0.8;
};

struct PearsonResult {
  std::optional<double> rho;
  int flag = 0;
  std::optional<double> p_value;  // reported, never used by the rule
};

inline std::vector<std::string> validate(const PearsonConfig& cfg) {
  std::vector<std::string> out;
  if (!(cfg.threshold >= -1.0 && cfg.threshold <= 1.0)) out.push_back("pearson.threshold must lie in [-1, 1]");
  if (cfg.abstain_value != 0 && cfg.abstain_value != 1) out.push_back("pearson.abstain_value must be 0 or 1");
  if (cfg.hysteresis && !(cfg.band_lower <= cfg.band_upper)) out.push_back("pearson band_lower must not exceed band_upper");
  return out;
}

// Sample correlation with n-denominator moments. Returns nullopt when either
// series has (relative) zero spread.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  if (x.size() < 2) throw Error("pearson: need at least 2 samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0, ax = 0.0, ay = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
    ax = std::max(ax, std::abs(x[i]));
    ay = std::max(ay, std::abs(y[i]));
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double sd_x = std::sqrt(sxx / n);
  const double sd_y = std::sqrt(syy / n);
  if (!(sd_x > 1e-12 * ax) || !(sd_y > 1e-12 * ay)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Two-sided p-value of the correlation under the t distribution with n - 2
// degrees of freedom.
inline double pearson_p_value(double rho, std::size_t n) {
  if (n <= 2) return 1.0;
  if (std::abs(rho) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = rho * std::sqrt(df / (1.0 - rho * rho));
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

inline int pearson_flag(std::optional<double> rho, const PearsonConfig& cfg) {
  if (!rho) return cfg.abstain_value;
  if (cfg.hysteresis) {
    if (*rho <= cfg.band_lower) return 1;
    if (*rho > cfg.band_upper) return 0;
    return cfg.abstain_value;
  }
  return *rho <= cfg.threshold ? 1 : 0;
}

inline PearsonResult detect(const FeatureWindow& window, const PearsonConfig& cfg = {}) {
  PearsonResult r;
  r.rho = pearson(window.counts, window.gaps);
  r.flag = pearson_flag(r.rho, cfg);
  if (r.rho) r.p_value = pearson_p_value(*r.rho, window.counts.size());
  return r;
}

struct PearsonVerdict {
  std::size_t window_index = 0;
  std::optional<double> rho;
  int flag = 0;
  std::optional<double> p_value;
  std::optional<WindowLabel> label;
};

inline std::vector<PearsonVerdict> detect_all(const std::vector<FeatureWindow>& windows, const PearsonConfig& cfg = {}) {
  std::vector<PearsonVerdict> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    auto r = detect(w, cfg);
    out.push_back({w.window_index, r.rho, r.flag, r.p_value, w.label});
  }
  return out;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("undefined");
}

inline std::optional<double> parse_optional(std::string_view text) {
  text = trim(text);
  if (text == "undefined" || text.empty()) return std::nullopt;
  double v = 0;
  if (!parse_double(text, v)) throw Error("bad number '" + std::string(text) + "'");
  return v;
}

// CSV: window_index,rho,flag
inline std::string write_pearson_csv(const std::vector<PearsonVerdict>& verdicts) {
  std::string out = "window_index,rho,flag\n";
  for (const auto& v : verdicts) {
    out += std::to_string(v.window_index) + "," + format_optional(v.rho) + "," + std::to_string(v.flag) + "\n";
  }
  return out;
}

inline std::vector<PearsonVerdict> parse_pearson_csv(std::string_view text) {
  std::vector<PearsonVerdict> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line_no == 1) continue;
    auto cols = split(line, ',');
    if (cols.size() != 3) throw Error("pearson csv: line " + std::to_string(line_no) + ": expected 3 columns");
    PearsonVerdict v;
    double idx = 0, flag = 0;
    if (!parse_double(cols[0], idx) || !parse_double(cols[2], flag)) {
      throw Error("pearson csv: line " + std::to_string(line_no) + ": bad value");
    }
    v.window_index = static_cast<std::size_t>(idx);
    v.rho = parse_optional(cols[1]);
    v.flag = static_cast<int>(flag);
    out.push_back(v);
  }
  return out;
}

}  // namespace canids
