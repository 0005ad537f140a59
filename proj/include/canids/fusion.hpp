#pragma once

// Binary OR voting of the CNN and Pearson detectors per window.

#include <optional>
#include <string>
#include <vector>

#include "canids/common.hpp"
#include "canids/pearson.hpp"
#include "canids/segmentation.hpp"

namespace canids {

inline WindowLabel vote(int cnn_flag, int pearson_flag) {
  return (cnn_flag == 0 && pearson_flag == 0) ? WindowLabel::AttackFree : WindowLabel::Attack;
}

struct CnnVerdict {
  std::size_t window_index = 0;
  int flag = 0;
  double score = 0.0;
  std::optional<WindowLabel> label;
};

struct Verdict {
  std::size_t window_index = 0;
  int cnn_flag = 0;
  std::optional<double> cnn_score;  // absent on partial windows
  int pearson_flag = 0;
  std::optional<double> pearson_rho;
  WindowLabel final = WindowLabel::AttackFree;
  std::optional<WindowLabel> label;
  bool partial = false;  // before the first complete CNN sequence
};

// The CNN stream covers the tail of the Pearson stream (it starts W - 1
// windows later). Leading Pearson-only windows are marked partial and vote
// with cnn_flag = 0.
inline std::vector<Verdict> fuse_streams(const std::vector<CnnVerdict>& cnn, const std::vector<PearsonVerdict>& pearson) {
  if (cnn.size() > pearson.size()) {
    throw Error("fuse: CNN stream (" + std::to_string(cnn.size()) + ") is longer than Pearson stream (" +
                std::to_string(pearson.size()) + ")");
  }
  const std::size_t offset = pearson.size() - cnn.size();
  std::vector<Verdict> out;
  out.reserve(pearson.size());
  for (std::size_t i = 0; i < pearson.size(); ++i) {
    const auto& p = pearson[i];
    Verdict v;
    v.window_index = p.window_index;
    v.pearson_flag = p.flag;
    v.pearson_rho = p.rho;
    v.label = p.label;
    if (i < offset) {
      v.partial = true;
    } else {
      const auto& c = cnn[i - offset];
      if (c.window_index != p.window_index) {
        throw Error("fuse: unaligned streams at position " + std::to_string(i) + ": cnn window " +
                    std::to_string(c.window_index) + " vs pearson window " + std::to_string(p.window_index));
      }
      v.cnn_flag = c.flag;
      v.cnn_score = c.score;
      if (!v.label) v.label = c.label;
    }
    v.final = vote(v.cnn_flag, v.pearson_flag);
    out.push_back(v);
  }
  return out;
}

// CSV ------------------------------------------------------------------------------

inline std::string write_verdicts_csv(const std::vector<Verdict>& verdicts) {
  std::string out = "window_index,cnn_flag,cnn_score,pearson_flag,pearson_rho,final,label,partial\n";
  for (const auto& v : verdicts) {
    out += std::to_string(v.window_index) + ',' + std::to_string(v.cnn_flag) + ',' +
           (v.cnn_score ? format_double(*v.cnn_score) : std::string()) + ',' + std::to_string(v.pearson_flag) + ',' +
           format_optional(v.pearson_rho) + ',' + (v.final == WindowLabel::Attack ? "1" : "0") + ',' +
           (v.label ? (*v.label == WindowLabel::Attack ? "1" : "0") : "") + ',' + (v.partial ? "1" : "0") + '\n';
  }
  return out;
}

inline std::vector<Verdict> parse_verdicts_csv(std::string_view text) {
  std::vector<Verdict> out;
  std::size_t line_no = 0;
  auto as_int = [&](std::string_view s) {
    double v = 0;
    if (!parse_double(s, v)) throw Error("verdict csv: line " + std::to_string(line_no) + ": bad value");
    return static_cast<long long>(v);
  };
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line_no == 1) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 8) throw Error("verdict csv: line " + std::to_string(line_no) + ": expected 8 columns");
    Verdict v;
    v.window_index = static_cast<std::size_t>(as_int(cols[0]));
    v.cnn_flag = static_cast<int>(as_int(cols[1]));
    v.cnn_score = parse_optional(cols[2]);
    v.pearson_flag = static_cast<int>(as_int(cols[3]));
    v.pearson_rho = parse_optional(cols[4]);
    v.final = as_int(cols[5]) == 1 ? WindowLabel::Attack : WindowLabel::AttackFree;
    if (!trim(cols[6]).empty()) v.label = as_int(cols[6]) == 1 ? WindowLabel::Attack : WindowLabel::AttackFree;
    v.partial = as_int(cols[7]) == 1;
    out.push_back(v);
  }
  return out;
}

inline std::string write_cnn_verdicts_csv(const std::vector<CnnVerdict>& verdicts) {
  std::string out = "window_index,flag,score,label\n";
  for (const auto& v : verdicts) {
    out += std::to_string(v.window_index) + ',' + std::to_string(v.flag) + ',' + format_double(v.score) + ',' +
           (v.label ? (*v.label == WindowLabel::Attack ? "1" : "0") : "") + '\n';
  }
  return out;
}

inline std::vector<CnnVerdict> parse_cnn_verdicts_csv(std::string_view text) {
  std::vector<CnnVerdict> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line_no == 1) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 4) throw Error("cnn verdict csv: line " + std::to_string(line_no) + ": expected 4 columns");
    CnnVerdict v;
    double idx = 0, flag = 0;
    if (!parse_double(cols[0], idx) || !parse_double(cols[1], flag) || !parse_double(cols[2], v.score)) {
      throw Error("cnn verdict csv: line " + std::to_string(line_no) + ": bad value");
    }
    v.window_index = static_cast<std::size_t>(idx);
    v.flag = static_cast<int>(flag);
    if (!trim(cols[3]).empty()) v.label = trim(cols[3]) == "1" ? WindowLabel::Attack : WindowLabel::AttackFree;
    out.push_back(v);
  }
  return out;
}

}  // namespace canids
