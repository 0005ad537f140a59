#pragma once

// Micro-segment statistics (packet count and mean in-bin gap per time bin)
// and fixed-length feature windows built from them.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "canids/can_ingest.hpp"
#include "canids/common.hpp"

namespace canids {

inline constexpr double kDefaultChunkLen = 0.01;
inline constexpr std::size_t kWindowLen = 100;

struct MicroSegment {
  std::size_t index = 0;
  double start = 0.0;
  double chunk_len = kDefaultChunkLen;
  std::size_t num_packets = 0;
  double avg_time_gap = 0.0;
  bool any_injected = false;
};

enum class WindowLabel : std::uint8_t { AttackFree = 0, Attack = 1 };

struct FeatureWindow {
  std::size_t window_index = 0;
  std::vector<double> counts;
  std::vector<double> gaps;
  WindowLabel label = WindowLabel::AttackFree;
};

// Bin index of a timestamp. Timestamps within 1e-9 of a bin edge (in units
// of chunk_len) land in the upper bin, absorbing decimal round-off such as
// 0.03 / 0.01 = 2.9999999999999996.
inline std::size_t bin_index(double t, double chunk_len) {
  return static_cast<std::size_t>(std::floor(t / chunk_len + 1e-9));
}

// Bins a normalized stream into [k*chunk_len, (k+1)*chunk_len). Bins with
// fewer than two frames report avg_time_gap = chunk_len.
inline std::vector<MicroSegment> micro_segment(const FrameStream& frames, double chunk_len = kDefaultChunkLen) {
  if (!(chunk_len > 0.0)) throw Error("micro_segment: chunk_len must be > 0");
  if (!is_normalized(frames)) throw Error("micro_segment: stream is not normalized (first timestamp must be 0, non-decreasing)");
  if (frames.empty()) return {};

  const std::size_t count = bin_index(frames.back().timestamp, chunk_len) + 1;
  std::vector<MicroSegment> segments(count);
  for (std::size_t k = 0; k < count; ++k) {
    segments[k].index = k;
    segments[k].start = static_cast<double>(k) * chunk_len;
    segments[k].chunk_len = chunk_len;
    segments[k].avg_time_gap = chunk_len;
  }

  std::size_t i = 0;
  while (i < frames.size()) {
    const std::size_t k = bin_index(frames[i].timestamp, chunk_len);
    std::size_t j = i;
    bool injected = false;
    while (j < frames.size() && bin_index(frames[j].timestamp, chunk_len) == k) {
      injected = injected || frames[j].flag == Flag::Injected;
      ++j;
    }
    auto& seg = segments[k];
    seg.num_packets = j - i;
    seg.any_injected = injected;
    if (seg.num_packets >= 2) {
      // The mean of successive gaps telescopes to span / (n - 1).
      seg.avg_time_gap = (frames[j - 1].timestamp - frames[i].timestamp) / static_cast<double>(seg.num_packets - 1);
    }
    i = j;
  }
  return segments;
}

// Non-overlapping by default; a trailing partial window is dropped. A window
// is labeled Attack when any of its segments carries an injected frame.
inline std::vector<FeatureWindow> build_windows(const std::vector<MicroSegment>& segments,
                                                std::int64_t window_len = kWindowLen,
                                                std::int64_t stride = kWindowLen) {
  if (window_len <= 0) throw Error("build_windows: window_len must be > 0");
  if (stride <= 0) throw Error("build_windows: stride must be > 0");
  const auto len = static_cast<std::size_t>(window_len);
  const auto step = static_cast<std::size_t>(stride);
  if (segments.size() < len) {
    throw Error("build_windows: need at least " + std::to_string(len) + " segments, got " +
                std::to_string(segments.size()));
  }
  std::vector<FeatureWindow> windows;
  for (std::size_t start = 0, w = 0; start + len <= segments.size(); start += step, ++w) {
    FeatureWindow fw;
    fw.window_index = w;
    fw.counts.reserve(len);
    fw.gaps.reserve(len);
    bool attack = false;
    for (std::size_t k = start; k < start + len; ++k) {
      fw.counts.push_back(static_cast<double>(segments[k].num_packets));
      fw.gaps.push_back(segments[k].avg_time_gap);
      attack = attack || segments[k].any_injected;
    }
    fw.label = attack ? WindowLabel::Attack : WindowLabel::AttackFree;
    windows.push_back(std::move(fw));
  }
  return windows;
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Per-vehicle bin width. Tags may carry a dataset suffix ("kia-hcrl").
inline double chunk_len_for_vehicle(std::string_view tag) {
  const auto t = lowercase(tag);
  auto starts = [&](std::string_view p) { return t.rfind(p, 0) == 0; };
  if (starts("sonata")) return 0.010;
  if (starts("kia")) return 0.009;
  if (starts("tesla")) return 0.0065;
  warn("unknown vehicle tag '" + std::string(tag) + "', using chunk_len 0.01");
  return kDefaultChunkLen;
}

inline std::vector<FeatureWindow> featurize(const FrameStream& frames, double chunk_len,
                                            std::int64_t window_len = kWindowLen) {
  return build_windows(micro_segment(normalize_timestamps(frames), chunk_len), window_len, window_len);
}

// Windows CSV ---------------------------------------------------------------------

inline std::string write_windows_csv(const std::vector<FeatureWindow>& windows) {
  const std::size_t len = windows.empty() ? kWindowLen : windows.front().counts.size();
  std::string out = "window_index,label";
  for (std::size_t i = 0; i < len; ++i) out += ",counts_" + std::to_string(i);
  for (std::size_t i = 0; i < len; ++i) out += ",gaps_" + std::to_string(i);
  out += '\n';
  for (const auto& w : windows) {
    if (w.counts.size() != len || w.gaps.size() != len) throw Error("write_windows_csv: ragged windows");
    out += std::to_string(w.window_index);
    out += w.label == WindowLabel::Attack ? ",1" : ",0";
    for (double v : w.counts) {
      out += ',';
      out += format_double(v);
    }
    for (double v : w.gaps) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<FeatureWindow> parse_windows_csv(std::string_view text) {
  std::vector<FeatureWindow> windows;
  std::size_t len = 0;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto cols = split(line, ',');
    if (line_no == 1) {
      if (cols.size() < 4 || cols.size() % 2 != 0 || trim(cols[0]) != "window_index") {
        throw Error("windows csv: bad header");
      }
      len = (cols.size() - 2) / 2;
      continue;
    }
    if (cols.size() != 2 + 2 * len) throw Error("windows csv: line " + std::to_string(line_no) + ": wrong column count");
    FeatureWindow w;
    double idx = 0, label = 0;
    if (!parse_double(cols[0], idx) || !parse_double(cols[1], label) || (label != 0 && label != 1)) {
      throw Error("windows csv: line " + std::to_string(line_no) + ": bad index/label");
    }
    w.window_index = static_cast<std::size_t>(idx);
    w.label = label == 1 ? WindowLabel::Attack : WindowLabel::AttackFree;
    w.counts.resize(len);
    w.gaps.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      if (!parse_double(cols[2 + i], w.counts[i]) || !parse_double(cols[2 + len + i], w.gaps[i])) {
        throw Error("windows csv: line " + std::to_string(line_no) + ": bad value");
      }
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

inline std::vector<FeatureWindow> load_windows(const std::string& path) {
  return parse_windows_csv(read_text_file(path));
}

inline void save_windows(const std::string& path, const std::vector<FeatureWindow>& windows) {
  write_text_file(path, write_windows_csv(windows));
}

}  // namespace canids
