#pragma once

// CAN log ingestion: HCRL-style CSV, candump text logs and the native CSV
// export, plus timestamp normalization and dataset-level statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canids/common.hpp"

namespace canids {

enum class Flag : std::uint8_t { Normal, Injected };

inline constexpr std::uint32_t kMaxStandardId = (1u << 11) - 1;
inline constexpr std::uint32_t kMaxExtendedId = (1u << 29) - 1;

struct CanFrame {
  double timestamp = 0.0;  // seconds
  std::uint32_t can_id = 0;
  bool extended = false;
  std::uint8_t dlc = 0;
  std::array<std::uint8_t, 8> data{};
  Flag flag = Flag::Normal;
  std::string channel;

  std::span<const std::uint8_t> payload() const { return {data.data(), dlc}; }

  bool operator==(const CanFrame& other) const {
    return timestamp == other.timestamp && can_id == other.can_id && extended == other.extended &&
           dlc == other.dlc && std::equal(payload().begin(), payload().end(), other.payload().begin()) &&
           flag == other.flag && channel == other.channel;
  }
};

using FrameStream = std::vector<CanFrame>;

inline CanFrame make_frame(double t, std::uint32_t id, std::initializer_list<std::uint8_t> bytes,
                           Flag flag = Flag::Normal) {
  CanFrame f;
  f.timestamp = t;
  f.can_id = id;
  f.extended = id > kMaxStandardId;
  f.dlc = static_cast<std::uint8_t>(std::min<std::size_t>(bytes.size(), 8));
  std::copy_n(bytes.begin(), f.dlc, f.data.begin());
  f.flag = flag;
  return f;
}

// Returns an empty string when the frame satisfies the CanFrame invariants.
inline std::string frame_violation(const CanFrame& f) {
  if (f.dlc > 8) return "dlc " + std::to_string(f.dlc) + " exceeds 8";
  if (!f.extended && f.can_id > kMaxStandardId) return "standard id exceeds 11 bits";
  if (f.extended && f.can_id > kMaxExtendedId) return "extended id exceeds 29 bits";
  if (std::isnan(f.timestamp)) return "timestamp is NaN";
  return {};
}

struct RowError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ParseReport {
  FrameStream frames;
  std::vector<RowError> errors;
  std::size_t rejected = 0;
  std::size_t warnings = 0;
};

// Column positions of the HCRL-style layout. The flag column sits directly
// after the dlc data bytes.
struct HcrlLayout {
  std::size_t timestamp_col = 0;
  std::size_t id_col = 1;
  std::size_t dlc_col = 2;
  std::size_t data_col = 3;
};

namespace detail {

inline void for_each_line(std::string_view text, auto&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    fn(line_no, line);
    start = end + 1;
  }
}

inline bool parse_byte(std::string_view text, std::uint8_t& out) {
  std::uint64_t v = 0;
  if (!parse_hex(text, v) || v > 0xFF) return false;
  out = static_cast<std::uint8_t>(v);
  return true;
}

inline bool parse_id(std::string_view text, CanFrame& f, bool extended_by_width) {
  text = trim(text);
  std::uint64_t v = 0;
  if (!parse_hex(text, v) || v > kMaxExtendedId) return false;
  f.can_id = static_cast<std::uint32_t>(v);
  f.extended = v > kMaxStandardId || (extended_by_width && text.size() == 8);
  return true;
}

inline void hex_byte(std::string& out, std::uint8_t b, bool upper) {
  const char* digits = upper ? "0123456789ABCDEF" : "0123456789abcdef";
  out.push_back(digits[b >> 4]);
  out.push_back(digits[b & 0xF]);
}

inline std::string hex_id(const CanFrame& f, bool upper, int standard_width) {
  std::array<char, 16> buf{};
  const int width = f.extended ? 8 : standard_width;
  std::snprintf(buf.data(), buf.size(), upper ? "%0*X" : "%0*x", width, f.can_id);
  return buf.data();
}

}  // namespace detail

// HCRL ----------------------------------------------------------------------------

inline ParseReport parse_hcrl_csv_text(std::string_view text, const HcrlLayout& layout = {}) {
  ParseReport report;
  bool warned_extra = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty()) return;
    auto cols = split(line, ',');
    auto fail = [&](std::string msg) {
      report.errors.push_back({line_no, std::move(msg)});
      ++report.rejected;
    };
    const std::size_t min_cols = std::max({layout.timestamp_col, layout.id_col, layout.dlc_col}) + 1;
    if (cols.size() < min_cols) return fail("too few columns");

    CanFrame f;
    if (!parse_double(cols[layout.timestamp_col], f.timestamp)) {
      // A leading non-numeric row is treated as a header.
      if (report.frames.empty() && report.errors.empty() && line_no == 1) return;
      return fail("bad timestamp");
    }
    if (!detail::parse_id(cols[layout.id_col], f, true)) return fail("bad can id");
    double dlc = 0;
    if (!parse_double(cols[layout.dlc_col], dlc) || dlc < 0 || dlc > 8 || dlc != static_cast<int>(dlc)) {
      return fail("bad dlc");
    }
    f.dlc = static_cast<std::uint8_t>(dlc);
    const std::size_t flag_col = layout.data_col + f.dlc;
    if (cols.size() <= flag_col) return fail("dlc/payload mismatch: dlc " + std::to_string(f.dlc));
    for (std::size_t i = 0; i < f.dlc; ++i) {
      if (!detail::parse_byte(cols[layout.data_col + i], f.data[i])) {
        return fail("bad data byte " + std::to_string(i));
      }
    }
    auto flag = trim(cols[flag_col]);
    if (flag == "R") {
      f.flag = Flag::Normal;
    } else if (flag == "T") {
      f.flag = Flag::Injected;
    } else {
      return fail("bad flag '" + std::string(flag) + "' (dlc/payload mismatch?)");
    }
    if (cols.size() > flag_col + 1) {
      ++report.warnings;
      if (!warned_extra) {
        warn("hcrl: ignoring extra trailing columns (first at line " + std::to_string(line_no) + ")");
        warned_extra = true;
      }
    }
    report.frames.push_back(std::move(f));
  });
  return report;
}

inline ParseReport parse_hcrl_csv(const std::string& path, const HcrlLayout& layout = {}) {
  return parse_hcrl_csv_text(read_text_file(path), layout);
}

inline std::string write_hcrl_csv(const FrameStream& frames) {
  std::string out;
  for (const auto& f : frames) {
    out += format_fixed(f.timestamp, 6);
    out += ',';
    out += detail::hex_id(f, false, 4);
    out += ',';
    out += std::to_string(f.dlc);
    for (auto b : f.payload()) {
      out += ',';
      detail::hex_byte(out, b, false);
    }
    out += f.flag == Flag::Injected ? ",T\n" : ",R\n";
  }
  return out;
}

// candump ---------------------------------------------------------------------------

inline ParseReport parse_candump_text(std::string_view text) {
  ParseReport report;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    line = trim(line);
    if (line.empty()) return;
    auto fail = [&](std::string msg) {
      report.errors.push_back({line_no, std::move(msg)});
      ++report.rejected;
    };
    if (line.front() != '(') return fail("expected '(' timestamp");
    auto close = line.find(')');
    if (close == std::string_view::npos) return fail("unterminated timestamp");
    CanFrame f;
    if (!parse_double(line.substr(1, close - 1), f.timestamp)) return fail("bad timestamp");
    auto rest = trim(line.substr(close + 1));
    auto space = rest.find_first_of(" \t");
    if (space == std::string_view::npos) return fail("missing interface");
    f.channel = std::string(rest.substr(0, space));
    auto body = trim(rest.substr(space + 1));
    // Trailing annotations after the frame (e.g. " R" or " T") are tolerated.
    auto body_end = body.find_first_of(" \t");
    std::string_view trailer;
    if (body_end != std::string_view::npos) {
      trailer = trim(body.substr(body_end));
      body = body.substr(0, body_end);
    }
    auto hash = body.find('#');
    if (hash == std::string_view::npos) return fail("missing '#'");
    if (!detail::parse_id(body.substr(0, hash), f, true)) return fail("bad can id");
    auto hex = body.substr(hash + 1);
    if (hex.size() % 2 != 0 || hex.size() > 16) return fail("bad data length");
    f.dlc = static_cast<std::uint8_t>(hex.size() / 2);
    for (std::size_t i = 0; i < f.dlc; ++i) {
      if (!detail::parse_byte(hex.substr(2 * i, 2), f.data[i])) return fail("bad data byte");
    }
    f.flag = trailer == "T" ? Flag::Injected : Flag::Normal;
    report.frames.push_back(std::move(f));
  });
  return report;
}

inline ParseReport parse_candump(const std::string& path) {
  return parse_candump_text(read_text_file(path));
}

inline std::string write_candump(const FrameStream& frames, std::string_view default_iface = "can0") {
  std::string out;
  for (const auto& f : frames) {
    out += '(';
    out += format_fixed(f.timestamp, 6);
    out += ") ";
    out += f.channel.empty() ? std::string(default_iface) : f.channel;
    out += ' ';
    out += detail::hex_id(f, true, 3);
    out += '#';
    for (auto b : f.payload()) detail::hex_byte(out, b, true);
    out += '\n';
  }
  return out;
}

// Native CSV ------------------------------------------------------------------------

inline constexpr std::string_view kNativeHeader = "timestamp,can_id,dlc,payload_hex,flag,channel";

inline ParseReport parse_native_csv_text(std::string_view text) {
  ParseReport report;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty()) return;
    if (line_no == 1 && trim(line) == kNativeHeader) return;
    auto fail = [&](std::string msg) {
      report.errors.push_back({line_no, std::move(msg)});
      ++report.rejected;
    };
    auto cols = split(line, ',');
    if (cols.size() < 5) return fail("too few columns");
    CanFrame f;
    if (!parse_double(cols[0], f.timestamp)) return fail("bad timestamp");
    if (!detail::parse_id(cols[1], f, true)) return fail("bad can id");
    double dlc = 0;
    if (!parse_double(cols[2], dlc) || dlc < 0 || dlc > 8 || dlc != static_cast<int>(dlc)) {
      return fail("bad dlc");
    }
    f.dlc = static_cast<std::uint8_t>(dlc);
    auto hex = trim(cols[3]);
    if (hex.size() != 2u * f.dlc) return fail("dlc/payload mismatch");
    for (std::size_t i = 0; i < f.dlc; ++i) {
      if (!detail::parse_byte(hex.substr(2 * i, 2), f.data[i])) return fail("bad data byte");
    }
    auto flag = trim(cols[4]);
    if (flag == "R") {
      f.flag = Flag::Normal;
    } else if (flag == "T") {
      f.flag = Flag::Injected;
    } else {
      return fail("bad flag");
    }
    if (cols.size() > 5) f.channel = std::string(trim(cols[5]));
    if (cols.size() > 6) ++report.warnings;
    report.frames.push_back(std::move(f));
  });
  return report;
}

inline ParseReport parse_native_csv(const std::string& path) {
  return parse_native_csv_text(read_text_file(path));
}

// Timestamps are written in shortest round-trip form, so a parse of the
// output reproduces every double bit-exactly.
inline std::string write_native_csv(const FrameStream& frames) {
  std::string out(kNativeHeader);
  out += '\n';
  for (const auto& f : frames) {
    out += format_double(f.timestamp);
    out += ',';
    out += detail::hex_id(f, false, 3);
    out += ',';
    out += std::to_string(f.dlc);
    out += ',';
    for (auto b : f.payload()) detail::hex_byte(out, b, false);
    out += f.flag == Flag::Injected ? ",T," : ",R,";
    out += f.channel;
    out += '\n';
  }
  return out;
}

enum class LogFormat { Hcrl, Candump, Native };

inline LogFormat parse_log_format(std::string_view name) {
  if (name == "hcrl") return LogFormat::Hcrl;
  if (name == "candump") return LogFormat::Candump;
  if (name == "native") return LogFormat::Native;
  throw Error("unknown log format '" + std::string(name) + "'");
}

inline ParseReport parse_log(const std::string& path, LogFormat format) {
  switch (format) {
    case LogFormat::Hcrl: return parse_hcrl_csv(path);
    case LogFormat::Candump: return parse_candump(path);
    case LogFormat::Native: return parse_native_csv(path);
  }
  throw Error("unreachable log format");
}

inline std::string write_log(const FrameStream& frames, LogFormat format) {
  switch (format) {
    case LogFormat::Hcrl: return write_hcrl_csv(frames);
    case LogFormat::Candump: return write_candump(frames);
    case LogFormat::Native: return write_native_csv(frames);
  }
  throw Error("unreachable log format");
}

// Loads a native CSV and fails on any rejected row.
inline FrameStream load_frames(const std::string& path) {
  auto report = parse_native_csv(path);
  if (!report.errors.empty()) {
    const auto& e = report.errors.front();
    throw Error(path + ":" + std::to_string(e.line) + ": " + e.message);
  }
  return std::move(report.frames);
}

inline void save_frames(const std::string& path, const FrameStream& frames) {
  write_text_file(path, write_native_csv(frames));
}

// Normalization and statistics ------------------------------------------------------------

// Shifts the stream so its first frame sits at t = 0. Throws on any
// decreasing timestamp, naming the offending index.
inline FrameStream normalize_timestamps(FrameStream frames) {
  if (frames.empty()) return frames;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].timestamp < frames[i - 1].timestamp) {
      throw Error("normalize_timestamps: decreasing timestamp at index " + std::to_string(i));
    }
  }
  const double origin = frames.front().timestamp;
  for (auto& f : frames) f.timestamp -= origin;
  return frames;
}

inline bool is_normalized(const FrameStream& frames) {
  if (frames.empty()) return true;
  if (frames.front().timestamp != 0.0) return false;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].timestamp < frames[i - 1].timestamp) return false;
  }
  return true;
}

struct DatasetStats {
  std::size_t num_unique_ids = 0;
  double duration = 0.0;
  std::size_t total_frames = 0;
  double avg_time_gap = 0.0;
};

inline DatasetStats dataset_stats(const FrameStream& frames) {
  if (frames.size() < 2) throw Error("dataset_stats: need at least 2 frames");
  std::set<std::pair<bool, std::uint32_t>> ids;
  double gap_sum = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    ids.emplace(frames[i].extended, frames[i].can_id);
    if (i > 0) gap_sum += frames[i].timestamp - frames[i - 1].timestamp;
  }
  DatasetStats s;
  s.num_unique_ids = ids.size();
  s.duration = frames.back().timestamp - frames.front().timestamp;
  s.total_frames = frames.size();
  s.avg_time_gap = gap_sum / static_cast<double>(frames.size() - 1);
  return s;
}

// Published per-vehicle reference statistics. `data_generation` is kept as
// printed; its unit is not stated at the source.
struct VehicleReference {
  std::string_view vehicle;
  std::size_t num_ids;
  std::string_view data_generation;
  double avg_time_gap;
};

inline constexpr std::array<VehicleReference, 5> kVehicleReferences{{
    {"kia-lisa", 45, "2085", 0.4772},
    {"kia-hcrl", 45, "2085", 0.4772},
    {"sonata-hcrl", 27, "1943", 0.5132},
    {"tesla-lisa-before-update", 69, "3126", 0.3195},
    {"tesla-lisa-after-update", 73, "2750", 0.3638},
}};

inline std::optional<VehicleReference> vehicle_reference(std::string_view vehicle) {
  for (const auto& r : kVehicleReferences) {
    if (r.vehicle == vehicle) return r;
  }
  return std::nullopt;
}

}  // namespace canids
