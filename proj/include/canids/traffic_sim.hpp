#pragma once

// Synthetic baseline CAN traffic and DoS / fuzzing / replay injection.
// Every generator is a pure function of its inputs and seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "canids/can_ingest.hpp"
#include "canids/common.hpp"

namespace canids {

enum class PayloadKind { Constant, Counter, Random };

struct IdSchedule {
  std::uint32_t can_id = 0;
  double period = 0.01;           // seconds
  double jitter_fraction = 0.0;   // each inter-arrival gap is period * (1 +/- jitter)
  PayloadKind payload = PayloadKind::Counter;
  std::vector<std::uint8_t> constant_bytes;  // used by PayloadKind::Constant
  double offset = 0.0;            // first nominal transmission time
};

struct TrafficProfile {
  std::vector<IdSchedule> id_table;
  double duration = 0.0;
  std::uint64_t seed = 0;
};

enum class AttackKind { DoS, Fuzzing, Replay };
enum class Regime { LowFrequencyPeriodic, HighFrequency };
// Scatter draws the injection instants uniformly inside the window (the
// count is still exact); Uniform spaces them at 1/rate.
enum class InjectionTiming { Scatter, Uniform };

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
};

struct InjectionSpec {
  AttackKind kind = AttackKind::DoS;
  Regime regime = Regime::HighFrequency;
  double rate = 1.0;  // injections per second while active
  std::vector<TimeWindow> active_windows;
  std::uint64_t seed = 0;
  std::optional<TimeWindow> replay_source;
  std::uint32_t dos_id = 0x000;
  InjectionTiming timing = InjectionTiming::Scatter;
};

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::DoS: return "dos";
    case AttackKind::Fuzzing: return "fuzz";
    case AttackKind::Replay: return "replay";
  }
  return "?";
}

inline std::string to_string(Regime r) {
  return r == Regime::HighFrequency ? "high" : "low";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  if (s == "dos") return AttackKind::DoS;
  if (s == "fuzz" || s == "fuzzing") return AttackKind::Fuzzing;
  if (s == "replay") return AttackKind::Replay;
  throw Error("unknown attack kind '" + std::string(s) + "'");
}

inline Regime parse_regime(std::string_view s) {
  if (s == "high") return Regime::HighFrequency;
  if (s == "low") return Regime::LowFrequencyPeriodic;
  throw Error("unknown regime '" + std::string(s) + "'");
}

namespace detail {

inline double quantize_us(double t) { return std::round(t * 1e6) / 1e6; }

inline std::int64_t to_us(double t) { return std::llround(t * 1e6); }

inline FrameStream merge_sorted(FrameStream base, FrameStream injected) {
  base.insert(base.end(), std::make_move_iterator(injected.begin()),
              std::make_move_iterator(injected.end()));
  std::stable_sort(base.begin(), base.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  return base;
}

inline void validate_windows(const InjectionSpec& spec, std::optional<double> stream_duration) {
  if (!(spec.rate > 0.0)) throw Error("injection rate must be > 0");
  auto windows = spec.active_windows;
  std::sort(windows.begin(), windows.end(),
            [](const TimeWindow& a, const TimeWindow& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (w.start < 0.0 || w.end < w.start) {
      throw Error("invalid active window [" + format_double(w.start) + ", " + format_double(w.end) + ")");
    }
    if (stream_duration && w.end > *stream_duration + 1e-9) {
      throw Error("active window [" + format_double(w.start) + ", " + format_double(w.end) +
                  ") exceeds stream duration " + format_double(*stream_duration));
    }
    if (i > 0 && w.start < windows[i - 1].end) {
      throw Error("overlapping active windows at " + format_double(w.start));
    }
  }
}

inline std::optional<double> infer_duration(const FrameStream& base, std::optional<double> duration) {
  if (duration) return duration;
  if (base.empty()) return std::nullopt;
  // A baseline of duration D has its last frame strictly before D.
  return std::ceil(base.back().timestamp + 1e-9);
}

// Injection instants for one window; exactly floor(rate * length) of them.
inline std::vector<double> injection_times(const TimeWindow& w, const InjectionSpec& spec, Rng& rng) {
  const auto count = static_cast<std::size_t>(std::floor(spec.rate * w.length() + 1e-9));
  std::vector<double> times;
  times.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    double t = spec.timing == InjectionTiming::Scatter
                   ? w.start + rng.uniform() * w.length()
                   : w.start + static_cast<double>(k) / spec.rate;
    t = quantize_us(t);
    if (t >= w.end) t = quantize_us(w.end - 1e-6);
    if (t < w.start) t = w.start;
    times.push_back(t);
  }
  std::sort(times.begin(), times.end());
  return times;
}

}  // namespace detail

// Baseline ----------------------------------------------------------------------

inline void validate_profile(const TrafficProfile& profile) {
  if (profile.id_table.empty()) throw Error("traffic profile has an empty id table");
  if (!(profile.duration > 0.0)) throw Error("traffic profile duration must be > 0");
  for (const auto& id : profile.id_table) {
    if (!(id.period > 0.0)) throw Error("id period must be > 0");
    if (!(id.jitter_fraction >= 0.0 && id.jitter_fraction < 1.0)) {
      throw Error("jitter_fraction must lie in [0, 1)");
    }
    if (id.can_id > kMaxStandardId) throw Error("profile ids must be 11-bit");
    if (id.payload == PayloadKind::Constant && id.constant_bytes.size() > 8) {
      throw Error("constant payload longer than 8 bytes");
    }
  }
}

// Each id transmits at offset + accumulated inter-arrival gaps, each gap
// drawn uniformly from period * [1 - jitter, 1 + jitter]. Timestamps are
// quantized to microseconds, as in logged traffic.
inline FrameStream synthesize_baseline(const TrafficProfile& profile) {
  validate_profile(profile);
  FrameStream frames;
  for (std::size_t i = 0; i < profile.id_table.size(); ++i) {
    const auto& sched = profile.id_table[i];
    Rng rng(derive_seed(profile.seed, i));
    std::uint8_t counter = 0;
    double t = sched.offset + rng.uniform() * sched.jitter_fraction * sched.period;
    while (true) {
      const double tq = detail::quantize_us(t);
      if (tq >= profile.duration) break;
      CanFrame f;
      f.timestamp = tq;
      f.can_id = sched.can_id;
      switch (sched.payload) {
        case PayloadKind::Constant:
          f.dlc = static_cast<std::uint8_t>(sched.constant_bytes.size());
          std::copy(sched.constant_bytes.begin(), sched.constant_bytes.end(), f.data.begin());
          break;
        case PayloadKind::Counter:
          f.dlc = 8;
          f.data[0] = counter++;
          break;
        case PayloadKind::Random:
          f.dlc = 8;
          for (auto& b : f.data) b = static_cast<std::uint8_t>(rng.below(256));
          break;
      }
      frames.push_back(std::move(f));
      const double jitter = sched.jitter_fraction * (2.0 * rng.uniform() - 1.0);
      t += sched.period * (1.0 + jitter);
    }
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  return frames;
}

// Injection ---------------------------------------------------------------------

inline FrameStream inject_dos(FrameStream base, const InjectionSpec& spec,
                              std::optional<double> stream_duration = std::nullopt) {
  if (spec.kind != AttackKind::DoS) throw Error("inject_dos: spec kind is not DoS");
  detail::validate_windows(spec, detail::infer_duration(base, stream_duration));
  Rng rng(spec.seed);
  FrameStream injected;
  for (const auto& w : spec.active_windows) {
    for (double t : detail::injection_times(w, spec, rng)) {
      CanFrame f;
      f.timestamp = t;
      f.can_id = spec.dos_id;
      f.extended = spec.dos_id > kMaxStandardId;
      f.dlc = 8;
      f.flag = Flag::Injected;
      injected.push_back(std::move(f));
    }
  }
  return detail::merge_sorted(std::move(base), std::move(injected));
}

inline FrameStream inject_fuzzing(FrameStream base, const InjectionSpec& spec,
                                  std::optional<double> stream_duration = std::nullopt) {
  if (spec.kind != AttackKind::Fuzzing) throw Error("inject_fuzzing: spec kind is not Fuzzing");
  detail::validate_windows(spec, detail::infer_duration(base, stream_duration));
  Rng timing_rng(derive_seed(spec.seed, 0));
  Rng content_rng(derive_seed(spec.seed, 1));
  FrameStream injected;
  for (const auto& w : spec.active_windows) {
    for (double t : detail::injection_times(w, spec, timing_rng)) {
      CanFrame f;
      f.timestamp = t;
      f.can_id = static_cast<std::uint32_t>(content_rng.below(kMaxStandardId + 1));
      f.dlc = 8;
      for (auto& b : f.data) b = static_cast<std::uint8_t>(content_rng.below(256));
      f.flag = Flag::Injected;
      injected.push_back(std::move(f));
    }
  }
  return detail::merge_sorted(std::move(base), std::move(injected));
}

// Re-emits the captured slice inside every active window. Shifts are done in
// integer microseconds so replayed gaps equal captured gaps exactly.
inline FrameStream inject_replay(FrameStream base, const InjectionSpec& spec,
                                 std::optional<double> stream_duration = std::nullopt) {
  if (spec.kind != AttackKind::Replay) throw Error("inject_replay: spec kind is not Replay");
  if (!spec.replay_source) throw Error("inject_replay: replay_source is required");
  detail::validate_windows(spec, detail::infer_duration(base, stream_duration));
  const auto source = *spec.replay_source;
  if (!(source.end > source.start)) throw Error("inject_replay: empty capture interval");
  FrameStream slice;
  for (const auto& f : base) {
    if (f.timestamp >= source.start && f.timestamp < source.end) slice.push_back(f);
  }
  if (slice.empty()) throw Error("inject_replay: capture slice contains no frames");
  const std::int64_t capture_start = detail::to_us(source.start);
  FrameStream injected;
  for (const auto& w : spec.active_windows) {
    if (source.length() > w.length() + 1e-9) {
      throw Error("inject_replay: replay slice longer than active window at " + format_double(w.start));
    }
    const std::int64_t window_start = detail::to_us(w.start);
    for (const auto& f : slice) {
      CanFrame r = f;
      r.timestamp = static_cast<double>(window_start + (detail::to_us(f.timestamp) - capture_start)) / 1e6;
      r.flag = Flag::Injected;
      injected.push_back(std::move(r));
    }
  }
  return detail::merge_sorted(std::move(base), std::move(injected));
}

inline FrameStream inject(FrameStream base, const InjectionSpec& spec,
                          std::optional<double> stream_duration = std::nullopt) {
  switch (spec.kind) {
    case AttackKind::DoS: return inject_dos(std::move(base), spec, stream_duration);
    case AttackKind::Fuzzing: return inject_fuzzing(std::move(base), spec, stream_duration);
    case AttackKind::Replay: return inject_replay(std::move(base), spec, stream_duration);
  }
  throw Error("unreachable attack kind");
}

// Defaults and the reference corpus ------------------------------------------------

// Regime schedules: HighFrequency floods 10 s out of every 60 s starting at
// 30 s; LowFrequencyPeriodic injects 0.5 s bursts every 5 s starting at 2.5 s.
inline std::vector<TimeWindow> default_windows(Regime regime, double duration) {
  std::vector<TimeWindow> out;
  const double first = regime == Regime::HighFrequency ? 30.0 : 2.5;
  const double length = regime == Regime::HighFrequency ? 10.0 : 0.5;
  const double every = regime == Regime::HighFrequency ? 60.0 : 5.0;
  for (double s = first; s + length <= duration + 1e-9; s += every) out.push_back({s, s + length});
  return out;
}

inline double default_rate(AttackKind kind, Regime regime) {
  switch (kind) {
    case AttackKind::DoS: return regime == Regime::HighFrequency ? 3000.0 : 100.0;
    case AttackKind::Fuzzing: return regime == Regime::HighFrequency ? 1000.0 : 100.0;
    case AttackKind::Replay: return 1.0;  // the slice sets the replay rate
  }
  return 1.0;
}

inline InjectionSpec default_injection(AttackKind kind, Regime regime, double duration, std::uint64_t seed) {
  InjectionSpec spec;
  spec.kind = kind;
  spec.regime = regime;
  spec.rate = default_rate(kind, regime);
  spec.active_windows = default_windows(regime, duration);
  spec.seed = seed;
  if (kind == AttackKind::Replay) {
    spec.replay_source = regime == Regime::HighFrequency ? TimeWindow{10.0, 20.0} : TimeWindow{1.0, 1.5};
  }
  return spec;
}

// corpus-A: 600 s of 20 periodic ids (4 x 5 ms, 15 x 10 ms, 1 x 100 ms),
// 10 % jitter, seed 42. The schedule is dominated by 10 ms ids, as on a
// powertrain bus.
inline TrafficProfile corpus_a_profile(double duration = 600.0, std::uint64_t seed = 42) {
  TrafficProfile p;
  p.duration = duration;
  p.seed = seed;
  std::vector<double> periods(4, 0.005);
  periods.insert(periods.end(), 15, 0.010);
  periods.push_back(0.100);
  const std::uint32_t first_id = 0x0A0;
  for (std::size_t i = 0; i < periods.size(); ++i) {
    IdSchedule s;
    s.can_id = first_id + static_cast<std::uint32_t>(i) * 0x10;
    s.period = periods[i];
    s.jitter_fraction = 0.1;
    s.payload = i % 3 == 0 ? PayloadKind::Counter : (i % 3 == 1 ? PayloadKind::Random : PayloadKind::Constant);
    if (s.payload == PayloadKind::Constant) s.constant_bytes = {0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88};
    // Golden-ratio phase spread keeps the ids from starting in lockstep.
    s.offset = detail::quantize_us(s.period * std::fmod(0.6180339887498949 * static_cast<double>(i), 1.0));
    p.id_table.push_back(std::move(s));
  }
  return p;
}

// Config (JSON) ---------------------------------------------------------------------

inline nlohmann::json to_json(const TrafficProfile& p) {
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& s : p.id_table) {
    nlohmann::json j{{"can_id", s.can_id}, {"period", s.period}, {"jitter", s.jitter_fraction}, {"offset", s.offset}};
    switch (s.payload) {
      case PayloadKind::Counter: j["payload"] = "counter"; break;
      case PayloadKind::Random: j["payload"] = "random"; break;
      case PayloadKind::Constant: {
        std::string hex;
        for (auto b : s.constant_bytes) detail::hex_byte(hex, b, false);
        j["payload"] = nlohmann::json{{"constant", hex}};
        break;
      }
    }
    ids.push_back(std::move(j));
  }
  return {{"duration", p.duration}, {"seed", p.seed}, {"ids", ids}};
}

namespace detail {
inline std::uint32_t json_id(const nlohmann::json& j) {
  if (j.is_string()) {
    std::uint64_t v = 0;
    if (!parse_hex(j.get<std::string>(), v)) throw Error("bad hex id " + j.dump());
    return static_cast<std::uint32_t>(v);
  }
  return j.get<std::uint32_t>();
}
}  // namespace detail

inline TrafficProfile profile_from_json(const nlohmann::json& j) {
  TrafficProfile p;
  p.duration = j.at("duration").get<double>();
  p.seed = j.value("seed", std::uint64_t{0});
  for (const auto& e : j.at("ids")) {
    IdSchedule s;
    s.can_id = detail::json_id(e.at("can_id"));
    s.period = e.at("period").get<double>();
    s.jitter_fraction = e.value("jitter", 0.0);
    s.offset = e.value("offset", 0.0);
    const auto& payload = e.contains("payload") ? e.at("payload") : nlohmann::json("counter");
    if (payload.is_string()) {
      const auto name = payload.get<std::string>();
      if (name == "counter") {
        s.payload = PayloadKind::Counter;
      } else if (name == "random") {
        s.payload = PayloadKind::Random;
      } else {
        throw Error("unknown payload generator '" + name + "'");
      }
    } else {
      s.payload = PayloadKind::Constant;
      const auto hex = payload.at("constant").get<std::string>();
      if (hex.size() % 2 != 0) throw Error("constant payload must be whole bytes");
      for (std::size_t i = 0; i < hex.size(); i += 2) {
        std::uint8_t b = 0;
        if (!detail::parse_byte(std::string_view(hex).substr(i, 2), b)) throw Error("bad constant payload");
        s.constant_bytes.push_back(b);
      }
    }
    p.id_table.push_back(std::move(s));
  }
  validate_profile(p);
  return p;
}

inline nlohmann::json to_json(const InjectionSpec& s) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : s.active_windows) windows.push_back({w.start, w.end});
  nlohmann::json j{{"kind", to_string(s.kind)},
                   {"regime", to_string(s.regime)},
                   {"rate", s.rate},
                   {"windows", windows},
                   {"seed", s.seed},
                   {"dos_id", s.dos_id},
                   {"timing", s.timing == InjectionTiming::Scatter ? "scatter" : "uniform"}};
  if (s.replay_source) j["replay_source"] = {s.replay_source->start, s.replay_source->end};
  return j;
}

// Missing fields fall back to the regime defaults for `duration`.
inline InjectionSpec injection_from_json(const nlohmann::json& j, double duration,
                                         std::optional<AttackKind> kind_override = std::nullopt,
                                         std::optional<Regime> regime_override = std::nullopt) {
  const AttackKind kind = kind_override ? *kind_override : parse_attack_kind(j.value("kind", std::string("dos")));
  const Regime regime = regime_override ? *regime_override : parse_regime(j.value("regime", std::string("high")));
  auto spec = default_injection(kind, regime, duration, j.value("seed", std::uint64_t{0}));
  if (j.contains("rate")) spec.rate = j.at("rate").get<double>();
  if (j.contains("windows")) {
    spec.active_windows.clear();
    for (const auto& w : j.at("windows")) spec.active_windows.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
  }
  if (j.contains("dos_id")) spec.dos_id = detail::json_id(j.at("dos_id"));
  if (j.contains("timing")) {
    const auto t = j.at("timing").get<std::string>();
    if (t == "scatter") {
      spec.timing = InjectionTiming::Scatter;
    } else if (t == "uniform") {
      spec.timing = InjectionTiming::Uniform;
    } else {
      throw Error("unknown injection timing '" + t + "'");
    }
  }
  if (j.contains("replay_source")) {
    const auto& r = j.at("replay_source");
    spec.replay_source = TimeWindow{r.at(0).get<double>(), r.at(1).get<double>()};
  }
  return spec;
}

// A generated corpus: frames plus the manifest of every parameter and seed.
struct Corpus {
  FrameStream frames;
  nlohmann::json manifest;
};

inline Corpus make_corpus(const TrafficProfile& profile, const std::optional<InjectionSpec>& injection) {
  Corpus c;
  c.frames = synthesize_baseline(profile);
  c.manifest = {{"profile", to_json(profile)}};
  if (injection) {
    c.frames = inject(std::move(c.frames), *injection, profile.duration);
    c.manifest["injection"] = to_json(*injection);
  }
  return c;
}

// corpus-A variant for one attack kind and regime; injection seed derives
// from the profile seed.
inline Corpus corpus_a(AttackKind kind, Regime regime, double duration = 600.0, std::uint64_t seed = 42) {
  const auto profile = corpus_a_profile(duration, seed);
  const auto spec = default_injection(kind, regime, duration,
                                      derive_seed(seed, 100 + static_cast<std::uint64_t>(kind) * 2 +
                                                            static_cast<std::uint64_t>(regime)));
  auto c = make_corpus(profile, spec);
  c.manifest["name"] = "corpus-A";
  return c;
}

}  // namespace canids
