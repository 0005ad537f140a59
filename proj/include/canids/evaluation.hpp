#pragma once

// Scoring of verdict streams (confusion, F1, accuracy, ROC AUC), the
// train/test cross matrix, and report/plot emission.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "canids/can_ingest.hpp"
#include "canids/cnn.hpp"
#include "canids/common.hpp"
#include "canids/fusion.hpp"
#include "canids/pearson.hpp"
#include "canids/segmentation.hpp"
#include "canids/traffic_sim.hpp"
#include "canids/wavelet.hpp"

namespace canids {

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

enum class DetectorSet { Hybrid, Cnn, Pearson };

inline std::string to_string(DetectorSet d) {
  switch (d) {
    case DetectorSet::Hybrid: return "hybrid";
    case DetectorSet::Cnn: return "cnn";
    case DetectorSet::Pearson: return "pearson";
  }
  return "?";
}

inline DetectorSet parse_detector_set(std::string_view s) {
  if (s == "hybrid") return DetectorSet::Hybrid;
  if (s == "cnn") return DetectorSet::Cnn;
  if (s == "pearson") return DetectorSet::Pearson;
  throw Error("unknown detector set '" + std::string(s) + "'");
}

inline constexpr std::string_view kHybridScoreRule =
    "hybrid score = 1.0 on Pearson-flagged windows, otherwise the CNN score";

struct ScoredWindow {
  int flag = 0;
  double score = 0.0;
  WindowLabel label = WindowLabel::AttackFree;
};

// Flag and ranking score of one detector set. Partial windows have no CNN
// output and are skipped for the CNN set.
inline std::vector<ScoredWindow> score_verdicts(const std::vector<Verdict>& verdicts, DetectorSet set) {
  std::vector<ScoredWindow> out;
  out.reserve(verdicts.size());
  for (const auto& v : verdicts) {
    if (!v.label) throw Error("evaluation: window " + std::to_string(v.window_index) + " has no label");
    ScoredWindow s;
    s.label = *v.label;
    switch (set) {
      case DetectorSet::Hybrid:
        s.flag = v.final == WindowLabel::Attack ? 1 : 0;
        s.score = v.pearson_flag == 1 ? 1.0 : v.cnn_score.value_or(0.0);
        break;
      case DetectorSet::Cnn:
        if (v.partial || !v.cnn_score) continue;
        s.flag = v.cnn_flag;
        s.score = *v.cnn_score;
        break;
      case DetectorSet::Pearson:
        s.flag = v.pearson_flag;
        // More negative correlation ranks as more anomalous; undefined ranks lowest.
        s.score = v.pearson_rho ? -*v.pearson_rho : -2.0;
        break;
    }
    out.push_back(s);
  }
  return out;
}

inline ConfusionMatrix confusion(const std::vector<ScoredWindow>& windows) {
  ConfusionMatrix m;
  for (const auto& w : windows) {
    const bool attack = w.label == WindowLabel::Attack;
    if (w.flag == 1) {
      (attack ? m.tp : m.fp) += 1;
    } else {
      (attack ? m.fn : m.tn) += 1;
    }
  }
  return m;
}

inline ConfusionMatrix confusion(const std::vector<Verdict>& verdicts) {
  return confusion(score_verdicts(verdicts, DetectorSet::Hybrid));
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// ROC traced by lowering the cutoff through every distinct score.
inline std::vector<RocPoint> roc_curve(const std::vector<ScoredWindow>& windows) {
  std::size_t pos = 0;
  for (const auto& w : windows) pos += w.label == WindowLabel::Attack ? 1 : 0;
  const std::size_t neg = windows.size() - pos;
  if (pos == 0 || neg == 0) return {};
  std::vector<std::pair<double, bool>> ranked;
  ranked.reserve(windows.size());
  for (const auto& w : windows) ranked.emplace_back(w.score, w.label == WindowLabel::Attack);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < ranked.size();) {
    std::size_t j = i;
    while (j < ranked.size() && ranked[j].first == ranked[i].first) {
      (ranked[j].second ? tp : fp) += 1;
      ++j;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  return curve;
}

inline std::optional<double> roc_auc(const std::vector<ScoredWindow>& windows) {
  const auto curve = roc_curve(windows);
  if (curve.empty()) return std::nullopt;
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

struct MetricsReport {
  ConfusionMatrix matrix;
  std::optional<double> f1;
  double accuracy = 0.0;
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> auc;  // absent when only one class is present
};

inline MetricsReport metrics(const std::vector<ScoredWindow>& windows) {
  MetricsReport r;
  r.matrix = confusion(windows);
  const auto& m = r.matrix;
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  if (2 * m.tp + m.fp + m.fn > 0) r.f1 = 2.0 * d(m.tp) / d(2 * m.tp + m.fp + m.fn);
  if (m.total() > 0) r.accuracy = d(m.tp + m.tn) / d(m.total());
  if (m.tp + m.fn > 0) r.recall = d(m.tp) / d(m.tp + m.fn);
  if (m.tp + m.fp > 0) r.precision = d(m.tp) / d(m.tp + m.fp);
  r.auc = roc_auc(windows);
  return r;
}

inline MetricsReport metrics(const std::vector<Verdict>& verdicts, DetectorSet set = DetectorSet::Hybrid) {
  return metrics(score_verdicts(verdicts, set));
}

// Detection chain shared by the harness and the pipeline ----------------------------

struct DetectionConfig {
  WaveletParams wavelet;
  std::size_t window_len = kWindowLen;
  std::size_t sequence_len = kDefaultSequenceLen;
  PearsonConfig pearson;
  CnnConfig cnn;
  double cutoff = 0.5;
};

inline nlohmann::json to_json(const WaveletParams& p) {
  return {{"wavelet", p.wavelet}, {"mode", to_string(p.mode)}, {"levels", p.levels}};
}

inline WaveletParams wavelet_params_from_json(const nlohmann::json& j, WaveletParams p = {}) {
  p.wavelet = j.value("wavelet", p.wavelet);
  if (j.contains("mode")) p.mode = parse_boundary_mode(j.at("mode").get<std::string>());
  p.levels = j.value("levels", p.levels);
  return p;
}

inline nlohmann::json to_json(const PearsonConfig& c) {
  return {{"threshold", c.threshold},
          {"abstain_value", c.abstain_value},
          {"hysteresis", c.hysteresis},
          {"band_upper", c.band_upper},
          {"band_lower", c.band_lower}};
}

inline PearsonConfig pearson_config_from_json(const nlohmann::json& j, PearsonConfig c = {}) {
  c.threshold = j.value("threshold", c.threshold);
  c.abstain_value = j.value("abstain_value", c.abstain_value);
  c.hysteresis = j.value("hysteresis", c.hysteresis);
  c.band_upper = j.value("band_upper", c.band_upper);
  c.band_lower = j.value("band_lower", c.band_lower);
  return c;
}

inline std::vector<ModelInput> model_inputs(const std::vector<FeatureWindow>& windows, const DetectionConfig& cfg) {
  return assemble_inputs(transform_windows(windows, cfg.wavelet), cfg.sequence_len);
}

inline CnnModel train_detector(const std::vector<ModelInput>& inputs, CnnConfig cnn) {
  if (inputs.empty()) throw Error("train: no model inputs (fewer windows than the sequence length)");
  cnn.input = inputs.front().shape;
  return train(init_model(cnn), inputs, cnn);
}

inline std::vector<CnnVerdict> cnn_verdicts(const CnnModel& model, const std::vector<ModelInput>& inputs, double cutoff) {
  std::vector<CnnVerdict> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    const auto p = predict(model, in, cutoff);
    out.push_back({in.last_window, p.flag, p.score, in.label});
  }
  return out;
}

inline std::vector<Verdict> detect_windows(const CnnModel& model, const std::vector<FeatureWindow>& windows,
                                           const DetectionConfig& cfg) {
  return fuse_streams(cnn_verdicts(model, model_inputs(windows, cfg), cfg.cutoff), detect_all(windows, cfg.pearson));
}

// Cross matrix ---------------------------------------------------------------------

struct CorpusSource {
  std::optional<std::string> path;
  LogFormat format = LogFormat::Native;
  std::optional<std::string> vehicle;
  std::optional<double> chunk_len;
  // Synthetic corpus-A variant instead of a file.
  std::optional<AttackKind> generate_kind;
  Regime generate_regime = Regime::HighFrequency;
  double generate_duration = 600.0;
  std::uint64_t generate_seed = 42;
};

struct CellSpec {
  std::string train;
  std::string test;
  std::string regime;
  std::vector<DetectorSet> detectors{DetectorSet::Hybrid, DetectorSet::Cnn, DetectorSet::Pearson};
};

struct EvalSpec {
  std::uint64_t seed = 42;
  double train_fraction = 0.5;  // time split for in-domain cells
  DetectionConfig detection;
  std::map<std::string, CorpusSource> corpora;
  std::vector<CellSpec> cells;
};

inline constexpr int kReportSchemaVersion = 1;

inline double resolve_chunk_len(const CorpusSource& src) {
  if (src.chunk_len) return *src.chunk_len;
  if (src.vehicle) return chunk_len_for_vehicle(*src.vehicle);
  return kDefaultChunkLen;
}

inline FrameStream load_source_frames(const CorpusSource& src) {
  if (src.generate_kind) return corpus_a(*src.generate_kind, src.generate_regime, src.generate_duration, src.generate_seed).frames;
  if (!src.path) throw Error("corpus has neither a path nor a generator");
  if (!std::filesystem::exists(*src.path)) throw Error("corpus file not found: " + *src.path);
  auto report = parse_log(*src.path, src.format);
  if (report.frames.empty()) throw Error("corpus file has no valid frames: " + *src.path);
  return std::move(report.frames);
}

inline nlohmann::json to_json(const CorpusSource& s) {
  nlohmann::json j = nlohmann::json::object();
  if (s.generate_kind) {
    j["generate"] = {{"kind", to_string(*s.generate_kind)},
                     {"regime", to_string(s.generate_regime)},
                     {"duration", s.generate_duration},
                     {"seed", s.generate_seed}};
  }
  if (s.path) {
    j["path"] = *s.path;
    j["format"] = s.format == LogFormat::Hcrl ? "hcrl" : s.format == LogFormat::Candump ? "candump" : "native";
  }
  if (s.vehicle) j["vehicle"] = *s.vehicle;
  j["chunk_len"] = resolve_chunk_len(s);
  return j;
}

inline CorpusSource corpus_source_from_json(const nlohmann::json& j) {
  CorpusSource s;
  if (j.contains("generate")) {
    const auto& g = j.at("generate");
    s.generate_kind = parse_attack_kind(g.at("kind").get<std::string>());
    s.generate_regime = parse_regime(g.value("regime", std::string("high")));
    s.generate_duration = g.value("duration", s.generate_duration);
    s.generate_seed = g.value("seed", s.generate_seed);
  }
  if (j.contains("path")) s.path = j.at("path").get<std::string>();
  if (j.contains("format")) s.format = parse_log_format(j.at("format").get<std::string>());
  if (j.contains("vehicle")) s.vehicle = j.at("vehicle").get<std::string>();
  if (j.contains("chunk_len")) s.chunk_len = j.at("chunk_len").get<double>();
  return s;
}

inline nlohmann::json to_json(const DetectionConfig& d) {
  return {{"wavelet", to_json(d.wavelet)},
          {"window_len", d.window_len},
          {"sequence_len", d.sequence_len},
          {"pearson", to_json(d.pearson)},
          {"cnn", to_json(d.cnn)},
          {"cutoff", d.cutoff}};
}

inline DetectionConfig detection_config_from_json(const nlohmann::json& j, DetectionConfig d = {}) {
  if (j.contains("wavelet")) d.wavelet = wavelet_params_from_json(j.at("wavelet"), d.wavelet);
  d.window_len = j.value("window_len", d.window_len);
  d.sequence_len = j.value("sequence_len", d.sequence_len);
  if (j.contains("pearson")) d.pearson = pearson_config_from_json(j.at("pearson"), d.pearson);
  if (j.contains("cnn")) d.cnn = cnn_config_from_json(j.at("cnn"), d.cnn);
  d.cutoff = j.value("cutoff", d.cutoff);
  return d;
}

inline EvalSpec eval_spec_from_json(const nlohmann::json& j) {
  EvalSpec s;
  s.seed = j.value("seed", s.seed);
  s.detection.cnn.seed = s.seed;
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.detection = detection_config_from_json(j, s.detection);
  const auto corpora = j.value("corpora", nlohmann::json::object());
  for (const auto& [name, src] : corpora.items()) {
    s.corpora[name] = corpus_source_from_json(src);
  }
  for (const auto& c : j.value("cells", nlohmann::json::array())) {
    CellSpec cell;
    cell.train = c.at("train").get<std::string>();
    cell.test = c.at("test").get<std::string>();
    cell.regime = c.value("regime", std::string());
    if (c.contains("detectors")) {
      cell.detectors.clear();
      for (const auto& d : c.at("detectors")) cell.detectors.push_back(parse_detector_set(d.get<std::string>()));
    }
    s.cells.push_back(std::move(cell));
  }
  return s;
}

inline nlohmann::json to_json(const EvalSpec& s) {
  nlohmann::json corpora = nlohmann::json::object();
  for (const auto& [name, src] : s.corpora) corpora[name] = to_json(src);
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : s.cells) {
    nlohmann::json d = nlohmann::json::array();
    for (auto det : c.detectors) d.push_back(to_string(det));
    cells.push_back({{"train", c.train}, {"test", c.test}, {"regime", c.regime}, {"detectors", d}});
  }
  auto j = to_json(s.detection);
  j["seed"] = s.seed;
  j["train_fraction"] = s.train_fraction;
  j["corpora"] = corpora;
  j["cells"] = cells;
  return j;
}

struct CellReport {
  CellSpec spec;
  bool in_domain = false;
  bool failed = false;
  std::string error;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::vector<std::pair<DetectorSet, MetricsReport>> results;
  std::vector<Verdict> verdicts;  // scored (non-partial) test verdicts, kept for plots

  const MetricsReport& result(DetectorSet d) const {
    for (const auto& [set, m] : results) {
      if (set == d) return m;
    }
    throw Error("cell has no result for detector set " + to_string(d));
  }
};

struct ReportTable {
  nlohmann::json spec;  // resolved spec, seeds included
  std::vector<CellReport> cells;
};

// Runs every cell. A cell whose corpus is missing or whose training fails is
// marked failed and the run continues. In-domain cells (train == test) use a
// time split: the first train_fraction of windows trains, the rest tests.
inline ReportTable cross_matrix(const EvalSpec& spec) {
  ReportTable table;
  table.spec = to_json(spec);
  std::map<std::string, std::vector<FeatureWindow>> windows_cache;
  std::map<std::string, CnnModel> model_cache;

  auto windows_for = [&](const std::string& name) -> const std::vector<FeatureWindow>& {
    auto it = windows_cache.find(name);
    if (it != windows_cache.end()) return it->second;
    const auto src = spec.corpora.find(name);
    if (src == spec.corpora.end()) throw Error("corpus '" + name + "' is not defined");
    auto windows = featurize(load_source_frames(src->second), resolve_chunk_len(src->second),
                             static_cast<std::int64_t>(spec.detection.window_len));
    return windows_cache.emplace(name, std::move(windows)).first->second;
  };

  for (const auto& cell : spec.cells) {
    CellReport report;
    report.spec = cell;
    report.in_domain = cell.train == cell.test;
    try {
      const auto& train_all = windows_for(cell.train);
      const auto& test_all = windows_for(cell.test);
      std::vector<FeatureWindow> train_windows = train_all;
      std::vector<FeatureWindow> test_windows = test_all;
      std::string model_key = cell.train;
      if (report.in_domain) {
        const auto split = static_cast<std::size_t>(std::floor(static_cast<double>(train_all.size()) * spec.train_fraction));
        train_windows.assign(train_all.begin(), train_all.begin() + static_cast<std::ptrdiff_t>(split));
        test_windows.assign(train_all.begin() + static_cast<std::ptrdiff_t>(split), train_all.end());
        model_key += "#split";
      }
      report.train_windows = train_windows.size();
      report.test_windows = test_windows.size();
      auto model_it = model_cache.find(model_key);
      if (model_it == model_cache.end()) {
        info("training model for '" + model_key + "'");
        model_it = model_cache.emplace(model_key, train_detector(model_inputs(train_windows, spec.detection), spec.detection.cnn)).first;
      }
      auto verdicts = detect_windows(model_it->second, test_windows, spec.detection);
      // Every detector set is scored on the same base: windows with a CNN output.
      std::erase_if(verdicts, [](const Verdict& v) { return v.partial; });
      if (verdicts.empty()) throw Error("test corpus is shorter than one model input");
      for (auto set : cell.detectors) report.results.emplace_back(set, metrics(verdicts, set));
      report.verdicts = std::move(verdicts);
    } catch (const std::exception& e) {
      report.failed = true;
      report.error = e.what();
      report.results.clear();
      warn("cell " + cell.train + " -> " + cell.test + " failed: " + e.what());
    }
    table.cells.push_back(std::move(report));
  }
  return table;
}

// Reports --------------------------------------------------------------------------

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"confusion", {{"tp", m.matrix.tp}, {"fp", m.matrix.fp}, {"tn", m.matrix.tn}, {"fn", m.matrix.fn}}},
          {"f1", optional_json(m.f1)},
          {"accuracy", m.accuracy},
          {"recall", optional_json(m.recall)},
          {"precision", optional_json(m.precision)},
          {"auc", optional_json(m.auc)}};
}

inline nlohmann::json report_json(const ReportTable& table) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : table.cells) {
    nlohmann::json results = nlohmann::json::object();
    for (const auto& [set, m] : c.results) results[to_string(set)] = to_json(m);
    cells.push_back({{"train", c.spec.train},
                     {"test", c.spec.test},
                     {"regime", c.spec.regime},
                     {"in_domain", c.in_domain},
                     {"status", c.failed ? "failed" : "ok"},
                     {"error", c.error},
                     {"train_windows", c.train_windows},
                     {"test_windows", c.test_windows},
                     {"scored_windows", c.verdicts.size()},
                     {"results", results}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"hybrid_score_rule", std::string(kHybridScoreRule)},
          {"spec", table.spec},
          {"cells", cells}};
}

inline std::string report_csv(const ReportTable& table) {
  std::string out = "train,test,regime,in_domain,status,detector,tp,fp,tn,fn,f1,accuracy,recall,auc\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& c : table.cells) {
    const std::string head = c.spec.train + ',' + c.spec.test + ',' + c.spec.regime + ',' + (c.in_domain ? "1" : "0") + ',';
    if (c.failed) {
      out += head + "failed,,,,,,,,,\n";
      continue;
    }
    for (const auto& [set, m] : c.results) {
      out += head + "ok," + to_string(set) + ',' + std::to_string(m.matrix.tp) + ',' + std::to_string(m.matrix.fp) + ',' +
             std::to_string(m.matrix.tn) + ',' + std::to_string(m.matrix.fn) + ',' + opt(m.f1) + ',' +
             format_double(m.accuracy) + ',' + opt(m.recall) + ',' + opt(m.auc) + '\n';
    }
  }
  return out;
}

enum class ReportFormat { Json, Csv };

inline std::string emit_report(const ReportTable& table, ReportFormat format) {
  return format == ReportFormat::Json ? report_json(table).dump(2) + "\n" : report_csv(table);
}

inline void emit_report(const ReportTable& table, ReportFormat format, const std::string& path) {
  write_text_file(path, emit_report(table, format));
}

// Plots (SVG) ----------------------------------------------------------------------

namespace detail {

inline std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) +
         "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) + "\" font-family=\"sans-serif\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string svg_text(double x, double y, const std::string& text, int size = 12, const char* anchor = "middle") {
  return "<text x=\"" + format_fixed(x, 2) + "\" y=\"" + format_fixed(y, 2) + "\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\">" + text + "</text>\n";
}

inline std::string polyline(const std::vector<std::pair<double, double>>& pts, const char* color) {
  std::string out = "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts) out += format_fixed(x, 2) + "," + format_fixed(y, 2) + " ";
  out += "\"/>\n";
  return out;
}

inline std::string cell_stem(const CellReport& c) {
  std::string stem = c.spec.train + "__" + c.spec.test;
  for (char& ch : stem) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') ch = '_';
  }
  return stem;
}

}  // namespace detail

inline std::string confusion_svg(const ConfusionMatrix& m, const std::string& title) {
  const int cell = 120, left = 110, top = 60;
  std::string svg = detail::svg_open(left + 2 * cell + 20, top + 2 * cell + 50);
  svg += detail::svg_text(left + cell, 25, title, 14);
  const std::size_t values[2][2] = {{m.tn, m.fp}, {m.fn, m.tp}};
  const double peak = static_cast<double>(std::max({m.tn, m.fp, m.fn, m.tp, std::size_t{1}}));
  const char* names[2] = {"AttackFree", "Attack"};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double shade = static_cast<double>(values[r][c]) / peak;
      const int level = static_cast<int>(std::lround(255.0 - 200.0 * shade));
      svg += "<rect x=\"" + std::to_string(left + c * cell) + "\" y=\"" + std::to_string(top + r * cell) + "\" width=\"" +
             std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"rgb(" + std::to_string(level) + "," +
             std::to_string(level) + ",255)\" stroke=\"black\"/>\n";
      svg += detail::svg_text(left + c * cell + cell / 2.0, top + r * cell + cell / 2.0 + 5, std::to_string(values[r][c]), 16);
    }
    svg += detail::svg_text(left - 8, top + r * cell + cell / 2.0 + 4, names[r], 11, "end");
    svg += detail::svg_text(left + r * cell + cell / 2.0, top + 2 * cell + 18, names[r], 11);
  }
  svg += detail::svg_text(left + cell, top + 2 * cell + 40, "predicted", 12);
  svg += detail::svg_text(20, top + cell, "true", 12);
  svg += "</svg>\n";
  return svg;
}

inline std::string roc_svg(const std::vector<RocPoint>& curve, std::optional<double> auc, const std::string& title) {
  const double size = 300, left = 50, top = 40;
  std::string svg = detail::svg_open(static_cast<int>(left + size + 20), static_cast<int>(top + size + 50));
  svg += detail::svg_text(left + size / 2, 25, title + (auc ? " (AUC " + format_fixed(*auc, 4) + ")" : ""), 13);
  svg += "<rect x=\"" + format_fixed(left, 0) + "\" y=\"" + format_fixed(top, 0) + "\" width=\"" + format_fixed(size, 0) +
         "\" height=\"" + format_fixed(size, 0) + "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += detail::polyline({{left, top + size}, {left + size, top}}, "#bbbbbb");
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : curve) pts.emplace_back(left + p.fpr * size, top + (1.0 - p.tpr) * size);
  if (!pts.empty()) svg += detail::polyline(pts, "#c0392b");
  svg += detail::svg_text(left + size / 2, top + size + 35, "false positive rate", 12);
  svg += detail::svg_text(15, top + size / 2, "TPR", 12);
  svg += "</svg>\n";
  return svg;
}

// Correlation per window with the threshold line; attack windows shaded.
inline std::string rho_trace_svg(const std::vector<Verdict>& verdicts, double threshold, const std::string& title) {
  const double width = 600, height = 240, left = 50, top = 40;
  std::string svg = detail::svg_open(static_cast<int>(left + width + 20), static_cast<int>(top + height + 50));
  svg += detail::svg_text(left + width / 2, 25, title, 13);
  const double n = std::max<double>(1.0, static_cast<double>(verdicts.size()));
  auto xpos = [&](double i) { return left + i / n * width; };
  auto ypos = [&](double rho) { return top + (1.0 - rho) / 2.0 * height; };
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (verdicts[i].label == WindowLabel::Attack) {
      svg += "<rect x=\"" + format_fixed(xpos(static_cast<double>(i)), 2) + "\" y=\"" + format_fixed(top, 0) + "\" width=\"" +
             format_fixed(width / n, 3) + "\" height=\"" + format_fixed(height, 0) + "\" fill=\"#f5c6c6\"/>\n";
    }
  }
  svg += "<rect x=\"" + format_fixed(left, 0) + "\" y=\"" + format_fixed(top, 0) + "\" width=\"" + format_fixed(width, 0) +
         "\" height=\"" + format_fixed(height, 0) + "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += detail::polyline({{left, ypos(threshold)}, {left + width, ypos(threshold)}}, "#7f8c8d");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (verdicts[i].pearson_rho) pts.emplace_back(xpos(static_cast<double>(i) + 0.5), ypos(*verdicts[i].pearson_rho));
  }
  if (!pts.empty()) svg += detail::polyline(pts, "#2c3e50");
  svg += detail::svg_text(left - 6, ypos(1.0) + 4, "1", 11, "end");
  svg += detail::svg_text(left - 6, ypos(-1.0) + 4, "-1", 11, "end");
  svg += detail::svg_text(left - 6, ypos(threshold) + 4, format_fixed(threshold, 2), 11, "end");
  svg += detail::svg_text(left + width / 2, top + height + 35, "window", 12);
  svg += "</svg>\n";
  return svg;
}

// One confusion heatmap, one ROC curve (first detector set of the cell) and
// one correlation trace per successful cell. Returns the written paths.
inline std::vector<std::string> emit_plots(const ReportTable& table, const std::string& dir, double threshold = -0.7) {
  std::vector<std::string> written;
  std::filesystem::create_directories(dir);
  for (const auto& c : table.cells) {
    if (c.failed || c.results.empty()) continue;
    const auto stem = (std::filesystem::path(dir) / detail::cell_stem(c)).string();
    const auto& [set, m] = c.results.front();
    const auto title = c.spec.train + " -> " + c.spec.test + " [" + to_string(set) + "]";
    write_text_file(stem + "_confusion.svg", confusion_svg(m.matrix, title));
    write_text_file(stem + "_roc.svg", roc_svg(roc_curve(score_verdicts(c.verdicts, set)), m.auc, title));
    write_text_file(stem + "_rho.svg", rho_trace_svg(c.verdicts, threshold, c.spec.test + " correlation"));
    written.push_back(stem + "_confusion.svg");
    written.push_back(stem + "_roc.svg");
    written.push_back(stem + "_rho.svg");
  }
  return written;
}

}  // namespace canids
