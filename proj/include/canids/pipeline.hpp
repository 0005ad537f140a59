#pragma once

// End-to-end pipeline driven by one JSON config. Every stage writes into a
// directory named by the hash of its configuration and upstream hashes, so a
// rerun with the same inputs finds the finished stage and skips it.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "canids/can_ingest.hpp"
#include "canids/cnn.hpp"
#include "canids/common.hpp"
#include "canids/evaluation.hpp"
#include "canids/fusion.hpp"
#include "canids/pearson.hpp"
#include "canids/segmentation.hpp"
#include "canids/traffic_sim.hpp"
#include "canids/wavelet.hpp"

namespace canids {

inline constexpr std::string_view kOutputRootEnv = "CANIDS_OUTPUT_ROOT";
inline constexpr int kManifestVersion = 1;

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "canids-out";
  std::string name = "corpus";
  CorpusSource source;
  DetectionConfig detection;
  double train_fraction = 0.5;
  bool plots = false;

  PipelineConfig() { source.generate_kind = AttackKind::DoS; }
};

inline std::string default_output_root() {
  if (const char* env = std::getenv(std::string(kOutputRootEnv).c_str()); env && *env) return env;
  return "canids-out";
}

// Missing fields take defaults; the global seed feeds the corpus generator
// and the CNN unless they carry their own seeds.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.output_dir = default_output_root();
  c.seed = j.value("seed", c.seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.name = j.value("name", c.name);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.plots = j.value("plots", c.plots);
  c.source.generate_seed = c.seed;
  if (j.contains("source")) {
    const auto& s = j.at("source");
    c.source = corpus_source_from_json(s);
    if (s.contains("generate") && !s.at("generate").contains("seed")) c.source.generate_seed = c.seed;
  }
  c.detection.cnn.seed = c.seed;
  if (j.contains("detection")) c.detection = detection_config_from_json(j.at("detection"), c.detection);
  return c;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"name", c.name},
          {"source", to_json(c.source)},
          {"detection", to_json(c.detection)},
          {"train_fraction", c.train_fraction},
          {"plots", c.plots}};
}

struct Diagnostic {
  enum class Severity { Error, Warning } severity = Severity::Error;
  std::string message;
};

inline std::vector<Diagnostic> validate_config(const PipelineConfig& c) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string m) { out.push_back({Diagnostic::Severity::Error, std::move(m)}); };
  auto warning = [&](std::string m) { out.push_back({Diagnostic::Severity::Warning, std::move(m)}); };
  const auto& d = c.detection;

  for (auto& m : validate(d.pearson)) error(m);
  for (auto& m : validate(d.cnn)) error(m);
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) error("train_fraction must lie in (0, 1)");
  if (d.window_len < 2) error("window_len must be >= 2");
  if (d.sequence_len < 1) error("sequence_len must be >= 1");
  if (!(d.cutoff >= 0.0 && d.cutoff <= 1.0)) error("cutoff must lie in [0, 1]");
  if (d.wavelet.levels < 1) error("wavelet.levels must be >= 1");
  try {
    const auto filter = wavelet_by_name(d.wavelet.wavelet);
    if (d.window_len >= 2 && d.wavelet.levels >= 1 && d.window_len != kWindowLen) {
      const auto lengths = band_lengths(d.window_len, filter.lowpass.size(), d.wavelet.levels, d.wavelet.mode);
      warning("window_len " + std::to_string(d.window_len) + " changes the padded coefficient length to " +
              std::to_string(*std::max_element(lengths.begin(), lengths.end())) + " (derived lengths recomputed)");
    }
  } catch (const Error& e) {
    error(e.what());
  }
  if (c.source.chunk_len && !(*c.source.chunk_len > 0.0)) error("source.chunk_len must be > 0");
  if (!c.source.generate_kind && !c.source.path) error("source needs a path or a generator");
  if (c.source.generate_kind && d.window_len >= 2 && c.train_fraction > 0.0 && c.train_fraction < 1.0) {
    // W against corpus length: both halves of the split need a full sequence.
    const double chunk = resolve_chunk_len(c.source);
    const auto windows = static_cast<std::size_t>(c.source.generate_duration / chunk / static_cast<double>(d.window_len));
    const auto train_windows = static_cast<std::size_t>(std::floor(static_cast<double>(windows) * c.train_fraction));
    const auto test_windows = windows - train_windows;
    if (std::min(train_windows, test_windows) < d.sequence_len + 1) {
      error("corpus yields " + std::to_string(windows) + " windows; each split needs more than sequence_len = " +
            std::to_string(d.sequence_len));
    }
  }
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; });
}

// Stages ---------------------------------------------------------------------------

enum class StageStatus { Ran, Skipped };

struct StageRecord {
  std::string name;
  std::string hash;
  std::string dir;
  StageStatus status = StageStatus::Ran;
  std::map<std::string, std::string> outputs;  // file name -> sha256
};

struct PipelineResult {
  int exit_code = 0;
  std::optional<std::string> failed_stage;
  std::string error;
  std::vector<StageRecord> stages;
  std::string manifest_path;
};

class StageRunner {
public:
  explicit StageRunner(std::filesystem::path root) : root_(std::move(root)) {}

  // Runs `body` in the stage directory unless a finished stage with the
  // same hash exists. Finished outputs are verified against their recorded
  // digests before being reused.
  StageRecord run(const std::string& name, const nlohmann::json& key,
                  const std::function<std::vector<std::string>(const std::filesystem::path&)>& body) {
    StageRecord rec;
    rec.name = name;
    rec.hash = sha256_hex(nlohmann::json{{"stage", name}, {"key", key}}.dump());
    const auto dir = root_ / (name + "-" + rec.hash.substr(0, 16));
    rec.dir = dir.string();
    const auto marker = dir / "stage.json";
    if (std::filesystem::exists(marker)) {
      const auto done = nlohmann::json::parse(read_text_file(marker.string()));
      for (const auto& [file, digest] : done.at("outputs").items()) {
        const auto path = dir / file;
        if (!std::filesystem::exists(path)) throw Error("artifact missing: " + path.string());
        if (sha256_hex(read_text_file(path.string())) != digest.get<std::string>()) {
          throw Error("artifact corrupted or truncated: " + path.string());
        }
        rec.outputs[file] = digest.get<std::string>();
      }
      rec.status = StageStatus::Skipped;
      info("stage " + name + ": up to date, skipped");
      return rec;
    }
    std::filesystem::create_directories(dir);
    const auto files = body(dir);
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& f : files) {
      rec.outputs[f] = sha256_hex(read_text_file((dir / f).string()));
      outputs[f] = rec.outputs[f];
    }
    write_text_file(marker.string(), nlohmann::json{{"stage", name}, {"hash", rec.hash}, {"key", key}, {"outputs", outputs}}.dump(2));
    rec.status = StageStatus::Ran;
    info("stage " + name + ": done");
    return rec;
  }

private:
  std::filesystem::path root_;
};

namespace detail {

inline std::size_t split_point(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
}

inline std::string file_in(const StageRecord& r, const std::string& name) {
  return (std::filesystem::path(r.dir) / name).string();
}

}  // namespace detail

// ingest -> featurize -> transform -> train -> predict -> detect-pearson ->
// fuse -> evaluate. The first train_fraction of windows trains the CNN; the
// remainder is detected and scored.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult result;
  const auto diags = validate_config(cfg);
  for (const auto& d : diags) {
    if (d.severity == Diagnostic::Severity::Warning) warn(d.message);
  }
  if (has_errors(diags)) {
    result.exit_code = 2;
    result.failed_stage = "validate";
    for (const auto& d : diags) {
      if (d.severity == Diagnostic::Severity::Error) result.error += (result.error.empty() ? "" : "; ") + d.message;
    }
    return result;
  }

  const std::filesystem::path root(cfg.output_dir);
  std::filesystem::create_directories(root);
  StageRunner runner(root);
  const auto& det = cfg.detection;
  std::string stage = "ingest";
  try {
    const auto ingest = runner.run("ingest", to_json(cfg.source), [&](const std::filesystem::path& dir) {
      FrameStream frames;
      std::vector<std::string> files{"frames.csv"};
      if (cfg.source.generate_kind) {
        auto corpus = corpus_a(*cfg.source.generate_kind, cfg.source.generate_regime, cfg.source.generate_duration,
                               cfg.source.generate_seed);
        frames = std::move(corpus.frames);
        write_text_file((dir / "corpus.json").string(), corpus.manifest.dump(2));
        files.push_back("corpus.json");
      } else {
        auto report = parse_log(*cfg.source.path, cfg.source.format);
        for (const auto& e : report.errors) warn(*cfg.source.path + ":" + std::to_string(e.line) + ": " + e.message);
        frames = std::move(report.frames);
      }
      save_frames((dir / "frames.csv").string(), frames);
      return files;
    });
    result.stages.push_back(ingest);

    stage = "featurize";
    const nlohmann::json feat_key{{"upstream", ingest.hash}, {"chunk_len", resolve_chunk_len(cfg.source)}, {"window_len", det.window_len}};
    const auto featurize_rec = runner.run("featurize", feat_key, [&](const std::filesystem::path& dir) {
      const auto windows = featurize(load_frames(detail::file_in(ingest, "frames.csv")), resolve_chunk_len(cfg.source),
                                     static_cast<std::int64_t>(det.window_len));
      save_windows((dir / "windows.csv").string(), windows);
      return std::vector<std::string>{"windows.csv"};
    });
    result.stages.push_back(featurize_rec);
    const auto windows = load_windows(detail::file_in(featurize_rec, "windows.csv"));
    const std::size_t split = detail::split_point(windows.size(), cfg.train_fraction);

    stage = "transform";
    const nlohmann::json transform_key{{"upstream", featurize_rec.hash}, {"wavelet", to_json(det.wavelet)}, {"sequence_len", det.sequence_len}};
    const auto transform_rec = runner.run("transform", transform_key, [&](const std::filesystem::path& dir) {
      TensorArchive archive;
      archive.params = det.wavelet;
      archive.window_len = det.window_len;
      archive.sequence_len = det.sequence_len;
      archive.data = transform_windows(windows, det.wavelet);
      save_tensor_archive((dir / "tensors.bin").string(), archive);
      return std::vector<std::string>{"tensors.bin", "tensors.bin.json"};
    });
    result.stages.push_back(transform_rec);
    const auto archive = load_tensor_archive(detail::file_in(transform_rec, "tensors.bin"));
    auto slice = [&](std::size_t begin, std::size_t end) {
      LabeledTensors part;
      for (std::size_t i = begin; i < end; ++i) {
        part.tensors.push_back(archive.data.tensors[i]);
        part.window_indices.push_back(archive.data.window_indices[i]);
        part.labels.push_back(archive.data.labels[i]);
      }
      return part;
    };

    stage = "train";
    const nlohmann::json train_key{{"upstream", transform_rec.hash}, {"cnn", to_json(det.cnn)}, {"train_fraction", cfg.train_fraction}};
    const auto train_rec = runner.run("train", train_key, [&](const std::filesystem::path& dir) {
      const auto model = train_detector(assemble_inputs(slice(0, split), det.sequence_len), det.cnn);
      save_model((dir / "model.bin").string(), model);
      return std::vector<std::string>{"model.bin"};
    });
    result.stages.push_back(train_rec);

    stage = "predict";
    const nlohmann::json predict_key{{"model", train_rec.hash}, {"tensors", transform_rec.hash}, {"cutoff", det.cutoff},
                                     {"train_fraction", cfg.train_fraction}};
    const auto predict_rec = runner.run("predict", predict_key, [&](const std::filesystem::path& dir) {
      const auto model = load_model(detail::file_in(train_rec, "model.bin"));
      const auto inputs = assemble_inputs(slice(split, windows.size()), det.sequence_len);
      write_text_file((dir / "cnn_verdicts.csv").string(), write_cnn_verdicts_csv(cnn_verdicts(model, inputs, det.cutoff)));
      return std::vector<std::string>{"cnn_verdicts.csv"};
    });
    result.stages.push_back(predict_rec);

    stage = "detect-pearson";
    const nlohmann::json pearson_key{{"upstream", featurize_rec.hash}, {"pearson", to_json(det.pearson)}, {"train_fraction", cfg.train_fraction}};
    const auto pearson_rec = runner.run("detect-pearson", pearson_key, [&](const std::filesystem::path& dir) {
      const std::vector<FeatureWindow> test(windows.begin() + static_cast<std::ptrdiff_t>(split), windows.end());
      write_text_file((dir / "pearson.csv").string(), write_pearson_csv(detect_all(test, det.pearson)));
      return std::vector<std::string>{"pearson.csv"};
    });
    result.stages.push_back(pearson_rec);

    stage = "fuse";
    const nlohmann::json fuse_key{{"cnn", predict_rec.hash}, {"pearson", pearson_rec.hash}};
    const auto fuse_rec = runner.run("fuse", fuse_key, [&](const std::filesystem::path& dir) {
      auto pearson = parse_pearson_csv(read_text_file(detail::file_in(pearson_rec, "pearson.csv")));
      for (std::size_t i = 0; i < pearson.size(); ++i) pearson[i].label = windows[split + i].label;
      const auto cnn = parse_cnn_verdicts_csv(read_text_file(detail::file_in(predict_rec, "cnn_verdicts.csv")));
      write_text_file((dir / "verdicts.csv").string(), write_verdicts_csv(fuse_streams(cnn, pearson)));
      return std::vector<std::string>{"verdicts.csv"};
    });
    result.stages.push_back(fuse_rec);

    stage = "evaluate";
    const nlohmann::json eval_key{{"upstream", fuse_rec.hash}, {"plots", cfg.plots}};
    const auto eval_rec = runner.run("evaluate", eval_key, [&](const std::filesystem::path& dir) {
      auto verdicts = parse_verdicts_csv(read_text_file(detail::file_in(fuse_rec, "verdicts.csv")));
      std::erase_if(verdicts, [](const Verdict& v) { return v.partial; });
      ReportTable table;
      table.spec = to_json(cfg);
      table.spec.erase("output_dir");  // artifacts must not depend on where they are written
      CellReport cell;
      cell.spec = {cfg.name, cfg.name, cfg.source.generate_kind ? to_string(cfg.source.generate_regime) : ""};
      cell.in_domain = true;
      cell.train_windows = split;
      cell.test_windows = windows.size() - split;
      for (auto set : cell.spec.detectors) cell.results.emplace_back(set, metrics(verdicts, set));
      cell.verdicts = std::move(verdicts);
      table.cells.push_back(std::move(cell));
      emit_report(table, ReportFormat::Json, (dir / "report.json").string());
      emit_report(table, ReportFormat::Csv, (dir / "report.csv").string());
      std::vector<std::string> files{"report.json", "report.csv"};
      if (cfg.plots) {
        for (const auto& p : emit_plots(table, (dir / "plots").string(), det.pearson.threshold)) {
          files.push_back(std::filesystem::relative(p, dir).string());
        }
      }
      return files;
    });
    result.stages.push_back(eval_rec);
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.failed_stage = stage;
    result.error = "stage " + stage + " failed: " + e.what();
  }

  // The manifest is deterministic: resolved config, seeds and artifact digests.
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : result.stages) {
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& [f, h] : s.outputs) outputs[f] = h;
    stages.push_back({{"name", s.name}, {"hash", s.hash}, {"dir", std::filesystem::path(s.dir).filename().string()},
                      {"outputs", outputs}});
  }
  nlohmann::json manifest{{"manifest_version", kManifestVersion},
                          {"config", to_json(cfg)},
                          {"seeds", {{"global", cfg.seed}, {"corpus", cfg.source.generate_seed}, {"cnn", cfg.detection.cnn.seed}}},
                          {"stages", stages},
                          {"status", result.exit_code == 0 ? "ok" : "failed"}};
  if (result.failed_stage) manifest["failed_stage"] = *result.failed_stage;
  result.manifest_path = (root / "manifest.json").string();
  write_text_file(result.manifest_path, manifest.dump(2) + "\n");
  return result;
}

}  // namespace canids
