// canids: command-line front end for the CAN intrusion detection pipeline.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "canids/can_ingest.hpp"
#include "canids/cnn.hpp"
#include "canids/evaluation.hpp"
#include "canids/fusion.hpp"
#include "canids/pearson.hpp"
#include "canids/pipeline.hpp"
#include "canids/segmentation.hpp"
#include "canids/traffic_sim.hpp"
#include "canids/wavelet.hpp"

namespace {

using namespace canids;
namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

nlohmann::json config_json(const Globals& g) { return g.config.empty() ? nlohmann::json::object() : read_json(g.config); }

std::string require_out(const Globals& g, const std::string& what) {
  if (g.out.empty()) throw Error("--out is required (" + what + ")");
  return g.out;
}

// `detection` settings may sit at the top level or under "detection".
DetectionConfig detection_from(const nlohmann::json& j, const Globals& g) {
  DetectionConfig d;
  if (g.seed) d.cnn.seed = *g.seed;
  d = detection_config_from_json(j.contains("detection") ? j.at("detection") : j, d);
  if (g.seed) d.cnn.seed = *g.seed;
  return d;
}

void write_output(const std::string& path, const std::string& text) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_text_file(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAN bus intrusion detection: wavelet CNN plus correlation rule with OR voting"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--seed", g.seed, "Global seed (overrides the config)");
  app.add_option("--out", g.out, "Output path or directory");
  app.add_flag("-v,--verbose", g.verbose, "Print progress");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse a capture into native CSV");
  std::string ingest_input, ingest_format = "hcrl";
  bool ingest_stats = false, ingest_normalize = false;
  ingest->add_option("--in,--input", ingest_input, "Capture file")->required();
  ingest->add_flag("--normalize", ingest_normalize, "Shift timestamps so the first frame is at 0");
  ingest->add_option("--format", ingest_format, "hcrl | candump | native");
  ingest->add_flag("--stats", ingest_stats, "Print dataset statistics");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Synthesize attack-free traffic");
  double sim_duration = 600.0;
  std::string sim_profile;
  simulate->add_option("--profile", sim_profile, "Traffic profile JSON (default: corpus-A profile)");
  simulate->add_option("--duration", sim_duration, "Seconds of traffic (default profile only)");

  // inject
  auto* inject_cmd = app.add_subcommand("inject", "Inject attack frames into a stream");
  std::string inject_frames, inject_kind = "dos", inject_regime = "high", inject_spec;
  inject_cmd->add_option("--in,--frames", inject_frames, "Native CSV stream")->required();
  inject_cmd->add_option("--spec", inject_spec, "Injection spec JSON (missing fields use regime defaults)");
  inject_cmd->add_option("--kind", inject_kind, "dos | fuzz | replay");
  inject_cmd->add_option("--regime", inject_regime, "high | low");

  // featurize
  auto* featurize_cmd = app.add_subcommand("featurize", "Micro-segment a stream into feature windows");
  std::string feat_frames, feat_vehicle;
  std::optional<double> feat_chunk;
  std::int64_t feat_window = static_cast<std::int64_t>(kWindowLen);
  featurize_cmd->add_option("--in,--frames", feat_frames, "Native CSV stream")->required();
  featurize_cmd->add_option("--vehicle", feat_vehicle, "Vehicle tag selecting the bin width");
  featurize_cmd->add_option("--chunk-len", feat_chunk, "Bin width in seconds");
  featurize_cmd->add_option("--window-len", feat_window, "Segments per window");

  // transform
  auto* transform_cmd = app.add_subcommand("transform", "Wavelet-transform windows into a tensor archive");
  std::string tr_windows;
  std::optional<std::string> tr_wavelet, tr_mode;
  std::optional<std::size_t> tr_level, tr_sequence;
  transform_cmd->add_option("--in,--windows", tr_windows, "Windows CSV")->required();
  transform_cmd->add_option("--wavelet", tr_wavelet, "db8 | haar");
  transform_cmd->add_option("--level", tr_level, "Decomposition level");
  transform_cmd->add_option("--mode", tr_mode, "symmetric | periodization");
  transform_cmd->add_option("--sequence-len", tr_sequence, "Windows per model input (W)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the CNN on a tensor archive");
  std::string train_tensors;
  train_cmd->add_option("--tensors", train_tensors, "Tensor archive")->required();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Score a tensor archive with a trained model");
  std::string pred_model, pred_tensors;
  std::optional<double> pred_cutoff;
  predict_cmd->add_option("--model", pred_model, "Model file")->required();
  predict_cmd->add_option("--tensors", pred_tensors, "Tensor archive")->required();
  predict_cmd->add_option("--cutoff", pred_cutoff, "Score cutoff (flag when score >= cutoff)");

  // detect-pearson
  auto* pearson_cmd = app.add_subcommand("detect-pearson", "Correlation rule over feature windows");
  std::string pear_windows;
  std::optional<double> pear_threshold;
  pearson_cmd->add_option("--in,--windows", pear_windows, "Windows CSV")->required();
  pearson_cmd->add_option("--threshold", pear_threshold, "Flag when rho <= threshold");

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "OR-vote CNN and Pearson verdicts");
  std::string fuse_cnn, fuse_pearson, fuse_windows;
  fuse_cmd->add_option("--cnn", fuse_cnn, "CNN verdict CSV")->required();
  fuse_cmd->add_option("--pearson", fuse_pearson, "Pearson verdict CSV")->required();
  fuse_cmd->add_option("--windows", fuse_windows, "Windows CSV supplying labels");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Run a train/test cross matrix");
  std::string eval_spec;
  bool eval_plots = false;
  evaluate_cmd->add_option("--spec", eval_spec, "Evaluation spec JSON")->required();
  evaluate_cmd->add_flag("--plots", eval_plots, "Write SVG plots");

  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline from --config");
  auto* validate_cmd = app.add_subcommand("validate", "Check a pipeline config");

  CLI11_PARSE(app, argc, argv);

  set_log_sink([&g](LogLevel level, std::string_view msg) {
    if (level == LogLevel::Warning) {
      std::cerr << "warning: " << msg << '\n';
    } else if (level == LogLevel::Info && g.verbose) {
      std::cerr << msg << '\n';
    }
  });

  try {
    if (*ingest) {
      auto report = parse_log(ingest_input, parse_log_format(ingest_format));
      if (ingest_normalize) report.frames = normalize_timestamps(std::move(report.frames));
      for (const auto& e : report.errors) std::cerr << ingest_input << ":" << e.line << ": " << e.message << '\n';
      write_output(require_out(g, "frames CSV"), write_native_csv(report.frames));
      std::cout << report.frames.size() << " frames, " << report.rejected << " rejected\n";
      if (ingest_stats) {
        const auto s = dataset_stats(report.frames);
        std::cout << "unique_ids " << s.num_unique_ids << "\nduration " << format_double(s.duration) << "\ntotal_frames "
                  << s.total_frames << "\navg_time_gap " << format_double(s.avg_time_gap) << '\n';
      }
    } else if (*simulate) {
      const auto j = sim_profile.empty() ? config_json(g) : read_json(sim_profile);
      TrafficProfile profile = j.contains("profile") ? profile_from_json(j.at("profile"))
                               : j.contains("id_table") ? profile_from_json(j)
                                                        : corpus_a_profile(sim_duration, g.seed.value_or(42));
      if (g.seed) profile.seed = *g.seed;
      write_output(require_out(g, "frames CSV"), write_native_csv(synthesize_baseline(profile)));
    } else if (*inject_cmd) {
      auto frames = load_frames(inject_frames);
      const auto j = inject_spec.empty() ? config_json(g) : read_json(inject_spec);
      const auto duration = detail::infer_duration(frames, std::nullopt);
      auto spec = injection_from_json(j.contains("injection") ? j.at("injection") : j, duration.value_or(0.0),
                                      parse_attack_kind(inject_kind), parse_regime(inject_regime));
      if (g.seed) spec.seed = *g.seed;
      write_output(require_out(g, "frames CSV"), write_native_csv(inject(std::move(frames), spec, duration)));
    } else if (*featurize_cmd) {
      const double chunk = feat_chunk ? *feat_chunk : feat_vehicle.empty() ? kDefaultChunkLen : chunk_len_for_vehicle(feat_vehicle);
      write_output(require_out(g, "windows CSV"), write_windows_csv(featurize(load_frames(feat_frames), chunk, feat_window)));
    } else if (*transform_cmd) {
      auto d = detection_from(config_json(g), g);
      if (tr_wavelet) d.wavelet.wavelet = *tr_wavelet;
      if (tr_level) d.wavelet.levels = *tr_level;
      if (tr_mode) d.wavelet.mode = parse_boundary_mode(*tr_mode);
      if (tr_sequence) d.sequence_len = *tr_sequence;
      TensorArchive archive;
      archive.params = d.wavelet;
      const auto windows = load_windows(tr_windows);
      archive.window_len = windows.empty() ? d.window_len : windows.front().counts.size();
      archive.sequence_len = d.sequence_len;
      archive.data = transform_windows(windows, d.wavelet);
      const auto out = require_out(g, "tensor archive");
      if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
      save_tensor_archive(out, archive);
    } else if (*train_cmd) {
      const auto d = detection_from(config_json(g), g);
      const auto archive = load_tensor_archive(train_tensors);
      const auto model = train_detector(assemble_inputs(archive.data, archive.sequence_len), d.cnn);
      const auto out = require_out(g, "model file");
      if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
      save_model(out, model);
      std::cout << model.history.size() << " epochs, best epoch "
                << (model.best_epoch ? std::to_string(*model.best_epoch) : "none") << '\n';
    } else if (*predict_cmd) {
      const auto model = load_model(pred_model);
      const auto archive = load_tensor_archive(pred_tensors);
      const double cutoff = pred_cutoff.value_or(detection_from(config_json(g), g).cutoff);
      const auto inputs = assemble_inputs(archive.data, archive.sequence_len);
      write_output(require_out(g, "verdict CSV"), write_cnn_verdicts_csv(cnn_verdicts(model, inputs, cutoff)));
    } else if (*pearson_cmd) {
      auto cfg = detection_from(config_json(g), g).pearson;
      if (pear_threshold) cfg.threshold = *pear_threshold;
      if (const auto problems = validate(cfg); !problems.empty()) throw Error(problems.front());
      write_output(require_out(g, "verdict CSV"), write_pearson_csv(detect_all(load_windows(pear_windows), cfg)));
    } else if (*fuse_cmd) {
      auto pearson = parse_pearson_csv(read_text_file(fuse_pearson));
      if (!fuse_windows.empty()) {
        std::map<std::size_t, WindowLabel> labels;
        for (const auto& w : load_windows(fuse_windows)) labels[w.window_index] = w.label;
        for (auto& p : pearson) {
          if (auto it = labels.find(p.window_index); it != labels.end()) p.label = it->second;
        }
      }
      const auto cnn = parse_cnn_verdicts_csv(read_text_file(fuse_cnn));
      write_output(require_out(g, "verdict CSV"), write_verdicts_csv(fuse_streams(cnn, pearson)));
    } else if (*evaluate_cmd) {
      auto spec = eval_spec_from_json(read_json(eval_spec));
      if (g.seed) {
        spec.seed = *g.seed;
        spec.detection.cnn.seed = *g.seed;
      }
      const auto dir = require_out(g, "report directory");
      fs::create_directories(dir);
      const auto table = cross_matrix(spec);
      emit_report(table, ReportFormat::Json, (fs::path(dir) / "report.json").string());
      emit_report(table, ReportFormat::Csv, (fs::path(dir) / "report.csv").string());
      if (eval_plots) emit_plots(table, (fs::path(dir) / "plots").string(), spec.detection.pearson.threshold);
      std::size_t failed = 0;
      for (const auto& c : table.cells) failed += c.failed ? 1 : 0;
      std::cout << table.cells.size() << " cells, " << failed << " failed\n";
    } else if (*run_cmd || *validate_cmd) {
      if (g.config.empty()) throw Error("--config is required");
      auto cfg = pipeline_config_from_json(read_json(g.config));
      if (g.seed) {
        cfg.seed = *g.seed;
        cfg.source.generate_seed = *g.seed;
        cfg.detection.cnn.seed = *g.seed;
      }
      if (!g.out.empty()) cfg.output_dir = g.out;
      if (*validate_cmd) {
        const auto diags = validate_config(cfg);
        for (const auto& d : diags) {
          std::cout << (d.severity == Diagnostic::Severity::Error ? "error: " : "warning: ") << d.message << '\n';
        }
        if (diags.empty()) std::cout << "config ok\n";
        return has_errors(diags) ? 2 : 0;
      }
      const auto result = run_pipeline(cfg);
      for (const auto& s : result.stages) {
        std::cout << s.name << ": " << (s.status == StageStatus::Skipped ? "skipped" : "ran") << " (" << s.dir << ")\n";
      }
      if (result.exit_code != 0) {
        std::cerr << "error: " << result.error << '\n';
        return result.exit_code;
      }
      std::cout << "manifest: " << result.manifest_path << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
