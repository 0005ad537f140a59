#include <gtest/gtest.h>

#include <filesystem>

#include "canids/evaluation.hpp"
#include "oracles.hpp"

using namespace canids;

namespace {

std::vector<ScoredWindow> scored(const std::vector<int>& flags, const std::vector<int>& labels) {
  std::vector<ScoredWindow> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    out.push_back({flags[i], static_cast<double>(flags[i]), labels[i] == 1 ? WindowLabel::Attack : WindowLabel::AttackFree});
  }
  return out;
}

std::vector<ScoredWindow> with_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  std::vector<int> flags, labels;
  auto add = [&](std::size_t n, int f, int l) {
    for (std::size_t i = 0; i < n; ++i) {
      flags.push_back(f);
      labels.push_back(l);
    }
  };
  add(tp, 1, 1);
  add(fp, 1, 0);
  add(tn, 0, 0);
  add(fn, 0, 1);
  return scored(flags, labels);
}

EvalSpec small_spec() {
  EvalSpec s;
  s.detection.cnn.residual_blocks = 1;
  s.detection.cnn.base_channels = 4;
  s.detection.cnn.max_epochs = 2;
  auto gen = [](AttackKind k, Regime r, double duration) {
    CorpusSource c;
    c.generate_kind = k;
    c.generate_regime = r;
    c.generate_duration = duration;
    return c;
  };
  s.corpora["dos_high"] = gen(AttackKind::DoS, Regime::HighFrequency, 120.0);
  s.corpora["fuzz_low"] = gen(AttackKind::Fuzzing, Regime::LowFrequencyPeriodic, 60.0);
  s.corpora["dos_low"] = gen(AttackKind::DoS, Regime::LowFrequencyPeriodic, 60.0);
  s.corpora["replay_low"] = gen(AttackKind::Replay, Regime::LowFrequencyPeriodic, 60.0);
  for (const std::string train : {"dos_high", "fuzz_low"}) {
    for (const std::string test : {"dos_high", "fuzz_low", "dos_low", "replay_low"}) {
      s.cells.push_back({train, test, "mixed"});
    }
  }
  return s;
}

const ReportTable& small_table() {
  static const ReportTable table = [] {
    LogCapture quiet;
    return cross_matrix(small_spec());
  }();
  return table;
}

}  // namespace

TEST(Confusion, AllCorrect) {
  const auto m = metrics(with_counts(40, 0, 60, 0));
  EXPECT_EQ(m.matrix.tp, 40u);
  EXPECT_EQ(m.matrix.tn, 60u);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(*m.f1, 1.0);
  EXPECT_DOUBLE_EQ(*m.recall, 1.0);
}

TEST(Confusion, AllAttackPredictions) {
  const auto m = metrics(with_counts(40, 60, 0, 0));
  EXPECT_DOUBLE_EQ(m.accuracy, 0.4);
  EXPECT_DOUBLE_EQ(*m.recall, 1.0);
  EXPECT_DOUBLE_EQ(*m.precision, 0.4);
  EXPECT_NEAR(*m.f1, 2.0 * 0.4 / 1.4, 1e-15);
}

TEST(Confusion, SymmetricCounts) {
  const auto m = metrics(with_counts(95, 5, 95, 5));
  EXPECT_DOUBLE_EQ(m.accuracy, 0.95);
  EXPECT_DOUBLE_EQ(*m.f1, 0.95);
  EXPECT_DOUBLE_EQ(*m.recall, 0.95);
}

TEST(Confusion, CountingOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> flags, labels;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    const auto n = 1 + rng.below(300);
    for (std::uint64_t i = 0; i < n; ++i) {
      const int f = rng.below(2) == 1 ? 1 : 0;
      const int l = rng.below(2) == 1 ? 1 : 0;
      flags.push_back(f);
      labels.push_back(l);
      if (f && l) ++tp;
      if (f && !l) ++fp;
      if (!f && !l) ++tn;
      if (!f && l) ++fn;
    }
    const auto m = confusion(scored(flags, labels));
    EXPECT_EQ(m.tp, tp);
    EXPECT_EQ(m.fp, fp);
    EXPECT_EQ(m.tn, tn);
    EXPECT_EQ(m.fn, fn);
    EXPECT_EQ(m.total(), n);
  }
}

TEST(Auc, PerfectRandomAndOracle) {
  std::vector<ScoredWindow> perfect;
  for (int i = 0; i < 50; ++i) perfect.push_back({0, 0.01 * i, WindowLabel::AttackFree});
  for (int i = 0; i < 50; ++i) perfect.push_back({1, 1.0 + 0.01 * i, WindowLabel::Attack});
  EXPECT_DOUBLE_EQ(*roc_auc(perfect), 1.0);

  Rng rng(9);
  std::vector<ScoredWindow> random;
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 4000; ++i) {
    const bool attack = rng.uniform() < 0.5;
    const double s = std::round(rng.uniform() * 50.0) / 50.0;  // ties on purpose
    random.push_back({0, s, attack ? WindowLabel::Attack : WindowLabel::AttackFree});
    scores.push_back(s);
    labels.push_back(attack ? 1 : 0);
  }
  const double auc = *roc_auc(random);
  EXPECT_NEAR(auc, 0.5, 0.05);
  EXPECT_NEAR(auc, oracle::auc_pairwise(scores, labels), 1e-12);

  auto cubed = random;
  for (auto& w : cubed) w.score = w.score * w.score * w.score;
  EXPECT_NEAR(*roc_auc(cubed), auc, 1e-12);
}

TEST(Auc, SingleClassAbsent) {
  const auto m = metrics(with_counts(10, 0, 0, 3));
  EXPECT_FALSE(m.auc.has_value());
  EXPECT_TRUE(roc_curve(with_counts(0, 2, 5, 0)).empty());
}

TEST(ScoreVerdicts, DetectorSets) {
  std::vector<Verdict> v(3);
  v[0].partial = true;
  v[0].pearson_flag = 1;
  v[0].pearson_rho = -0.9;
  v[0].final = WindowLabel::Attack;
  v[0].label = WindowLabel::Attack;
  v[1].cnn_flag = 1;
  v[1].cnn_score = 0.8;
  v[1].pearson_rho = 0.1;
  v[1].final = WindowLabel::Attack;
  v[1].label = WindowLabel::AttackFree;
  v[2].cnn_score = 0.2;
  v[2].label = WindowLabel::AttackFree;
  const auto hybrid = score_verdicts(v, DetectorSet::Hybrid);
  ASSERT_EQ(hybrid.size(), 3u);
  EXPECT_EQ(hybrid[0].score, 1.0);
  EXPECT_EQ(hybrid[1].score, 0.8);
  EXPECT_EQ(score_verdicts(v, DetectorSet::Cnn).size(), 2u);
  const auto pearson = score_verdicts(v, DetectorSet::Pearson);
  EXPECT_EQ(pearson[0].score, 0.9);
  EXPECT_EQ(pearson[2].score, -2.0);
  v[2].label.reset();
  EXPECT_THROW(score_verdicts(v, DetectorSet::Hybrid), Error);
}

TEST(CrossMatrix, EightCellsWithInDomainFlags) {
  const auto& table = small_table();
  ASSERT_EQ(table.cells.size(), 8u);
  for (const auto& c : table.cells) {
    EXPECT_FALSE(c.failed) << c.error;
    EXPECT_EQ(c.in_domain, c.spec.train == c.spec.test);
    EXPECT_EQ(c.results.size(), 3u);
    EXPECT_GT(c.test_windows, 0u);
    for (const auto& [set, m] : c.results) EXPECT_EQ(m.matrix.total(), c.verdicts.size());
  }
  EXPECT_EQ(table.cells[0].train_windows, 60u);
  EXPECT_EQ(table.cells[0].test_windows, 60u);
  EXPECT_EQ(table.cells[1].train_windows, 120u);
}

TEST(CrossMatrix, MissingCorpusFailsOneCell) {
  auto spec = small_spec();
  spec.cells = {{"fuzz_low", "dos_low", "low"}, {"fuzz_low", "nowhere", "low"}};
  spec.corpora["nowhere"].path = "/nonexistent/corpus.csv";
  LogCapture capture;
  const auto table = cross_matrix(spec);
  ASSERT_EQ(table.cells.size(), 2u);
  EXPECT_FALSE(table.cells[0].failed);
  EXPECT_TRUE(table.cells[1].failed);
  EXPECT_NE(table.cells[1].error.find("not found"), std::string::npos);
  EXPECT_FALSE(capture.warnings().empty());
  EXPECT_NE(report_csv(table).find("failed"), std::string::npos);
}

TEST(Report, ByteIdenticalAcrossRuns) {
  LogCapture quiet;
  auto spec = small_spec();
  spec.cells.resize(2);
  const auto a = emit_report(cross_matrix(spec), ReportFormat::Json);
  const auto b = emit_report(cross_matrix(spec), ReportFormat::Json);
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j.at("schema_version").get<int>(), 1);
  EXPECT_EQ(j.at("spec").at("seed").get<std::uint64_t>(), 42u);
  EXPECT_EQ(j.at("cells").size(), 2u);
}

TEST(Report, EmptyTable) {
  const ReportTable empty;
  const auto j = nlohmann::json::parse(emit_report(empty, ReportFormat::Json));
  EXPECT_TRUE(j.at("cells").empty());
  EXPECT_EQ(emit_report(empty, ReportFormat::Csv), "train,test,regime,in_domain,status,detector,tp,fp,tn,fn,f1,accuracy,recall,auc\n");
}

TEST(Report, PlotsForOneCell) {
  ReportTable table;
  table.cells.push_back(small_table().cells.front());
  const auto dir = std::filesystem::temp_directory_path() / "canids_eval_plots";
  std::filesystem::remove_all(dir);
  const auto written = emit_plots(table, dir.string());
  ASSERT_EQ(written.size(), 3u);
  for (const auto& p : written) {
    ASSERT_TRUE(std::filesystem::exists(p));
    EXPECT_EQ(read_text_file(p).rfind("<svg", 0), 0u);
  }
  std::filesystem::remove_all(dir);
}

TEST(Report, UnwritablePath) {
  EXPECT_THROW(emit_report(ReportTable{}, ReportFormat::Json, "/nonexistent-dir/sub/report.json"), Error);
}

TEST(EvalSpecJson, RoundTrip) {
  const auto spec = small_spec();
  const auto j = to_json(spec);
  const auto back = eval_spec_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.cells.size(), 8u);
  EXPECT_EQ(back.cells[0].detectors.size(), 3u);
}
