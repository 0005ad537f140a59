#include <gtest/gtest.h>

#include "canids/segmentation.hpp"
#include "canids/traffic_sim.hpp"

using namespace canids;

namespace {

FrameStream at_times(std::initializer_list<double> ts, Flag flag = Flag::Normal) {
  FrameStream s;
  for (double t : ts) s.push_back(make_frame(t, 0x10, {1}, flag));
  return s;
}

std::vector<MicroSegment> blank_segments(std::size_t n) {
  std::vector<MicroSegment> segs(n);
  for (std::size_t i = 0; i < n; ++i) segs[i].index = i;
  return segs;
}

}  // namespace

TEST(MicroSegment, HandArithmetic) {
  const auto segs = micro_segment(at_times({0.000, 0.002, 0.004, 0.006, 0.008}), 0.01);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].num_packets, 5u);
  EXPECT_NEAR(segs[0].avg_time_gap, 0.002, 1e-15);
}

TEST(MicroSegment, EmptyBinSentinel) {
  const auto segs = micro_segment(at_times({0.0, 0.001, 0.025}), 0.01);
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[1].num_packets, 0u);
  EXPECT_EQ(segs[1].avg_time_gap, 0.01);
  EXPECT_EQ(segs[2].num_packets, 1u);
  EXPECT_EQ(segs[2].avg_time_gap, 0.01);
}

TEST(MicroSegment, RequiresNormalized) {
  EXPECT_THROW(micro_segment(at_times({1.0, 1.1}), 0.01), Error);
  EXPECT_THROW(micro_segment(at_times({0.0, 0.1}), 0.0), Error);
}

TEST(MicroSegment, ConservationAndTiling) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    FrameStream s{make_frame(0.0, 1, {})};
    double t = 0.0;
    const auto n = 1 + rng.below(3000);
    for (std::uint64_t i = 0; i < n; ++i) {
      t += rng.uniform() * 0.004;
      s.push_back(make_frame(t, 1, {}, rng.uniform() < 0.1 ? Flag::Injected : Flag::Normal));
    }
    for (double chunk : {0.01, 0.009, 0.0065}) {
      const auto segs = micro_segment(s, chunk);
      std::size_t total = 0;
      for (const auto& seg : segs) {
        total += seg.num_packets;
        EXPECT_GE(seg.avg_time_gap, 0.0);
        EXPECT_LE(seg.avg_time_gap, chunk + 1e-15);
        EXPECT_NEAR(seg.start, static_cast<double>(seg.index) * chunk, 1e-12);
      }
      EXPECT_EQ(total, s.size());
      // Bins cover [0, last]; equals ceil(duration / chunk) unless the
      // duration sits exactly on a bin edge.
      EXPECT_EQ(segs.size(), static_cast<std::size_t>(std::floor(s.back().timestamp / chunk + 1e-9)) + 1);
    }
  }
}

TEST(BuildWindows, FloorDivision) {
  const auto w = build_windows(blank_segments(250));
  EXPECT_EQ(w.size(), 2u);
  for (const auto& x : w) {
    EXPECT_EQ(x.counts.size(), 100u);
    EXPECT_EQ(x.gaps.size(), 100u);
    EXPECT_EQ(x.label, WindowLabel::AttackFree);
  }
}

TEST(BuildWindows, LabelRule) {
  auto segs = blank_segments(250);
  segs[137].any_injected = true;
  const auto w = build_windows(segs);
  EXPECT_EQ(w[0].label, WindowLabel::AttackFree);
  EXPECT_EQ(w[1].label, WindowLabel::Attack);
}

TEST(BuildWindows, Errors) {
  EXPECT_THROW(build_windows(blank_segments(250), 0), Error);
  EXPECT_THROW(build_windows(blank_segments(250), -5), Error);
  EXPECT_THROW(build_windows(blank_segments(50)), Error);
}

TEST(BuildWindows, LabelMonotoneUnderInjection) {
  const auto base = synthesize_baseline(corpus_a_profile(20.0, 3));
  InjectionSpec spec;
  spec.kind = AttackKind::DoS;
  spec.rate = 50.0;
  spec.active_windows = {{4.2, 4.4}};
  spec.seed = 1;
  const auto w1 = featurize(inject(base, spec), 0.01);
  spec.active_windows = {{4.2, 4.4}, {11.0, 12.5}};
  const auto w2 = featurize(inject(base, spec), 0.01);
  ASSERT_EQ(w1.size(), w2.size());
  for (std::size_t i = 0; i < w1.size(); ++i) {
    if (w1[i].label == WindowLabel::Attack) EXPECT_EQ(w2[i].label, WindowLabel::Attack);
  }
}

TEST(Vehicle, ChunkLengths) {
  EXPECT_EQ(chunk_len_for_vehicle("sonata"), 0.010);
  EXPECT_EQ(chunk_len_for_vehicle("kia"), 0.009);
  EXPECT_EQ(chunk_len_for_vehicle("tesla"), 0.0065);
  LogCapture capture;
  EXPECT_EQ(chunk_len_for_vehicle("trabant"), 0.010);
  EXPECT_EQ(capture.warnings().size(), 1u);
}

TEST(CorpusA, AttackWindowsCarryMorePackets) {
  const auto windows = featurize(corpus_a(AttackKind::DoS, Regime::HighFrequency, 120.0, 42).frames, 0.01);
  double attack = 0.0, free = 0.0;
  std::size_t na = 0, nf = 0;
  for (const auto& w : windows) {
    double m = 0.0;
    for (double c : w.counts) m += c;
    m /= static_cast<double>(w.counts.size());
    (w.label == WindowLabel::Attack ? attack : free) += m;
    (w.label == WindowLabel::Attack ? na : nf) += 1;
  }
  ASSERT_GT(na, 0u);
  ASSERT_GT(nf, 0u);
  EXPECT_GT(attack / static_cast<double>(na), free / static_cast<double>(nf));
}

TEST(WindowsCsv, RoundTrip) {
  const auto windows = featurize(corpus_a(AttackKind::DoS, Regime::LowFrequencyPeriodic, 12.0, 42).frames, 0.01);
  const auto text = write_windows_csv(windows);
  EXPECT_EQ(text.substr(0, 30), "window_index,label,counts_0,co");
  const auto back = parse_windows_csv(text);
  ASSERT_EQ(back.size(), windows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].window_index, windows[i].window_index);
    EXPECT_EQ(back[i].label, windows[i].label);
    EXPECT_EQ(back[i].counts, windows[i].counts);
    EXPECT_EQ(back[i].gaps, windows[i].gaps);
  }
}
