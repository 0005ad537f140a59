#include <gtest/gtest.h>

#include <cstddef>
#include <filesystem>
#include <numeric>

#include "canids/wavelet.hpp"
#include "fixtures/pywt_db8_reference.inc"
#include "oracles.hpp"

using namespace canids;

namespace {

std::vector<double> random_signal(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  const double scale = std::pow(10.0, rng.uniform(-2.0, 3.0));
  for (auto& v : x) v = scale * (2.0 * rng.uniform() - 1.0);
  return x;
}

std::vector<double> flatten(const WaveletBands& b) {
  std::vector<double> out;
  for (const auto& r : b.rows()) out.insert(out.end(), r.begin(), r.end());
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

FeatureWindow ramp_window(std::size_t index, double offset, WindowLabel label = WindowLabel::AttackFree) {
  FeatureWindow w;
  w.window_index = index;
  w.label = label;
  for (std::size_t k = 0; k < kWindowLen; ++k) {
    w.counts.push_back(offset + static_cast<double>(k % 7));
    w.gaps.push_back(0.001 * static_cast<double>((k * 13) % 11) + 0.0005);
  }
  return w;
}

}  // namespace

TEST(Filter, Db8Sums) {
  const auto f = daubechies8();
  ASSERT_EQ(f.size(), 16u);
  EXPECT_NEAR(std::accumulate(f.lowpass.begin(), f.lowpass.end(), 0.0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(std::accumulate(f.highpass.begin(), f.highpass.end(), 0.0), 0.0, 1e-12);
  double energy = 0.0;
  for (double h : f.lowpass) energy += h * h;
  EXPECT_NEAR(energy, 1.0, 1e-12);
}

TEST(Filter, MatchesPywtCoefficients) {
  const auto f = daubechies8();
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(f.lowpass[i], kPywtDb8DecLo[i], 1e-15);
    EXPECT_NEAR(f.highpass[i], kPywtDb8DecHi[i], 1e-15);
  }
}

TEST(Filter, UnknownNames) {
  EXPECT_THROW(wavelet_by_name("sym4"), Error);
  EXPECT_THROW(parse_boundary_mode("zero"), Error);
  EXPECT_EQ(wavelet_by_name("db1").name, "haar");
}

TEST(Dwt, BandLengthsForWindow) {
  const std::vector<std::size_t> expected{15, 15, 15, 15, 15, 16, 17, 20, 25, 36, 57};
  EXPECT_EQ(band_lengths(100, 16, 10), expected);
  std::vector<double> x(100, 1.0);
  LogCapture quiet;
  EXPECT_EQ(wavedec(x, daubechies8()).lengths(), expected);
}

TEST(Dwt, SingleLevelMatchesPywt) {
  const std::vector<double> x(kPywtInputs[0], kPywtInputs[0] + 100);
  const auto [a, d] = dwt_step(x, daubechies8());
  ASSERT_EQ(a.size(), std::size(kPywtSingleLevelApprox));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], kPywtSingleLevelApprox[i], 1e-12);
    EXPECT_NEAR(d[i], kPywtSingleLevelDetail[i], 1e-12);
  }
}

TEST(Dwt, HaarByHand) {
  const std::vector<double> x{1, 2, 3, 4};
  const auto [a, d] = dwt_step(x, haar());
  ASSERT_EQ(a.size(), 2u);
  EXPECT_NEAR(a[0], 3.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(a[1], 7.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(d[0], -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(d[1], -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(a[0], kPywtHaar1234Approx[0], 1e-15);
  EXPECT_NEAR(d[1], kPywtHaar1234Detail[1], 1e-15);
}

TEST(Wavedec, MatchesPywtFixture) {
  LogCapture quiet;
  for (std::size_t s = 0; s < kPywtSignals; ++s) {
    const std::vector<double> x(kPywtInputs[s], kPywtInputs[s] + 100);
    const auto got = flatten(wavedec(x, daubechies8()));
    ASSERT_EQ(got.size(), 246u);
    const std::vector<double> want(kPywtWavedec[s], kPywtWavedec[s] + 246);
    double scale = 1.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    EXPECT_LE(max_abs_diff(got, want), 1e-9 * scale) << "signal " << s;
  }
}

TEST(Wavedec, MatchesOracle) {
  LogCapture quiet;
  const auto f = daubechies8();
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_signal(rng, 100);
    const auto got = flatten(wavedec(x, f));
    std::vector<double> want;
    for (const auto& band : oracle::wavedec_symmetric(x, f.lowpass, f.highpass, 10)) {
      want.insert(want.end(), band.begin(), band.end());
    }
    ASSERT_EQ(got.size(), want.size());
    double scale = 1.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    EXPECT_LE(max_abs_diff(got, want), 1e-9 * scale);
  }
}

TEST(Wavedec, ConstantSignalHasNoDetail) {
  LogCapture quiet;
  for (double c : {0.0, 1.0, -3.5, 250.0}) {
    const std::vector<double> x(100, c);
    const auto b = wavedec(x, daubechies8());
    for (const auto& d : b.details) {
      for (double v : d) EXPECT_LT(std::abs(v), 1e-10);
    }
  }
}

TEST(Wavedec, PerfectReconstruction) {
  LogCapture quiet;
  Rng rng(77);
  for (std::size_t n : {100u, 64u, 37u, 1000u}) {
    const auto x = random_signal(rng, n);
    for (std::size_t levels : {1u, 3u, 10u}) {
      const auto back = waverec(wavedec(x, daubechies8(), BoundaryMode::Symmetric, levels), daubechies8());
      ASSERT_EQ(back.size(), x.size());
      double scale = 1.0;
      for (double v : x) scale = std::max(scale, std::abs(v));
      EXPECT_LE(max_abs_diff(back, x), 1e-9 * scale) << "n=" << n << " levels=" << levels;
    }
  }
}

TEST(Wavedec, LevelErrorsAndWarning) {
  const std::vector<double> x(100, 2.0);
  EXPECT_THROW(wavedec(x, daubechies8(), BoundaryMode::Symmetric, 0), Error);
  EXPECT_THROW(wavedec(std::vector<double>{}, daubechies8()), Error);
  EXPECT_EQ(max_meaningful_level(100, 16), 2u);
  detail::level_warning_issued() = false;
  LogCapture capture;
  wavedec(x, daubechies8());
  wavedec(x, daubechies8());
  EXPECT_EQ(capture.warnings().size(), 1u);
}

TEST(Wavedec, PeriodizationPreservesEnergy) {
  Rng rng(8);
  LogCapture quiet;
  auto energy = [](const std::vector<double>& v) {
    double e = 0.0;
    for (double x : v) e += x * x;
    return e;
  };
  const auto x100 = random_signal(rng, 100);
  EXPECT_NEAR(energy(flatten(wavedec(x100, daubechies8(), BoundaryMode::Periodization, 2))), energy(x100),
              1e-9 * energy(x100));
  const auto x1024 = random_signal(rng, 1024);
  for (std::size_t levels : {1u, 3u, 5u, 10u}) {
    EXPECT_NEAR(energy(flatten(wavedec(x1024, daubechies8(), BoundaryMode::Periodization, levels))), energy(x1024),
                1e-9 * energy(x1024));
  }
}

TEST(Scaling, MinMax) {
  WaveletBands b;
  b.approximation = {2, 4, 6};
  b.details = {{5, 5, 5}};
  b.levels = 1;
  const auto s = scale_minmax(b);
  EXPECT_EQ(s.bands.approximation, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(s.bands.details[0], (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(s.ranges[0].min, 2.0);
  EXPECT_EQ(s.ranges[0].max, 6.0);
}

TEST(Tensor, PaddingLayout) {
  LogCapture quiet;
  const auto t = window_tensor(ramp_window(0, 1.0));
  EXPECT_EQ(t.channels, 2u);
  EXPECT_EQ(t.rows, 11u);
  EXPECT_EQ(t.pad_len, 57u);
  EXPECT_EQ(t.values.size(), 2u * 11u * 57u);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t k = 15; k < 57; ++k) EXPECT_EQ(t.at(c, 0, k), 0.0);
    for (std::size_t r = 0; r < 11; ++r) {
      for (std::size_t k = 0; k < t.band_lengths[r]; ++k) {
        EXPECT_GE(t.at(c, r, k), 0.0);
        EXPECT_LE(t.at(c, r, k), 1.0);
      }
    }
  }
  const auto filter = daubechies8();
  const auto w = ramp_window(0, 1.0);
  const auto expected = scale_minmax(wavedec(w.gaps, filter)).bands.rows();
  EXPECT_EQ(unpad_channel(t, 1), expected);
}

TEST(Tensor, AssembleInputs) {
  LogCapture quiet;
  std::vector<FeatureWindow> windows;
  for (std::size_t i = 0; i < 12; ++i) {
    windows.push_back(ramp_window(i, static_cast<double>(i), i == 11 ? WindowLabel::Attack : WindowLabel::AttackFree));
  }
  const auto data = transform_windows(windows);
  const auto inputs = assemble_inputs(data, 10);
  ASSERT_EQ(inputs.size(), 3u);
  EXPECT_EQ(inputs[0].shape, (InputShape{20, 11, 57}));
  EXPECT_EQ(inputs[0].first_window, 0u);
  EXPECT_EQ(inputs[2].last_window, 11u);
  EXPECT_EQ(inputs[2].label, WindowLabel::Attack);
  EXPECT_EQ(inputs[1].label, WindowLabel::AttackFree);
  // Plane 2 of input 1 is channel 0 of window 2.
  const std::size_t plane = 11 * 57;
  EXPECT_TRUE(std::equal(data.tensors[2].values.begin(), data.tensors[2].values.begin() + plane,
                         inputs[1].values.begin() + 2 * plane));

  const auto single = assemble_inputs(data, 1);
  ASSERT_EQ(single.size(), 12u);
  EXPECT_EQ(single[5].values, data.tensors[5].values);
  EXPECT_EQ(single[5].shape, (InputShape{2, 11, 57}));
  EXPECT_THROW(assemble_inputs(data, 0), Error);
  EXPECT_TRUE(assemble_inputs(data, 13).empty());
}

TEST(Archive, RoundTripAndCorruption) {
  LogCapture quiet;
  std::vector<FeatureWindow> windows;
  for (std::size_t i = 0; i < 4; ++i) windows.push_back(ramp_window(i, 0.5 * static_cast<double>(i)));
  windows[2].label = WindowLabel::Attack;
  TensorArchive archive;
  archive.data = transform_windows(windows);
  const auto dir = std::filesystem::temp_directory_path() / "canids_wavelet_archive";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "tensors.bin").string();
  save_tensor_archive(path, archive);
  const auto back = load_tensor_archive(path);
  ASSERT_EQ(back.data.tensors.size(), 4u);
  EXPECT_EQ(back.data.labels, archive.data.labels);
  EXPECT_EQ(back.data.window_indices, archive.data.window_indices);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.data.tensors[i].values, archive.data.tensors[i].values);
    EXPECT_EQ(back.data.tensors[i].band_lengths, archive.data.tensors[i].band_lengths);
    EXPECT_EQ(back.data.tensors[i].scaling.size(), 2u);
    EXPECT_EQ(back.data.tensors[i].scaling[0][3].max, archive.data.tensors[i].scaling[0][3].max);
  }

  auto payload = read_text_file(path);
  write_text_file(path, payload.substr(0, payload.size() - 8));
  try {
    load_tensor_archive(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("checksum mismatch"), std::string::npos);
  }
  payload[100] ^= 0x01;
  write_text_file(path, payload);
  EXPECT_THROW(load_tensor_archive(path), Error);
  std::filesystem::remove_all(dir);
}
