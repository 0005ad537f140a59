#include <gtest/gtest.h>

#include <filesystem>

#include "canids/cnn.hpp"

using namespace canids;

namespace {

CnnConfig small_config() {
  CnnConfig c;
  c.residual_blocks = 2;
  c.base_channels = 4;
  c.input = {2, 5, 8};
  c.seed = 3;
  return c;
}

ModelInput random_input(const InputShape& shape, std::uint64_t seed, WindowLabel label = WindowLabel::AttackFree) {
  Rng rng(seed);
  ModelInput in;
  in.shape = shape;
  in.values.resize(shape.size());
  for (auto& v : in.values) v = rng.uniform();
  in.label = label;
  return in;
}

ModelInput constant_input(const InputShape& shape, double value, WindowLabel label) {
  ModelInput in;
  in.shape = shape;
  in.values.assign(shape.size(), value);
  in.label = label;
  return in;
}

// 32 zero (AttackFree) and 32 one (Attack) inputs, interleaved so the
// ordered validation tail holds both classes.
std::vector<ModelInput> toy_set(const InputShape& shape) {
  std::vector<ModelInput> data;
  for (int i = 0; i < 32; ++i) {
    data.push_back(constant_input(shape, 0.0, WindowLabel::AttackFree));
    data.push_back(constant_input(shape, 1.0, WindowLabel::Attack));
  }
  return data;
}

double silu_ref(double z) { return z / (1.0 + std::exp(-z)); }

}  // namespace

TEST(CnnInit, DeterministicBySeed) {
  const auto a = init_model(small_config());
  const auto b = init_model(small_config());
  EXPECT_EQ(a.params, b.params);
  auto other = small_config();
  other.seed = 4;
  EXPECT_NE(a.params, init_model(other).params);
}

TEST(CnnInit, ConfigErrors) {
  auto c = small_config();
  c.residual_blocks = 0;
  EXPECT_THROW(init_model(c), Error);
  c = small_config();
  c.kernel_h = 2;
  EXPECT_THROW(init_model(c), Error);
}

TEST(CnnInit, LayoutNames) {
  const auto m = init_model(small_config());
  EXPECT_EQ(m.tensor("block0.shortcut.weight").dims, (std::vector<std::size_t>{4, 2}));
  EXPECT_THROW(m.tensor("block1.shortcut.weight"), Error);
  EXPECT_EQ(m.tensor("block1.conv2.weight").dims, (std::vector<std::size_t>{4, 4, 3, 3}));
  EXPECT_EQ(m.tensor("head.weight").dims, (std::vector<std::size_t>{4}));
  // 2 blocks: (4*2*9+4) + (4*4*9+4) + 4*2 + (4*4*9+4) + (4*4*9+4), head 4+1.
  EXPECT_EQ(parameter_count(m), 76u + 148u + 8u + 148u + 148u + 5u);
}

TEST(CnnForward, DefaultShapeScoreInOpenInterval) {
  const auto m = init_model(CnnConfig{});
  const auto in = random_input({20, 11, 57}, 1);
  const double s = forward(m, in);
  EXPECT_TRUE(std::isfinite(s));
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
  const auto zero = constant_input({20, 11, 57}, 0.0, WindowLabel::AttackFree);
  EXPECT_EQ(forward(m, zero), forward(m, zero));
}

TEST(CnnForward, ShapeMismatch) {
  const auto m = init_model(small_config());
  EXPECT_THROW(forward(m, random_input({2, 5, 9}, 1)), Error);
}

TEST(CnnForward, ShortcutAblationChangesOutput) {
  const auto m = init_model(small_config());
  const auto in = random_input(m.config.input, 2);
  EXPECT_NE(logit(m, in), logit(m, in, ForwardOptions{false}));
}

TEST(CnnForward, ZeroConvPathIsShortcutComposition) {
  auto m = init_model(small_config());
  for (const auto& t : m.tensors) {
    if (t.name.find(".conv") != std::string::npos) {
      std::fill_n(m.params.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), 0.0);
    }
  }
  const auto in = random_input(m.config.input, 5);
  const std::size_t plane = 5 * 8;
  const std::size_t pw = m.offset_of("block0.shortcut.weight");
  std::vector<double> h(4 * plane);
  for (std::size_t co = 0; co < 4; ++co) {
    for (std::size_t p = 0; p < plane; ++p) {
      const double u = m.params[pw + co * 2] * in.values[p] + m.params[pw + co * 2 + 1] * in.values[plane + p];
      h[co * plane + p] = silu_ref(silu_ref(u));
    }
  }
  double z = m.params[m.offset_of("head.bias")];
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (std::size_t p = 0; p < plane; ++p) mean += h[c * plane + p];
    z += m.params[m.offset_of("head.weight") + c] * mean / static_cast<double>(plane);
  }
  EXPECT_NEAR(logit(m, in), z, 1e-12);
}

TEST(CnnGradient, CentralDifferences) {
  const auto m = init_model(small_config());
  for (std::uint64_t draw = 0; draw < 5; ++draw) {
    const auto in = random_input(m.config.input, 10 + draw);
    GradientCheckOptions opt;
    opt.seed = draw;
    const auto r = gradient_check(m, in, draw % 2 == 0 ? 1.0 : 0.0, opt);
    EXPECT_EQ(r.checked, 200u);
    EXPECT_LT(r.max_relative_error, 1e-4) << "draw " << draw;
  }
}

TEST(CnnGradient, ZeroInputAndAblation) {
  auto m = init_model(small_config());
  const auto zero = constant_input(m.config.input, 0.0, WindowLabel::Attack);
  EXPECT_LT(gradient_check(m, zero, 1.0).max_relative_error, 1e-4);
  // The analytic gradient of a trained-like state with non-zero biases.
  for (const auto& t : m.tensors) {
    if (t.name.find("bias") != std::string::npos) {
      for (std::size_t i = 0; i < t.size(); ++i) m.params[t.offset + i] = 0.1 * static_cast<double>(i + 1);
    }
  }
  EXPECT_LT(gradient_check(m, random_input(m.config.input, 99), 0.0).max_relative_error, 1e-4);
}

TEST(CnnGradient, ErrorShrinksQuadratically) {
  const auto m = init_model(small_config());
  const auto in = random_input(m.config.input, 21);
  GradientCheckOptions coarse;
  coarse.step = 1e-2;
  coarse.abs_tolerance = 0.0;
  GradientCheckOptions fine = coarse;
  fine.step = 1e-3;
  const double e_coarse = gradient_check(m, in, 1.0, coarse).max_abs_error;
  const double e_fine = gradient_check(m, in, 1.0, fine).max_abs_error;
  // O(h^2): a tenfold smaller step cuts the error by about 100.
  EXPECT_GT(e_coarse / e_fine, 30.0);
  EXPECT_LT(e_coarse / e_fine, 300.0);
}

TEST(CnnGradient, FivePointStencil) {
  const auto m = init_model(small_config());
  const auto in = random_input(m.config.input, 22);
  GradientCheckOptions central;
  central.step = 1e-2;
  central.abs_tolerance = 0.0;
  GradientCheckOptions five = central;
  five.five_point = true;
  const auto c = gradient_check(m, in, 0.0, central);
  const auto f = gradient_check(m, in, 0.0, five);
  EXPECT_LT(f.max_abs_error, c.max_abs_error / 100.0);  // O(h^4) against O(h^2)
  five.step = 1e-3;
  EXPECT_LT(gradient_check(m, in, 0.0, five).max_relative_error, 1e-4);
}

TEST(CnnTrain, SeparableToySet) {
  auto cfg = small_config();
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 8;
  cfg.max_epochs = 50;
  const auto data = toy_set(cfg.input);
  const auto m = train(init_model(cfg), data, cfg);
  std::size_t correct = 0;
  for (const auto& in : data) {
    correct += (predict(m, in).flag == 1) == (in.label == WindowLabel::Attack) ? 1 : 0;
  }
  EXPECT_EQ(correct, data.size());
  ASSERT_GE(m.history.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LE(m.history[e].train_loss, m.history[e - 1].train_loss + 1e-6);
  ASSERT_TRUE(m.best_epoch.has_value());
}

TEST(CnnTrain, PatienceZeroStopsAtFirstNonImprovement) {
  auto cfg = small_config();
  cfg.learning_rate = 0.5;  // large steps so validation loss stalls early
  cfg.early_stop_patience = 0;
  cfg.max_epochs = 30;
  const auto data = toy_set(cfg.input);
  const auto m = train(init_model(cfg), data, cfg);
  ASSERT_TRUE(m.best_epoch.has_value());
  if (m.history.size() < cfg.max_epochs) {
    // Stopped on the first epoch that did not improve on the best one.
    EXPECT_EQ(*m.best_epoch + 2, m.history.size());
    EXPECT_GE(m.history.back().val_loss, m.history[*m.best_epoch].val_loss);
  }
  for (std::size_t e = 1; e <= *m.best_epoch; ++e) EXPECT_LT(m.history[e].val_loss, m.history[e - 1].val_loss);
}

TEST(CnnTrain, Deterministic) {
  auto cfg = small_config();
  cfg.max_epochs = 3;
  const auto data = toy_set(cfg.input);
  const auto a = train(init_model(cfg), data, cfg);
  const auto b = train(init_model(cfg), data, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(encode_model(a), encode_model(b));
}

TEST(CnnTrain, SingleClassRejected) {
  const auto cfg = small_config();
  std::vector<ModelInput> data(10, constant_input(cfg.input, 0.0, WindowLabel::AttackFree));
  try {
    train(init_model(cfg), data, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("single class"), std::string::npos);
  }
}

TEST(CnnTrain, DivergenceReported) {
  auto cfg = small_config();
  cfg.learning_rate = 1e300;
  cfg.max_epochs = 5;
  const auto data = toy_set(cfg.input);
  try {
    train(init_model(cfg), data, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(CnnPredict, CutoffBoundary) {
  const auto m = init_model(small_config());
  const auto in = random_input(m.config.input, 8);
  const double s = forward(m, in);
  EXPECT_EQ(predict(m, in, s).flag, 1);
  EXPECT_EQ(predict(m, in, std::nextafter(s, 2.0)).flag, 0);
  EXPECT_EQ(predict(m, in, s).score, s);
}

TEST(CnnContainer, RoundTripBitIdentical) {
  auto cfg = small_config();
  cfg.max_epochs = 2;
  const auto m = train(init_model(cfg), toy_set(cfg.input), cfg);
  const auto dir = std::filesystem::temp_directory_path() / "canids_cnn_container";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "model.bin").string();
  save_model(path, m);
  const auto back = load_model(path);
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(back.history.size(), m.history.size());
  EXPECT_EQ(back.best_epoch, m.best_epoch);
  EXPECT_EQ(encode_model(back), encode_model(m));
  const auto in = random_input(cfg.input, 4);
  EXPECT_EQ(forward(back, in), forward(m, in));
  std::filesystem::remove_all(dir);
}

TEST(CnnContainer, CorruptionAndVersion) {
  const auto m = init_model(small_config());
  const auto bytes = encode_model(m);
  try {
    decode_model(std::string_view(bytes).substr(0, bytes.size() - 100));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("checksum mismatch"), std::string::npos);
  }
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  EXPECT_THROW(decode_model(flipped), Error);
  try {
    decode_model(encode_model(m, kModelVersion + 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported container version"), std::string::npos);
  }
  EXPECT_THROW(decode_model("not a model"), Error);
}

TEST(CnnContainer, LoadedModelRejectsOtherShapes) {
  const auto m = decode_model(encode_model(init_model(small_config())));
  EXPECT_THROW(forward(m, random_input({20, 11, 57}, 1)), Error);
}

TEST(CnnConfigJson, RoundTrip) {
  auto c = small_config();
  c.learning_rate = 3e-4;
  c.early_stop_patience = 7;
  const auto back = cnn_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.input, c.input);
}
