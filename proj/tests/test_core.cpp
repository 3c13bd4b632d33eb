#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "latentdub/core/autograd.hpp"
#include "latentdub/core/checkpoint.hpp"
#include "latentdub/core/image.hpp"
#include "latentdub/core/nn.hpp"
#include "latentdub/io/formats.hpp"

using namespace latentdub;
using ad::Var;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::vector<int> shape, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

// central-difference gradient of a scalar-valued builder at leaf x
double max_rel_grad_error(const std::function<Var(const Var&)>& f, Tensor x0,
                          double eps = 1e-6) {
  Var x = ad::leaf(x0, true);
  Var y = f(x);
  ad::backward(y);
  Tensor analytic = x->grad;

  double max_rel = 0.0;
  for (std::int64_t i = 0; i < x0.size(); ++i) {
    Tensor xp = x0, xm = x0;
    xp[i] += eps;
    xm[i] -= eps;
    double fp = f(ad::leaf(xp, false))->value[0];
    double fm = f(ad::leaf(xm, false))->value[0];
    double num = (fp - fm) / (2 * eps);
    double denom = std::max({std::fabs(num), std::fabs(analytic[i]), 1e-8});
    max_rel = std::max(max_rel, std::fabs(num - analytic[i]) / denom);
  }
  return max_rel;
}

}  // namespace

TEST_CASE("elementwise ops forward values") {
  auto a = ad::leaf(Tensor({2, 2}, {1.0, -2.0, 3.0, 0.5}), false);
  auto b = ad::leaf(Tensor({2, 2}, {0.5, 0.5, -1.0, 2.0}), false);
  CHECK(ad::add(a, b)->value[0] == doctest::Approx(1.5));
  CHECK(ad::sub(a, b)->value[1] == doctest::Approx(-2.5));
  CHECK(ad::mul(a, b)->value[2] == doctest::Approx(-3.0));
  CHECK(ad::abs(a)->value[1] == doctest::Approx(2.0));
  CHECK(ad::mean_all(a)->value[0] == doctest::Approx(0.625));
  CHECK(ad::sum_all(a)->value[0] == doctest::Approx(2.5));
}

TEST_CASE("gradients match central differences for every primitive") {
  std::mt19937_64 rng(7);

  SUBCASE("add/sub/mul chain") {
    Tensor x0 = random_tensor(rng, {3, 4});
    Tensor c = random_tensor(rng, {3, 4});
    auto f = [&](const Var& x) {
      auto cc = ad::constant(c);
      return ad::mean_all(ad::mul(ad::add(x, cc), ad::sub(x, cc)));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("gelu") {
    Tensor x0 = random_tensor(rng, {2, 5}, -2.0, 2.0);
    auto f = [](const Var& x) { return ad::mean_all(ad::gelu(x)); };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("sigmoid/tanh/relu") {
    Tensor x0 = random_tensor(rng, {2, 5}, 0.1, 2.0);
    auto f = [](const Var& x) {
      return ad::mean_all(ad::relu(ad::tanh(ad::sigmoid(x))));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("log/sqrt/square") {
    Tensor x0 = random_tensor(rng, {6}, 0.5, 2.0);
    auto f = [](const Var& x) {
      return ad::mean_all(ad::log(ad::sqrt(ad::square(x), 1e-9)));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-5);
  }
  SUBCASE("clamp interior") {
    Tensor x0 = random_tensor(rng, {6}, -0.4, 0.4);
    auto f = [](const Var& x) { return ad::mean_all(ad::clamp(x, -0.5, 0.5)); };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("matmul") {
    Tensor x0 = random_tensor(rng, {3, 4});
    Tensor w = random_tensor(rng, {4, 2});
    auto f = [&](const Var& x) { return ad::mean_all(ad::matmul(x, ad::constant(w))); };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("matmul left-grad and transpose") {
    Tensor x0 = random_tensor(rng, {4, 3});
    Tensor a = random_tensor(rng, {2, 4});
    auto f = [&](const Var& x) {
      return ad::mean_all(ad::matmul(ad::constant(a), ad::transpose(ad::transpose(x))));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("softmax_rows") {
    Tensor x0 = random_tensor(rng, {3, 5});
    Tensor mix = random_tensor(rng, {3, 5});
    auto f = [&](const Var& x) {
      return ad::mean_all(ad::mul(ad::softmax_rows(x), ad::constant(mix)));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("softmax_rows with additive mask") {
    Tensor x0 = random_tensor(rng, {2, 4});
    Tensor mask({4});
    mask[0] = 0.0;
    mask[1] = -1e30;
    mask[2] = 0.0;
    mask[3] = 0.0;
    Tensor mix = random_tensor(rng, {2, 4});
    auto f = [&](const Var& x) {
      return ad::mean_all(ad::mul(ad::softmax_rows(x, &mask), ad::constant(mix)));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
    // masked column receives no attention mass
    Var y = ad::softmax_rows(ad::leaf(x0, false), &mask);
    CHECK(y->value.at(0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("layer_norm_rows") {
    Tensor x0 = random_tensor(rng, {3, 6});
    Tensor g = random_tensor(rng, {6}, 0.5, 1.5);
    Tensor b = random_tensor(rng, {6});
    Tensor mix = random_tensor(rng, {3, 6});
    auto f = [&](const Var& x) {
      return ad::mean_all(
          ad::mul(ad::layer_norm_rows(x, ad::constant(g), ad::constant(b)), ad::constant(mix)));
    };
    CHECK(max_rel_grad_error(f, x0, 1e-5) < 1e-5);
  }
  SUBCASE("layer_norm_rows gamma/beta grads") {
    Tensor x = random_tensor(rng, {3, 6});
    Tensor mix = random_tensor(rng, {3, 6});
    Tensor g0 = random_tensor(rng, {6}, 0.5, 1.5);
    auto f = [&](const Var& g) {
      return ad::mean_all(ad::mul(
          ad::layer_norm_rows(ad::constant(x), g, ad::constant(Tensor::zeros({6}))),
          ad::constant(mix)));
    };
    CHECK(max_rel_grad_error(f, g0) < 1e-6);
  }
  SUBCASE("l2_normalize_rows") {
    Tensor x0 = random_tensor(rng, {2, 5}, 0.2, 1.0);
    Tensor mix = random_tensor(rng, {2, 5});
    auto f = [&](const Var& x) {
      return ad::mean_all(ad::mul(ad::l2_normalize_rows(x), ad::constant(mix)));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("conv2d wrt input") {
    Tensor x0 = random_tensor(rng, {2, 5, 5});
    Tensor w = random_tensor(rng, {3, 2, 3, 3});
    Tensor b = random_tensor(rng, {3});
    Tensor mix = random_tensor(rng, {3, 3, 3});
    auto f = [&](const Var& x) {
      auto y = ad::conv2d(x, ad::constant(w), ad::constant(b), 1, 0);
      return ad::mean_all(ad::mul(y, ad::constant(mix)));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("conv2d wrt weights, strided + padded") {
    Tensor x = random_tensor(rng, {2, 6, 6});
    Tensor w0 = random_tensor(rng, {3, 2, 3, 3});
    Tensor b = random_tensor(rng, {3});
    auto f = [&](const Var& w) {
      auto y = ad::conv2d(ad::constant(x), w, ad::constant(b), 2, 1);
      return ad::mean_all(ad::square(y));
    };
    CHECK(max_rel_grad_error(f, w0) < 1e-6);
  }
  SUBCASE("conv2d wrt bias") {
    Tensor x = random_tensor(rng, {1, 4, 4});
    Tensor w = random_tensor(rng, {2, 1, 3, 3});
    Tensor b0 = random_tensor(rng, {2});
    auto f = [&](const Var& b) {
      auto y = ad::conv2d(ad::constant(x), ad::constant(w), b, 1, 1);
      return ad::mean_all(ad::square(y));
    };
    CHECK(max_rel_grad_error(f, b0) < 1e-6);
  }
  SUBCASE("conv1d") {
    Tensor x0 = random_tensor(rng, {3, 8});
    Tensor w = random_tensor(rng, {4, 3, 3});
    Tensor b = random_tensor(rng, {4});
    auto f = [&](const Var& x) {
      auto y = ad::conv1d(x, ad::constant(w), ad::constant(b), 2, 1);
      return ad::mean_all(ad::square(y));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("slice_rows") {
    Tensor x0 = random_tensor(rng, {2, 5, 3});
    auto f = [&](const Var& x) { return ad::mean_all(ad::square(ad::slice_rows(x, 1, 4))); };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("upsample2x / pooling / channel ops") {
    Tensor x0 = random_tensor(rng, {4, 3, 3});
    Tensor mix = random_tensor(rng, {2, 6, 6});
    auto f = [&](const Var& x) {
      auto up = ad::upsample2x(ad::slice_ch(x, 1, 3));
      auto merged = ad::mul(up, ad::constant(mix));
      auto pooled = ad::global_avg_pool(ad::concat_ch(merged, merged));
      return ad::sum_all(pooled);
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
  SUBCASE("reshape + slice_cols + concat") {
    Tensor x0 = random_tensor(rng, {2, 6});
    auto f = [&](const Var& x) {
      auto r = ad::reshape(x, {3, 4});
      auto s1 = ad::slice_cols(r, 0, 2);
      auto s2 = ad::slice_cols(r, 2, 4);
      return ad::mean_all(ad::square(ad::concat_cols({s2, s1})));
    };
    CHECK(max_rel_grad_error(f, x0) < 1e-6);
  }
}

TEST_CASE("conv1d output length follows stride arithmetic") {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor(rng, {2, 10});
  Tensor w = random_tensor(rng, {5, 2, 3});
  Tensor b = Tensor::zeros({5});
  auto y = ad::conv1d(ad::leaf(x, false), ad::constant(w), ad::constant(b), 2, 1);
  CHECK(y->value.dim(0) == 5);
  CHECK(y->value.dim(1) == 5);  // ceil(10/2)
}

TEST_CASE("gradient accumulates when a node is used twice") {
  Tensor x0({1}, {3.0});
  Var x = ad::leaf(x0, true);
  Var y = ad::add(ad::mul(x, x), x);  // x^2 + x, dy/dx = 2x+1 = 7
  ad::backward(y);
  CHECK(x->grad[0] == doctest::Approx(7.0));
}

TEST_CASE("CrossAttention responds to context and respects the key mask") {
  std::mt19937_64 rng(11);
  nn::ParamRegistry reg;
  nn::CrossAttention attn(reg, "attn", rng, 8, 6, 2);
  Tensor tokens = random_tensor(rng, {4, 8});
  Tensor ctx1 = random_tensor(rng, {5, 6});
  Tensor ctx2 = ctx1;
  ctx2.at(3, 0) += 0.5;

  auto out1 = attn(ad::leaf(tokens, false), ad::leaf(ctx1, false), nullptr);
  auto out2 = attn(ad::leaf(tokens, false), ad::leaf(ctx2, false), nullptr);
  double diff = 0.0;
  for (std::int64_t i = 0; i < out1->value.size(); ++i)
    diff += std::fabs(out1->value[i] - out2->value[i]);
  CHECK(diff > 1e-9);

  // masking out the row that changed makes the outputs identical
  std::vector<std::uint8_t> mask = {1, 1, 1, 0, 1};
  auto m1 = attn(ad::leaf(tokens, false), ad::leaf(ctx1, false), &mask);
  auto m2 = attn(ad::leaf(tokens, false), ad::leaf(ctx2, false), &mask);
  for (std::int64_t i = 0; i < m1->value.size(); ++i)
    CHECK(m1->value[i] == doctest::Approx(m2->value[i]).epsilon(1e-12));
}

TEST_CASE("Adam reduces a quadratic") {
  Var x = ad::leaf(Tensor({3}, {5.0, -4.0, 2.0}), true);
  nn::Adam opt({x}, 0.1);
  for (int i = 0; i < 400; ++i) {
    opt.zero_grad();
    auto loss = ad::mean_all(ad::square(x));
    ad::backward(loss);
    opt.step();
  }
  auto final_loss = ad::mean_all(ad::square(x));
  CHECK(final_loss->value[0] < 1e-3);
}

TEST_CASE("ParamRegistry checksum is init-order deterministic") {
  auto build = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    nn::ParamRegistry reg;
    nn::Conv2d c1(reg, "c1", rng, 3, 8, 3, 1, 1);
    nn::Linear l1(reg, "l1", rng, 8, 4);
    return reg.checksum();
  };
  CHECK(build(42) == build(42));
  CHECK(build(42) != build(43));
}

TEST_CASE("checkpoint round-trips parameters and config") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "ldub_ckpt_test";
  fs::create_directories(dir);
  auto path = (dir / "model.ldckpt").string();

  std::mt19937_64 rng(5);
  nn::ParamRegistry reg;
  nn::Conv2d c1(reg, "c1", rng, 2, 4, 3, 1, 1);
  nn::Linear l1(reg, "l1", rng, 4, 2);
  nlohmann::json cfg = {{"alpha", 3}, {"name", "toy"}};
  save_checkpoint(path, "unit-test", cfg, reg);

  std::mt19937_64 rng2(99);
  nn::ParamRegistry reg2;
  nn::Conv2d c2(reg2, "c1", rng2, 2, 4, 3, 1, 1);
  nn::Linear l2(reg2, "l1", rng2, 4, 2);
  CHECK(reg.checksum() != reg2.checksum());
  auto loaded_cfg = load_checkpoint(path, "unit-test", reg2);
  CHECK(reg.checksum() == reg2.checksum());
  CHECK(loaded_cfg.at("alpha").get<int>() == 3);

  CHECK_THROWS(load_checkpoint(path, "wrong-kind", reg2));
  fs::remove_all(dir);
}

TEST_CASE("image round trip through tensor and PPM") {
  std::mt19937_64 rng(17);
  Image img(6, 6);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (auto& p : img.px) p = d(rng);

  auto t = image_to_tensor(img);
  auto back = tensor_to_image(t);
  CHECK(mean_abs_diff(img, back) == doctest::Approx(0.0));

  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "ldub_ppm_test";
  fs::create_directories(dir);
  auto path = (dir / "img.ppm").string();
  io::write_ppm(path, img);
  Image loaded = io::read_ppm(path);
  CHECK(loaded.h == 6);
  CHECK(loaded.w == 6);
  CHECK(mean_abs_diff(img, loaded) < 1.0 / 255.0);  // 8-bit quantization only
  // writing the quantized image again is byte-stable
  io::write_ppm((dir / "img2.ppm").string(), loaded);
  CHECK(io::fnv1a_file(path) == io::fnv1a_file((dir / "img2.ppm").string()));
  fs::remove_all(dir);
}

TEST_CASE("resize_bilinear identity at equal size, averaging on downscale") {
  Image img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = (y * 4 + x) / 15.0;
  Image same = resize_bilinear(img, 4, 4);
  CHECK(mean_abs_diff(img, same) == 0.0);
  Image half = resize_bilinear(img, 2, 2);
  CHECK(half.at(0, 0, 0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0 / 15.0));
}

TEST_CASE("wav and mel cache round trips") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "ldub_io_test";
  fs::create_directories(dir);

  std::vector<double> samples(1600);
  for (size_t i = 0; i < samples.size(); ++i)
    samples[i] = 0.5 * std::sin(2 * 3.14159265358979 * 440.0 * i / 16000.0);
  auto wav_path = (dir / "tone.wav").string();
  io::write_wav(wav_path, samples, 16000);
  int rate = 0;
  auto loaded = io::read_wav(wav_path, &rate);
  CHECK(rate == 16000);
  REQUIRE(loaded.size() == samples.size());
  double max_err = 0.0;
  for (size_t i = 0; i < samples.size(); ++i)
    max_err = std::max(max_err, std::fabs(loaded[i] - samples[i]));
  CHECK(max_err < 1.0 / 32767.0);

  Tensor mel({7, 80});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-20.0, 2.0);
  for (std::int64_t i = 0; i < mel.size(); ++i) mel[i] = d(rng);
  auto mel_path = (dir / "mel.ldmel").string();
  io::write_mel_cache(mel_path, mel, 0.01, 16000);
  double hop = 0;
  int sr = 0;
  Tensor mel2 = io::read_mel_cache(mel_path, &hop, &sr);
  CHECK(hop == doctest::Approx(0.01));
  CHECK(sr == 16000);
  REQUIRE(mel2.shape() == mel.shape());
  for (std::int64_t i = 0; i < mel.size(); ++i) CHECK(mel2[i] == mel[i]);
  fs::remove_all(dir);
}

TEST_CASE("landmark track text round trip") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "ldub_lm_test";
  fs::create_directories(dir);
  std::vector<io::RawTrackFrame> frames(3);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(0.0, 256.0);
  for (int f = 0; f < 3; ++f) {
    frames[f].frame_index = f;
    for (int p = 0; p < 68; ++p) frames[f].points.emplace_back(d(rng), d(rng));
  }
  auto path = (dir / "track.txt").string();
  io::write_landmark_track(path, frames);
  auto loaded = io::read_landmark_track(path, 68);
  REQUIRE(loaded.size() == 3);
  for (int f = 0; f < 3; ++f) {
    CHECK(loaded[f].frame_index == f);
    for (int p = 0; p < 68; ++p) {
      CHECK(loaded[f].points[p].first == doctest::Approx(frames[f].points[p].first));
      CHECK(loaded[f].points[p].second == doctest::Approx(frames[f].points[p].second));
    }
  }
  fs::remove_all(dir);
}
