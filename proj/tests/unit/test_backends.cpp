#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ice/backends/registry.hpp"
#include "ice/backends/schedule.hpp"
#include "ice/backends/synthetic.hpp"
#include "ice/core/error.hpp"
#include "ice/core/rng.hpp"
#include "ice/losses/losses.hpp"
#include "ice/losses/sinkhorn.hpp"

using namespace ice;
using namespace ice::synthetic;

namespace {

SyntheticWorld single_cube_world() {
  SyntheticWorld w;
  w.vocabulary = catalogue_words();
  BinaryMask r(32, 32);
  for (int y = 8; y < 20; ++y)
    for (int x = 4; x < 16; ++x) r.set(y, x, true);
  w.shapes.push_back({"cube", "red", "wood", r});
  return w;
}

SyntheticWorld two_shape_world() {
  SyntheticWorld w = single_cube_world();
  BinaryMask r(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 20; x < 32; ++x) r.set(y, x, true);
  w.shapes.push_back({"torus", "blue", "metal", r});
  return w;
}

ImageTensor random_latent(Rng& rng, int h, int w, int channels = 3) {
  std::vector<double> d(static_cast<std::size_t>(h * w * channels));
  for (double& v : d) v = rng.normal();
  return ImageTensor(h, w, channels, Space::latent, d);
}

}  // namespace

TEST(Schedule, CumulativeAlphaAndAddNoise) {
  NoiseSchedule s({0.1, 0.2});
  EXPECT_DOUBLE_EQ(cumulative_alpha(s, 1), 0.9);
  EXPECT_DOUBLE_EQ(cumulative_alpha(s, 2), 0.72);
  EXPECT_LT(cumulative_alpha(s, 2), cumulative_alpha(s, 1));

  const auto x0 = ImageTensor::filled(2, 2, 3, Space::latent, 1.0);
  const auto eps = ImageTensor::zeros(2, 2, 3, Space::latent);
  const auto xt = add_noise(x0, 2, eps, s);
  for (double v : xt.data()) EXPECT_NEAR(v, std::sqrt(0.72), 1e-12);
  EXPECT_NEAR(std::sqrt(0.72), 0.8485, 1e-4);

  const auto e1 = ImageTensor::filled(2, 2, 3, Space::latent, -0.3);
  EXPECT_EQ(add_noise_with_alpha_bar(x0, 1.0, e1), x0);
  EXPECT_EQ(add_noise_with_alpha_bar(x0, 0.0, e1), e1);
  EXPECT_THROW(add_noise(x0, 3, eps, s), Error);
  EXPECT_THROW(add_noise(x0, 1, ImageTensor::zeros(1, 2, 3, Space::latent), s), Error);
}

TEST(Schedule, AddNoiseSuperposition) {
  Rng rng(1);
  const auto s = NoiseSchedule::linear(50, 0.05, 0.15);
  for (int trial = 0; trial < 50; ++trial) {
    const int t = static_cast<int>(rng.uniform_int(1, 50));
    const auto x1 = random_latent(rng, 4, 4), x2 = random_latent(rng, 4, 4);
    const auto e1 = random_latent(rng, 4, 4), e2 = random_latent(rng, 4, 4);
    const double alpha = rng.normal(), beta = rng.normal();
    const auto lin = [&](const ImageTensor& a, const ImageTensor& b) {
      std::vector<double> d(a.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = alpha * a.data()[i] + beta * b.data()[i];
      return ImageTensor(4, 4, 3, Space::latent, d);
    };
    const auto lhs = add_noise(lin(x1, x2), t, lin(e1, e2), s);
    const auto y1 = add_noise(x1, t, e1, s), y2 = add_noise(x2, t, e2, s);
    for (std::size_t i = 0; i < lhs.size(); ++i)
      EXPECT_NEAR(lhs.data()[i], alpha * y1.data()[i] + beta * y2.data()[i], 1e-12);
  }
}

TEST(SyntheticBackend, EncodeTextIsDeterministicAndInjective) {
  SyntheticBackend b(two_shape_world());
  EXPECT_EQ(b.encode_text("a photo of a cube"), b.encode_text("a photo of a cube"));
  EXPECT_NE(b.encode_text("colour"), b.encode_text("material"));
  const auto words = catalogue_words();
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = i + 1; j < words.size(); ++j)
      EXPECT_NE(b.encode_text(words[i]), b.encode_text(words[j]));
  try {
    b.encode_text("a photo of <obj9_conspec>");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_token);
  }
}

TEST(SyntheticBackend, AxisNameDistancesAreSymmetricAndPositive) {
  SyntheticBackend b(two_shape_world());
  const std::vector<std::string> axes = {"object", "material", "colour"};
  for (const auto& j : axes)
    for (const auto& k : axes) {
      const double d = squared_distance(b.encode_text(j), b.encode_text(k));
      EXPECT_EQ(d, squared_distance(b.encode_text(k), b.encode_text(j)));
      if (j == k) EXPECT_EQ(d, 0.0);
      else EXPECT_GT(d, 0.5);
    }
}

TEST(SyntheticBackend, RegisteredTokensFlowIntoEncoding) {
  SyntheticBackend b(two_shape_world());
  const auto cube = b.word_embedding("cube");
  b.register_token({"<obj0_conspec>", to_float(cube)});
  EXPECT_TRUE(b.has_token("<obj0_conspec>"));
  const auto c = b.encode("a photo of <obj0_conspec>");
  ASSERT_EQ(c.tokens.size(), 4u);
  EXPECT_TRUE(c.tokens.back().learnable);
  EXPECT_THROW(b.register_token({"plain", to_float(cube)}), Error);
  EXPECT_THROW(b.register_token({"<short>", {1.0f}}), Error);
  EXPECT_THROW(b.set_token("<missing>", to_float(cube)), Error);
}

TEST(SyntheticBackend, AttentionConcentratesOnReferencedShape) {
  SyntheticBackend b(two_shape_world());
  for (const auto& shape : b.world().shapes) {
    const auto c = b.encode("a photo of a " + shape.category);
    const auto pred = b.predict_noise(b.to_latent(b.world_image()), 10, c);
    const auto& a = pred.attention.at(shape.category);
    const auto coarse = shape.region.resampled(a.height(), a.width());
    double mass = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mass += coarse[i] ? a.weights()[i] : 0.0;
    EXPECT_GE(mass, 0.9) << shape.category;
    EXPECT_NEAR(a.total(), 1.0, 1e-9);
  }
}

TEST(SyntheticBackend, ZeroNoiseAtAlphaBarNearOne) {
  SyntheticOptions opt;
  opt.timesteps = 1;
  opt.beta_start = opt.beta_end = 1e-12;
  SyntheticBackend b(two_shape_world(), opt);
  const auto c = b.encode("a red wood cube");
  const auto x0 = b.render(c);
  const auto x = add_noise(x0, 1, ImageTensor::zeros(32, 32, b.latent_channels(), Space::latent),
                           b.schedule());
  const auto pred = b.predict_noise(x, 1, c);
  for (double v : pred.noise_estimate.data()) EXPECT_LE(std::abs(v), 1e-6);
}

TEST(SyntheticBackend, PredictionIsDeterministic) {
  SyntheticBackend b(two_shape_world());
  Rng rng(3);
  const auto x = random_latent(rng, 32, 32, b.latent_channels());
  const auto c = b.encode("a photo of a blue torus");
  const auto p1 = b.predict_noise(x, 7, c), p2 = b.predict_noise(x, 7, c);
  EXPECT_EQ(p1.noise_estimate, p2.noise_estimate);
  EXPECT_EQ(p1.attention.at("torus").weights(), p2.attention.at("torus").weights());
}

TEST(SyntheticBackend, RetrieverExamples) {
  SyntheticBackend one(single_cube_world());
  const auto top = one.retrieve_concepts(one.world_image(), 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].label, "cube");
  EXPECT_TRUE(one.retrieve_concepts(ImageTensor::zeros(32, 32, 3, Space::pixel), 3).empty());

  SyntheticBackend two(two_shape_world());
  const auto ranked = two.retrieve_concepts(two.world_image(), 5);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].label, "torus");  // 384 px against 144 px
  EXPECT_GT(ranked[0].score, ranked[1].score);
}

TEST(SyntheticBackend, SegmentorExamples) {
  SyntheticBackend b(two_shape_world());
  const auto& cube = *b.world().find("cube");
  EXPECT_EQ(mask_iou(b.segment(b.world_image(), {"cube", 1.0}), cube.region), 1.0);
  EXPECT_TRUE(b.segment(b.world_image(), {"sphere", 1.0}).empty());
  const auto removed = apply_mask(b.world_image(), cube.region);
  EXPECT_TRUE(b.segment(removed, {"cube", 1.0}).empty());
  try {
    b.segment(b.world_image(), {"dragon", 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_concept);
  }
}

TEST(SyntheticBackend, RetrieveThenSegmentRoundTrip) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SyntheticBackend b(synthesize_world(1 + static_cast<int>(seed % 5), seed));
    const auto found = b.retrieve_concepts(b.world_image(), 10);
    ASSERT_EQ(found.size(), b.world().shapes.size());
    for (const auto& c : found)
      EXPECT_EQ(mask_iou(b.segment(b.world_image(), c), b.world().find(c.label)->region), 1.0);
  }
}

TEST(SyntheticBackend, GenerateRendersAttributesWithSeededJitter) {
  SyntheticBackend b(two_shape_world());
  const auto c = b.encode("a photo of a blue metal torus");
  const auto img0 = b.generate(c, 0);
  const auto& torus = *b.world().find("torus");
  const int ti = word_index(Axis::category, "torus");
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const auto v = torus.region.at(y, x)
                         ? texel(ti, word_index(Axis::colour, "blue"), word_index(Axis::material, "metal"), y, x)
                         : std::array<double, 3>{0, 0, 0};
      for (int ch = 0; ch < 3; ++ch) EXPECT_DOUBLE_EQ(img0.at(y, x, ch), v[ch]);
    }
  EXPECT_EQ(b.generate(c, 0), img0);
  const auto img6 = b.generate(c, 6);
  EXPECT_NE(img6, img0);
  EXPECT_NE(SyntheticBackend::jitter(0), SyntheticBackend::jitter(6));
  const auto& enc = b.evaluation_encoder();
  const auto e0 = enc.embed_image(img0), e6 = enc.embed_image(img6);
  for (std::size_t i = 0; i < e0.size(); ++i) EXPECT_NEAR(e0[i], e6[i], 0.05);
}

TEST(SyntheticBackend, DenoiserVjpMatchesFiniteDifferences) {
  SyntheticBackend b(two_shape_world());
  Rng rng(21);
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<float> v0(32), v1(32);
    for (auto& v : v0) v = static_cast<float>(0.3 * rng.normal());
    for (auto& v : v1) v = static_cast<float>(0.3 * rng.normal());
    b.register_token({"<a>", v0});
    b.register_token({"<b>", v1});
    b.set_trainable_parameters(std::vector<double>{1.1, 0.9, 1.0, 0.01, -0.02, 0.0});
    const std::string prompt = "a photo of <a> & <b> & cube";
    const int t = 5 + trial;
    const auto x0 = b.to_latent(b.world_image());
    const auto eps = random_latent(rng, 32, 32, b.latent_channels());
    const auto xt = add_noise(x0, t, eps, b.schedule());
    BinaryMask region = b.world().find("cube")->region;

    const auto loss = [&](const Vector& a, const Vector& bb, const std::vector<double>& head) {
      b.set_token("<a>", to_float(a));
      b.set_token("<b>", to_float(bb));
      b.set_trainable_parameters(head);
      const auto c = b.encode(prompt);
      const auto p = b.predict_noise(xt, t, c);
      return recon_loss(eps, p.noise_estimate, region) +
             wasserstein_attention_loss(p.attention.at("<a>"), region).value;
    };
    // Embeddings are stored as float32, so the finite differences use
    // float-representable base points and a step large enough to register.
    const Vector a0(v0.begin(), v0.end()), b0(v1.begin(), v1.end());
    const std::vector<double> head = b.trainable_parameters();
    const auto c = b.encode(prompt);
    const auto p = b.predict_noise(xt, t, c);
    std::vector<double> g_eps;
    recon_loss_grad(eps, p.noise_estimate, region, g_eps);
    const auto att = wasserstein_attention_loss(p.attention.at("<a>"), region, true);
    DenoiseCotangent cot{g_eps, {{"<a>", att.grad}}};
    const auto grad = b.predict_noise_vjp(xt, t, c, cot);

    const double h = 1e-3;
    double worst = 0.0;
    for (std::size_t i = 0; i < 32; i += 5) {
      Vector ap = a0, am = a0;
      ap[i] += h;
      am[i] -= h;
      const double fd = (loss(ap, b0, head) - loss(am, b0, head)) / (2 * h);
      const double an = grad.tokens.at("<a>")[i];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an)));
    }
    for (std::size_t i = 0; i < 6; ++i) {
      auto hp = head, hm = head;
      hp[i] += 1e-5;
      hm[i] -= 1e-5;
      const double fd = (loss(a0, b0, hp) - loss(a0, b0, hm)) / 2e-5;
      worst = std::max(worst, std::abs(fd - grad.parameters[i]) /
                                  std::max(1e-6, std::abs(fd) + std::abs(grad.parameters[i])));
    }
    EXPECT_LE(worst, 1e-3) << "trial " << trial;
    b.set_token("<a>", v0);
    b.set_token("<b>", v1);
  }
}

TEST(SyntheticWorld, SynthesisAndFileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "ice_unit" / "world";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (int k = 1; k <= 5; ++k) {
    const auto w = synthesize_world(k, 100 + k);
    EXPECT_EQ(static_cast<int>(w.shapes.size()), k);
    EXPECT_GE(w.coverage(), 0.95);
    for (const auto& s : w.shapes) EXPECT_GE(s.region.count(), 64u);
    save_world(dir / ("w" + std::to_string(k) + ".json"), w);
    const auto back = load_world(dir / ("w" + std::to_string(k) + ".json"));
    ASSERT_EQ(back.shapes.size(), w.shapes.size());
    for (std::size_t i = 0; i < w.shapes.size(); ++i) {
      EXPECT_EQ(back.shapes[i].region, w.shapes[i].region);
      EXPECT_EQ(back.shapes[i].colour, w.shapes[i].colour);
    }
    EXPECT_EQ(back.render(), w.render());
  }
  EXPECT_THROW(synthesize_world(6, 0), Error);
}

TEST(Registry, AdapterIsUnavailable) {
  BackendConfig cfg;
  cfg.name = "diffusion-adapter";
  try {
    make_backend(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::backend_unavailable);
    EXPECT_EQ(exit_code_for(e.code()), 3);
  }
}
