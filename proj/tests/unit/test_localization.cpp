#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "ice/backends/synthetic.hpp"
#include "ice/core/error.hpp"
#include "ice/core/io.hpp"
#include "ice/core/rng.hpp"
#include "ice/localization/localize.hpp"

using namespace ice;

namespace {

struct ConstantRetriever : Retriever {
  std::vector<TextConcept> retrieve_concepts(const ImageTensor&, int) const override {
    return {{"cube", 1.0}};
  }
};

struct EmptySegmentor : Segmentor {
  BinaryMask segment(const ImageTensor& x, const TextConcept&) const override {
    return BinaryMask(x.height(), x.width());
  }
};

// Ignores the cut-out and always returns the same block.
struct FixedSegmentor : Segmentor {
  BinaryMask block;
  BinaryMask segment(const ImageTensor&, const TextConcept&) const override { return block; }
};

// Returns a random mask that may overlap earlier cuts.
struct RandomSegmentor : Segmentor {
  mutable Rng rng;
  double p;
  RandomSegmentor(std::uint64_t seed, double p) : rng(seed), p(p) {}
  BinaryMask segment(const ImageTensor& x, const TextConcept&) const override {
    BinaryMask m(x.height(), x.width());
    for (int y = 0; y < x.height(); ++y)
      for (int c = 0; c < x.width(); ++c) m.set(y, c, rng.uniform() < p);
    return m;
  }
};

struct ThrowingRetriever : Retriever {
  std::vector<TextConcept> retrieve_concepts(const ImageTensor&, int) const override {
    fail(ErrorCode::backend_unavailable, "offline");
  }
};

}  // namespace

TEST(PixelProportion, Examples) {
  const auto x = ImageTensor::zeros(4, 4, 3, Space::pixel);
  EXPECT_EQ(pixel_proportion(x, BinaryMask(4, 4)), 1.0);
  EXPECT_EQ(pixel_proportion(x, BinaryMask(4, 4, true)), 0.0);
  BinaryMask half(4, 4);
  for (int y = 0; y < 2; ++y)
    for (int c = 0; c < 4; ++c) half.set(y, c, true);
  EXPECT_EQ(pixel_proportion(x, half), 0.5);
  EXPECT_THROW(pixel_proportion(x, BinaryMask(3, 4)), Error);
}

TEST(Localize, BlankImageHasNoRecords) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(3, 1));
  const auto r = localize(ImageTensor::zeros(32, 32, 3, Space::pixel), b, b, {});
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.termination, Termination::empty_retrieval);
}

TEST(Localize, RecoversSyntheticShapes) {
  for (int k = 2; k <= 5; ++k) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto world = synthetic::synthesize_world(k, seed * 31 + static_cast<std::uint64_t>(k));
      synthetic::SyntheticBackend b(world);
      const auto r = localize(b.world_image(), b, b, {});
      ASSERT_EQ(static_cast<int>(r.records.size()), k);
      EXPECT_EQ(r.termination, Termination::below_threshold);
      for (std::size_t i = 0; i < r.records.size(); ++i) {
        const auto* shape = world.find(r.records[i].text_concept.label);
        ASSERT_NE(shape, nullptr);
        EXPECT_EQ(mask_iou(r.records[i].mask, shape->region), 1.0);
        EXPECT_EQ(r.records[i].order, static_cast<int>(i));
        for (std::size_t j = 0; j < i; ++j)
          EXPECT_EQ(mask_intersection_union(r.records[i].mask, r.records[j].mask).intersection, 0u);
      }
    }
  }
}

TEST(Localize, OrderIsReplayable) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(4, 9));
  const auto r = localize(b.world_image(), b, b, {});
  ImageTensor x = b.world_image();
  for (const auto& rec : r.records) {
    EXPECT_EQ(b.retrieve_concepts(x, 1).front().label, rec.text_concept.label);
    x = apply_mask(x, rec.mask);
  }
}

TEST(Localize, EmptySegmentorStopsAfterOneIteration) {
  const auto r = localize(ImageTensor::filled(8, 8, 3, Space::pixel, 0.5), ConstantRetriever{},
                          EmptySegmentor{}, {});
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.termination, Termination::degenerate_mask);
  EXPECT_EQ(r.final_proportion, 1.0);
}

TEST(Localize, RepeatedMaskIsNotRecordedTwice) {
  FixedSegmentor seg;
  seg.block = BinaryMask(8, 8);
  for (int y = 0; y < 4; ++y)
    for (int c = 0; c < 4; ++c) seg.block.set(y, c, true);
  const auto r = localize(ImageTensor::filled(8, 8, 3, Space::pixel, 0.5), ConstantRetriever{}, seg, {});
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.termination, Termination::degenerate_mask);
}

TEST(Localize, AdversarialBackendsAlwaysHalt) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    LocalizationConfig cfg;
    cfg.max_iterations = 1 + static_cast<int>(seed % 7);
    cfg.min_mask_coverage = (seed % 3 == 0) ? 0.0 : 0.005;
    cfg.tau = 0.01;
    RandomSegmentor seg(seed, 0.02 + 0.01 * static_cast<double>(seed % 4));
    const auto x = ImageTensor::filled(16, 16, 3, Space::pixel, 0.3);
    const auto r = localize(x, ConstantRetriever{}, seg, cfg);
    EXPECT_LE(static_cast<int>(r.records.size()), cfg.max_iterations);
    double prev = 1.0;
    BinaryMask seen(16, 16);
    for (const auto& rec : r.records) {
      EXPECT_EQ(mask_intersection_union(rec.mask, seen).intersection, 0u);
      seen = seen | rec.mask;
      const double rho = pixel_proportion(x, seen);
      EXPECT_LE(rho, prev);
      prev = rho;
    }
    EXPECT_DOUBLE_EQ(r.final_proportion, prev);
    EXPECT_GE(r.final_proportion, 0.0);
  }
}

TEST(Localize, BackendErrorsCarryIteration) {
  try {
    localize(ImageTensor::zeros(4, 4, 3, Space::pixel), ThrowingRetriever{}, EmptySegmentor{}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::backend_unavailable);
    EXPECT_NE(std::string(e.what()).find("iteration 0"), std::string::npos);
  }
}

TEST(Localize, ConfigValidation) {
  LocalizationConfig c;
  c.tau = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.max_iterations = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Localize, ManifestRoundTrip) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(3, 4));
  const auto r = localize(b.world_image(), b, b, {});
  const auto dir = std::filesystem::temp_directory_path() / "ice_unit" / "loc";
  std::filesystem::remove_all(dir);
  write_localization(dir, r, "world.png", b.world_image(), {"abc", {}});
  const auto back = read_localization(dir);
  EXPECT_EQ(back.source_image, "world.png");
  EXPECT_EQ(back.config_sha256, "abc");
  EXPECT_EQ(back.height, 32);
  EXPECT_TRUE(std::ranges::equal(back.image.data(), b.world_image().data()));
  EXPECT_EQ(back.result.termination, r.termination);
  EXPECT_EQ(back.result.final_proportion, r.final_proportion);
  ASSERT_EQ(back.result.records.size(), r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    EXPECT_EQ(back.result.records[i].mask, r.records[i].mask);
    EXPECT_EQ(back.result.records[i].text_concept.label, r.records[i].text_concept.label);
    EXPECT_EQ(back.result.records[i].coverage, r.records[i].coverage);
  }
}

TEST(Localize, ManifestEmptyAndTampered) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 4));
  const auto blank = ImageTensor::zeros(32, 32, 3, Space::pixel);
  const auto r = localize(blank, b, b, {});
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.termination, Termination::empty_retrieval);
  const auto dir = std::filesystem::temp_directory_path() / "ice_unit" / "loc_blank";
  std::filesystem::remove_all(dir);
  write_localization(dir, r, "blank.png", blank);
  const auto back = read_localization(dir / "concepts.json");
  EXPECT_TRUE(back.result.records.empty());
  EXPECT_EQ(back.width, 32);

  io::write_png(dir / "image.png", b.world_image());
  try {
    read_localization(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::checksum_mismatch);
  }
}
