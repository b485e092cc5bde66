#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include "forwarding_backend.hpp"
#include "ice/backends/synthetic.hpp"
#include "ice/core/error.hpp"
#include "ice/core/io.hpp"
#include "ice/learning/learning.hpp"
#include "ice/learning/store.hpp"
#include "json.hpp"

using namespace ice;
namespace fs = std::filesystem;

namespace {

const std::vector<IntrinsicAxis> kAxes{{"material"}, {"colour"}};

ConceptRecord record(const std::string& label, int h, int w, int order) {
  BinaryMask m(h, w);
  for (int y = 0; y < h / 2; ++y)
    for (int x = 0; x < w; ++x) m.set(y, x, true);
  return {{label, 1.0}, m, order, mask_coverage(m)};
}

LocalizationResult two_records() {
  LocalizationResult loc;
  loc.records = {record("cube", 32, 32, 0), record("sphere", 32, 32, 1)};
  return loc;
}

TrainSchedule short_schedule(std::uint64_t seed) {
  TrainSchedule s;
  s.phase1_steps = 30;
  s.phase2_steps = 30;
  s.refine_steps = 20;
  s.seed = seed;
  return s;
}

double dist(const Vector& a, const TokenEmbedding& t) { return squared_distance(a, t.as_vector()); }

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ice_learning_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// One full default-schedule run on a three-shape world, shared by the
// convergence tests.
struct FullRun {
  std::unique_ptr<synthetic::SyntheticBackend> backend;
  TrainSchedule sched;
  RunState start, after1, after2, after_refine;
  double probe_before = 0.0, probe_after = 0.0;
};

const FullRun& full_run() {
  static const FullRun run = [] {
    FullRun r;
    r.backend = std::make_unique<synthetic::SyntheticBackend>(synthetic::synthesize_world(3, 11));
    auto& b = *r.backend;
    const auto loc = localize(b.world_image(), b, b, {});
    r.sched.seed = 11;
    r.start = start_run(loc, b.world_image(), kAxes, b, r.sched, {});
    r.after1 = train_phase_one(r.start, b, r.sched, r.start.margins);
    r.after2 = train_phase_two(r.after1, b, r.sched, r.start.margins);
    const auto probe = probe_batch(r.after2, b, 16, 5);
    const auto priors = prior_batch(r.after2, b);
    r.probe_before = probe_loss(r.after2, b, probe, priors, r.start.margins);
    r.after_refine = refine(r.after2, b, r.sched, r.start.margins);
    r.probe_after = probe_loss(r.after_refine, b, probe, priors, r.start.margins);
    return r;
  }();
  return run;
}

}  // namespace

TEST(TemplateBank, StandardListHasThirtySlots) {
  const auto& t = TemplateBank::standard().templates();
  ASSERT_EQ(t.size(), 30u);
  EXPECT_EQ(t.front(), "a photo of a {}");
  EXPECT_EQ(t.back(), "a photo of a small {}");
  for (const auto& s : t) EXPECT_NO_THROW(PromptSpec::make(s, "x")) << s;
  EXPECT_EQ(TemplateBank::standard().sha256().size(), 64u);
}

TEST(TemplateBank, SelectionCoversEveryEntryRoughlyUniformly) {
  Rng rng(3);
  std::map<std::string, int> hits;
  const auto& bank = TemplateBank::standard();
  for (int i = 0; i < 6000; ++i) hits[bank.sample(rng)]++;
  // "a photo of a {}" and two neighbours appear twice in the list.
  EXPECT_EQ(hits.size(), 27u);
  for (const auto& [t, n] : hits) {
    const int copies = static_cast<int>(std::count(bank.templates().begin(), bank.templates().end(), t));
    EXPECT_NEAR(n / 6000.0, copies / 30.0, 0.02) << t;
  }
}

TEST(SamplePrompt, PhaseOneFiller) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 1));
  auto concepts = init_tokens(two_records(), kAxes, b, 0.01, 1);
  const TemplateBank bank({"a photo of a {}"});
  Rng rng(0);
  EXPECT_EQ(sample_prompt(bank, concepts[0], Phase::phase1, rng).rendered,
            "a photo of a <obj0_inspec> & <obj0_conspec>");
  EXPECT_THROW(sample_prompt(bank, concepts[0], Phase::done, rng), Error);
}

TEST(SamplePrompt, ReplayGivesSameSequence) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 1));
  auto concepts = init_tokens(two_records(), kAxes, b, 0.01, 1);
  Rng a(42), c(42);
  for (int i = 0; i < 50; ++i)
    EXPECT_EQ(sample_prompt(TemplateBank::standard(), concepts[1], Phase::phase2, a).rendered,
              sample_prompt(TemplateBank::standard(), concepts[1], Phase::phase2, c).rendered);
}

TEST(SamplePrompt, PhaseTwoFillerHoldsEachIntrinsicOnce) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 1));
  auto concepts = init_tokens(two_records(), kAxes, b, 0.01, 1);
  Rng rng(1);
  for (Phase p : {Phase::phase2, Phase::refine}) {
    const auto spec = sample_prompt(TemplateBank::standard(), concepts[0], p, rng);
    EXPECT_EQ(spec.filler, "<obj0_material> & <obj0_colour> & <obj0_conspec>");
    for (const auto& it : concepts[0].intrinsics) {
      const auto& id = it.embedding.token_id;
      const auto first = spec.rendered.find(id);
      ASSERT_NE(first, std::string::npos);
      EXPECT_EQ(spec.rendered.find(id, first + 1), std::string::npos);
    }
  }
}

TEST(InitTokens, ConspecCopiesLabelEmbedding) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 1));
  const auto concepts = init_tokens(two_records(), kAxes, b, 0.01, 1);
  EXPECT_EQ(concepts[0].conspec.values, to_float(b.word_embedding("cube")));
  EXPECT_EQ(concepts[0].init_word, "cube");
}

TEST(InitTokens, ZeroJitterGivesPlaceholder) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 1));
  const auto concepts = init_tokens(two_records(), kAxes, b, 0.0, 1);
  const auto ph = to_float(b.word_embedding(b.placeholder_word()));
  EXPECT_EQ(concepts[0].inspec.values, ph);
  EXPECT_EQ(concepts[1].inspec.values, ph);
  EXPECT_EQ(concepts[1].intrinsic("colour").values, to_float(b.word_embedding("colour")));
}

TEST(InitTokens, JitterIsSmallAndSeeded) {
  synthetic::SyntheticBackend b1(synthetic::synthesize_world(2, 1));
  synthetic::SyntheticBackend b2(synthetic::synthesize_world(2, 1));
  const auto a = init_tokens(two_records(), kAxes, b1, 0.01, 9);
  const auto c = init_tokens(two_records(), kAxes, b2, 0.01, 9);
  EXPECT_EQ(a[0].inspec, c[0].inspec);
  EXPECT_EQ(a[1].intrinsics[0].embedding, c[1].intrinsics[0].embedding);
  const auto ph = b1.word_embedding(b1.placeholder_word());
  const double d = std::sqrt(dist(ph, a[0].inspec) / static_cast<double>(ph.size()));
  EXPECT_GT(d, 0.005);
  EXPECT_LT(d, 0.02);
  EXPECT_NE(a[0].inspec, a[1].inspec);
}

TEST(InitTokens, TwoRecordsThreeAxesRegisterTenTokens) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 1));
  const std::vector<IntrinsicAxis> axes{{"material"}, {"colour"}, {"shape"}};
  const auto concepts = init_tokens(two_records(), axes, b, 0.01, 1);
  std::set<std::string> ids;
  for (const auto& c : concepts)
    for (const auto& id : c.token_ids()) ids.insert(id);
  EXPECT_EQ(ids.size(), 10u);
  for (const auto& id : ids) EXPECT_TRUE(b.has_token(id)) << id;
  EXPECT_EQ(b.token_ids().size(), 10u);
}

TEST(InitTokens, UnknownLabelFallsBackToNearestWord) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 1));
  LocalizationResult loc;
  loc.records = {record("blorb", 32, 32, 0)};
  std::vector<std::string> notes;
  const auto concepts = init_tokens(loc, kAxes, b, 0.01, 1, &notes);
  EXPECT_TRUE(b.in_vocabulary(concepts[0].init_word));
  EXPECT_EQ(concepts[0].conspec.values, to_float(b.word_embedding(concepts[0].init_word)));
  ASSERT_EQ(notes.size(), 1u);
  EXPECT_NE(notes[0].find("blorb"), std::string::npos);
}

TEST(InitTokens, RejectsEmptyLocalization) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 1));
  EXPECT_THROW(init_tokens({}, kAxes, b, 0.01, 1), Error);
}

TEST(Training, ZeroStepsOnlyAdvancesPhase) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 4));
  const auto loc = localize(b.world_image(), b, b, {});
  TrainSchedule sched;
  sched.phase1_steps = sched.phase2_steps = sched.refine_steps = 0;
  const auto s0 = start_run(loc, b.world_image(), kAxes, b, sched, {});
  const auto s1 = train_phase_one(s0, b, sched, s0.margins);
  EXPECT_EQ(s1.phase, Phase::phase2);
  EXPECT_TRUE(s1.loss_history.empty());
  for (std::size_t i = 0; i < s0.concepts.size(); ++i) {
    EXPECT_EQ(s1.concepts[i].conspec, s0.concepts[i].conspec);
    EXPECT_EQ(s1.concepts[i].inspec, s0.concepts[i].inspec);
  }
  const auto s2 = train_phase_two(s1, b, sched, s0.margins);
  const auto s3 = refine(s2, b, sched, s0.margins);
  EXPECT_EQ(s3.phase, Phase::done);
  EXPECT_EQ(s3.head_parameters, s0.head_parameters);
  for (std::size_t i = 0; i < s0.concepts.size(); ++i)
    for (std::size_t j = 0; j < kAxes.size(); ++j)
      EXPECT_EQ(s3.concepts[i].intrinsics[j].embedding, s0.concepts[i].intrinsics[j].embedding);
}

TEST(Training, PhasesRunInOrder) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 4));
  const auto loc = localize(b.world_image(), b, b, {});
  const auto sched = short_schedule(1);
  const auto s0 = start_run(loc, b.world_image(), kAxes, b, sched, {});
  EXPECT_THROW(train_phase_two(s0, b, sched, s0.margins), Error);
  EXPECT_THROW(refine(s0, b, sched, s0.margins), Error);
}

TEST(Training, SingleAxisHasNoIntrinsicTriplet) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 4));
  const auto loc = localize(b.world_image(), b, b, {});
  const auto sched = short_schedule(2);
  const std::vector<IntrinsicAxis> one{{"colour"}};
  auto s = start_run(loc, b.world_image(), one, b, sched, {});
  s = train_phase_one(s, b, sched, s.margins);
  s = train_phase_two(s, b, sched, s.margins);
  int rows = 0;
  for (const auto& r : s.loss_history)
    if (r.phase == Phase::phase2) {
      EXPECT_EQ(r.loss.triplet, 0.0);
      ++rows;
    }
  EXPECT_EQ(rows, sched.phase2_steps);
}

TEST(Training, RefineWithoutTrainableParametersIsSkippedWithNote) {
  synthetic::SyntheticBackend inner(synthetic::synthesize_world(2, 4));
  test_support::ForwardingBackend b(inner);
  b.hide_parameters = true;
  const auto loc = localize(inner.world_image(), inner, inner, {});
  auto sched = short_schedule(3);
  sched.phase1_steps = sched.phase2_steps = 2;
  auto s = start_run(loc, inner.world_image(), kAxes, b, sched, {});
  s = train_phase_one(s, b, sched, s.margins);
  s = train_phase_two(s, b, sched, s.margins);
  const auto before = s;
  s = refine(s, b, sched, s.margins);
  EXPECT_EQ(s.phase, Phase::done);
  EXPECT_EQ(s.loss_history.size(), before.loss_history.size());
  ASSERT_FALSE(s.notes.empty());
  EXPECT_NE(s.notes.back().find("refine skipped"), std::string::npos);
}

TEST(Training, NonFiniteLossAbortsWithStepStamp) {
  synthetic::SyntheticBackend inner(synthetic::synthesize_world(2, 4));
  test_support::ForwardingBackend b(inner);
  b.nan_noise = true;
  const auto loc = localize(inner.world_image(), inner, inner, {});
  const auto sched = short_schedule(3);
  auto s = start_run(loc, inner.world_image(), kAxes, b, sched, {});
  try {
    train_phase_one(s, b, sched, s.margins);
    FAIL() << "expected numeric_failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numeric_failure);
    EXPECT_NE(std::string(e.what()).find("phase1 step 0"), std::string::npos) << e.what();
  }
}

TEST(Training, RefineZeroStepsKeepsModelState) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 4));
  const auto loc = localize(b.world_image(), b, b, {});
  auto sched = short_schedule(5);
  sched.refine_steps = 0;
  auto s = start_run(loc, b.world_image(), kAxes, b, sched, {});
  s = train_phase_one(s, b, sched, s.margins);
  s = train_phase_two(s, b, sched, s.margins);
  const auto head = b.trainable_parameters();
  const auto r = refine(s, b, sched, s.margins);
  EXPECT_EQ(b.trainable_parameters(), head);
  EXPECT_EQ(r.head_parameters, head);
  for (std::size_t i = 0; i < s.concepts.size(); ++i)
    EXPECT_EQ(r.concepts[i].token_ids(), s.concepts[i].token_ids());
  for (std::size_t i = 0; i < s.concepts.size(); ++i) {
    EXPECT_EQ(r.concepts[i].conspec, s.concepts[i].conspec);
    EXPECT_EQ(r.concepts[i].inspec, s.concepts[i].inspec);
    for (std::size_t j = 0; j < kAxes.size(); ++j)
      EXPECT_EQ(r.concepts[i].intrinsics[j].embedding, s.concepts[i].intrinsics[j].embedding);
  }
}

TEST(Training, PriorBatchRegeneratesBitIdentically) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(1, 6));
  const auto loc = localize(b.world_image(), b, b, {});
  const auto s = start_run(loc, b.world_image(), kAxes, b, short_schedule(6), {});
  ASSERT_EQ(s.concepts.size(), 1u);
  const auto a = prior_batch(s, b);
  ASSERT_EQ(a.size(), 2u);
  synthetic::SyntheticBackend fresh(synthetic::synthesize_world(1, 6));
  const auto c = prior_batch(s, fresh);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(std::ranges::equal(a[i].data(), c[i].data()));
}

TEST(Training, MarginsMatchEncoderDistances) {
  synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 4));
  const auto loc = localize(b.world_image(), b, b, {});
  const auto s = start_run(loc, b.world_image(), kAxes, b, short_schedule(1), {});
  const auto again = axis_margins(kAxes, b);
  EXPECT_EQ(s.margins.gamma_phase2, again);
  const double g = squared_distance(b.encode_text("material"), b.encode_text("colour"));
  EXPECT_EQ(s.margins.gamma("material", "colour"), g);
  EXPECT_EQ(s.margins.gamma("colour", "material"), g);
  EXPECT_EQ(s.margins.gamma("colour", "colour"), 0.0);
  EXPECT_GT(g, 0.0);
}

TEST(Training, FullRunPhaseOneSatisfiesTriplet) {
  const auto& r = full_run();
  int rows = 0;
  double last = -1.0;
  for (const auto& row : r.after1.loss_history) {
    ++rows;
    last = row.loss.triplet;
  }
  EXPECT_EQ(rows, r.sched.phase1_steps);
  EXPECT_EQ(last, 0.0);
  for (const auto& c : r.after_refine.concepts) {
    const auto anchor = r.backend->word_embedding(c.init_word);
    EXPECT_LT(dist(anchor, c.conspec), dist(anchor, c.inspec));
  }
  for (const auto& c : r.after1.concepts) {
    const auto anchor = r.backend->word_embedding(c.init_word);
    EXPECT_LE(dist(anchor, c.conspec) + r.start.margins.gamma_phase1, dist(anchor, c.inspec));
  }
}

TEST(Training, FullRunPhaseTwoFreezesPhaseOneTokens) {
  const auto& r = full_run();
  ASSERT_EQ(r.after1.concepts.size(), r.after2.concepts.size());
  for (std::size_t i = 0; i < r.after1.concepts.size(); ++i) {
    EXPECT_EQ(r.after2.concepts[i].conspec, r.after1.concepts[i].conspec);
    EXPECT_EQ(r.after2.concepts[i].inspec, r.after1.concepts[i].inspec);
  }
  EXPECT_EQ(r.after2.head_parameters, r.start.head_parameters);
}

TEST(Training, FullRunIntrinsicsNearestOwnAxis) {
  const auto& r = full_run();
  for (const auto* s : {&r.after2, &r.after_refine})
    for (const auto& c : s->concepts)
      for (const auto& it : c.intrinsics)
        EXPECT_EQ(nearest_axis(it.embedding.as_vector(), kAxes, *r.backend), it.axis.name)
            << it.embedding.token_id;
}

TEST(Training, FullRunKeepsDimensionsAndIds) {
  const auto& r = full_run();
  for (std::size_t i = 0; i < r.start.concepts.size(); ++i) {
    EXPECT_EQ(r.after_refine.concepts[i].token_ids(), r.start.concepts[i].token_ids());
    for (const auto* t : {&r.after_refine.concepts[i].conspec, &r.after_refine.concepts[i].inspec})
      EXPECT_EQ(t->dim(), r.backend->embedding_dim());
    for (const auto& it : r.after_refine.concepts[i].intrinsics)
      EXPECT_EQ(it.embedding.dim(), r.backend->embedding_dim());
  }
  EXPECT_EQ(r.after_refine.loss_history.size(),
            static_cast<std::size_t>(r.sched.phase1_steps + r.sched.phase2_steps + r.sched.refine_steps));
}

TEST(Training, FullRunRefineDoesNotIncreaseProbeLoss) {
  const auto& r = full_run();
  EXPECT_TRUE(std::isfinite(r.probe_before));
  EXPECT_LE(r.probe_after, r.probe_before);
  EXPECT_NE(r.after_refine.head_parameters, r.start.head_parameters);
}

TEST(Training, EqualSeedsGiveIdenticalHistories) {
  auto run = [](std::uint64_t seed) {
    synthetic::SyntheticBackend b(synthetic::synthesize_world(3, 8));
    const auto loc = localize(b.world_image(), b, b, {});
    const auto sched = short_schedule(seed);
    auto s = start_run(loc, b.world_image(), kAxes, b, sched, {});
    const auto w = s.margins;
    s = train_phase_one(s, b, sched, w);
    s = train_phase_two(s, b, sched, w);
    s = refine(s, b, sched, w);
    return loss_csv(s.loss_history);
  };
  const auto a = run(21);
  EXPECT_EQ(a, run(21));
  EXPECT_NE(a, run(22));
}

TEST(LossCsv, HeaderAndRows) {
  LossRow r;
  r.step = 3;
  r.phase = Phase::phase2;
  r.concept_id = "obj1";
  r.loss = {0.5, 0.25, 0.0, 0.0, 0.5};
  EXPECT_EQ(loss_csv({r}),
            "step,phase,concept_id,recon,att,triplet,prior,total\n3,phase2,obj1,0.5,0.25,0,0,0.5\n");
}

TEST(PhaseNames, RoundTrip) {
  for (auto p : {Phase::phase1, Phase::phase2, Phase::refine, Phase::done})
    EXPECT_EQ(phase_from_string(to_string(p)), p);
  EXPECT_THROW(phase_from_string("phase3"), Error);
}

TEST(ScheduleValidation, RejectsNegativeCounts) {
  TrainSchedule s;
  s.phase2_steps = -1;
  EXPECT_THROW(s.validate(), Error);
  TrainSchedule r;
  r.learning_rate_refine = std::nan("");
  EXPECT_THROW(r.validate(), Error);
}

namespace {

StoredRun small_stored_run() {
  static synthetic::SyntheticBackend b(synthetic::synthesize_world(2, 4));
  const auto loc = localize(b.world_image(), b, b, {});
  auto sched = short_schedule(7);
  sched.phase1_steps = 5;
  sched.phase2_steps = 5;
  sched.refine_steps = 3;
  auto s = start_run(loc, b.world_image(), kAxes, b, sched, {});
  const auto w = s.margins;
  s = train_phase_one(s, b, sched, w);
  s = train_phase_two(s, b, sched, w);
  s = refine(s, b, sched, w);
  return {s, sched, b.name(), b.embedding_dim(), std::string(64, 'a')};
}

}  // namespace

TEST(ConceptStore, RoundTripIsBitExact) {
  const auto run = small_stored_run();
  const auto dir = scratch("roundtrip");
  export_concepts(dir, run);
  for (const char* f : {"concepts_manifest.json", "embeddings.bin", "losses.csv", "image.png"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(fs::file_size(dir / "embeddings.bin"), run.state.concepts.size() * 4 * run.embedding_dim * 4);

  const auto back = import_concepts(dir);
  ASSERT_EQ(back.state.concepts.size(), run.state.concepts.size());
  for (std::size_t i = 0; i < run.state.concepts.size(); ++i) {
    const auto& a = run.state.concepts[i];
    const auto& b = back.state.concepts[i];
    EXPECT_EQ(a.conspec, b.conspec);
    EXPECT_EQ(a.inspec, b.inspec);
    ASSERT_EQ(a.intrinsics.size(), b.intrinsics.size());
    for (std::size_t j = 0; j < a.intrinsics.size(); ++j) {
      EXPECT_EQ(a.intrinsics[j].axis, b.intrinsics[j].axis);
      EXPECT_EQ(a.intrinsics[j].embedding, b.intrinsics[j].embedding);
    }
    EXPECT_EQ(a.record.mask, b.record.mask);
    EXPECT_EQ(a.record.text_concept.label, b.record.text_concept.label);
    EXPECT_EQ(a.init_word, b.init_word);
  }
  EXPECT_EQ(back.state.margins.gamma_phase2, run.state.margins.gamma_phase2);
  EXPECT_EQ(back.state.margins.gamma_phase1, run.state.margins.gamma_phase1);
  EXPECT_EQ(back.state.prior_seeds, run.state.prior_seeds);
  EXPECT_EQ(back.state.head_parameters, run.state.head_parameters);
  EXPECT_EQ(back.state.phase, run.state.phase);
  EXPECT_EQ(back.schedule.seed, run.schedule.seed);
  EXPECT_EQ(back.schedule.phase2_steps, run.schedule.phase2_steps);
  EXPECT_EQ(loss_csv(back.state.loss_history), loss_csv(run.state.loss_history));
  EXPECT_EQ(back.config_sha256, run.config_sha256);
  EXPECT_TRUE(std::ranges::equal(back.state.image.data(), run.state.image.data()));

  // Re-export of the imported run is byte-identical.
  const auto dir2 = scratch("roundtrip2");
  export_concepts(dir2, back);
  EXPECT_EQ(io::read_text(dir / "concepts_manifest.json"), io::read_text(dir2 / "concepts_manifest.json"));
}

TEST(ConceptStore, ManifestRecordsDefaultGamma) {
  const auto run = small_stored_run();
  const auto dir = scratch("gamma");
  export_concepts(dir, run);
  const auto j = nlohmann::json::parse(io::read_text(dir / "concepts_manifest.json"));
  EXPECT_EQ(j["weights"]["gamma_phase1"].get<double>(), 0.05);
  EXPECT_EQ(j["weights"]["lambda_att"].get<double>(), 1e-5);
  EXPECT_EQ(j["weights"]["lambda_triplet"].get<double>(), 1.0);
}

TEST(ConceptStore, TamperedFilesAreRejected) {
  const auto run = small_stored_run();
  const auto dir = scratch("tamper");
  export_concepts(dir, run);
  {
    std::fstream f(dir / "embeddings.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(5);
    f.put('\x7f');
  }
  try {
    import_concepts(dir);
    FAIL() << "expected checksum_mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::checksum_mismatch);
  }

  export_concepts(dir, run);
  auto j = nlohmann::ordered_json::parse(io::read_text(dir / "concepts_manifest.json"));
  j["checksums"]["losses.csv"] = std::string(64, '0');
  io::write_text(dir / "concepts_manifest.json", j.dump(2));
  try {
    import_concepts(dir);
    FAIL() << "expected checksum_mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::checksum_mismatch);
  }
}

TEST(ConceptStore, VersionMismatchIsRejected) {
  const auto run = small_stored_run();
  const auto dir = scratch("version");
  export_concepts(dir, run);
  auto j = nlohmann::ordered_json::parse(io::read_text(dir / "concepts_manifest.json"));
  j["version"] = store_version + 1;
  io::write_text(dir / "concepts_manifest.json", j.dump(2));
  try {
    import_concepts(dir);
    FAIL() << "expected version_mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::version_mismatch);
  }
}

TEST(ConceptStore, MissingStoreIsInputError) {
  try {
    import_concepts(fs::temp_directory_path() / "ice_learning_nowhere");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::input_not_found);
  }
}
