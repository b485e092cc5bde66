#include "ice/learning/learning.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ice/backends/schedule.hpp"
#include "ice/core/checksum.hpp"
#include "ice/core/error.hpp"
#include "ice/losses/sinkhorn.hpp"

namespace ice {

void TrainSchedule::validate() const {
  if (phase1_steps < 0 || phase2_steps < 0 || refine_steps < 0)
    fail(ErrorCode::schema_violation, "schedule step counts must be >= 0");
  if (!(learning_rate_tokens >= 0.0) || !(learning_rate_refine >= 0.0) ||
      !std::isfinite(learning_rate_tokens) || !std::isfinite(learning_rate_refine))
    fail(ErrorCode::schema_violation, "learning rates must be finite and >= 0");
}

TemplateBank::TemplateBank(std::vector<std::string> templates) : templates_(std::move(templates)) {
  require(!templates_.empty(), "template bank is empty");
  for (const auto& t : templates_) PromptSpec::make(t, "x");
}

const TemplateBank& TemplateBank::standard() {
  static const TemplateBank bank({
      "a photo of a {}",           "a rendering of a {}",        "a cropped photo of the {}",
      "a photo of a {}",           "a rendering of a {}",        "a cropped photo of the {}",
      "the photo of a {}",         "a photo of a clean {}",      "a photo of a dirty {}",
      "a dark photo of the {}",    "a photo of my {}",           "a photo of the cool {}",
      "a close-up photo of a {}",  "a bright photo of the {}",   "a cropped photo of a {}",
      "a photo of the {}",         "a good photo of the {}",     "a photo of one {}",
      "a close-up photo of the {}", "a rendition of the {}",     "a photo of the clean {}",
      "a rendition of a {}",       "a photo of a nice {}",       "a good photo of a {}",
      "a photo of the nice {}",    "a photo of the small {}",    "a photo of the weird {}",
      "a photo of the large {}",   "a photo of a cool {}",       "a photo of a small {}",
  });
  return bank;
}

const std::string& TemplateBank::sample(Rng& rng) const {
  return templates_[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(templates_.size()) - 1))];
}

std::string TemplateBank::sha256() const {
  std::string joined;
  for (const auto& t : templates_) joined += t + "\n";
  return sha256_hex(joined);
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::phase1: return "phase1";
    case Phase::phase2: return "phase2";
    case Phase::refine: return "refine";
    case Phase::done: return "done";
  }
  return "done";
}

Phase phase_from_string(std::string_view s) {
  for (auto p : {Phase::phase1, Phase::phase2, Phase::refine, Phase::done})
    if (to_string(p) == s) return p;
  fail(ErrorCode::schema_violation, "unknown phase '" + std::string(s) + "'");
}

std::string loss_csv(const std::vector<LossRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(17) << "step,phase,concept_id,recon,att,triplet,prior,total\n";
  for (const auto& r : rows)
    out << r.step << ',' << to_string(r.phase) << ',' << r.concept_id << ',' << r.loss.recon << ','
        << r.loss.att << ',' << r.loss.triplet << ',' << r.loss.prior << ',' << r.loss.total << '\n';
  return out.str();
}

std::string phase_filler(const LearnedConcept& c, Phase phase) {
  if (phase == Phase::phase1) return c.inspec.token_id + " & " + c.conspec.token_id;
  std::string out;
  for (const auto& t : c.intrinsics) out += t.embedding.token_id + " & ";
  return out + c.conspec.token_id;
}

PromptSpec sample_prompt(const TemplateBank& bank, const LearnedConcept& c, Phase phase, Rng& rng) {
  require(phase != Phase::done, "sample_prompt: no prompts after training");
  return PromptSpec::make(bank.sample(rng), phase_filler(c, phase));
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) { return seed ^ fnv1a(tag); }

std::string concept_tag(std::size_t i) { return "obj" + std::to_string(i); }

TokenEmbedding jittered(std::string id, const Vector& base, double sigma, Rng& rng) {
  Vector v = base;
  for (double& x : v) x += sigma * rng.normal();
  return {std::move(id), to_float(v)};
}

void apply_step(TokenEmbedding& tok, const Vector& grad, double lr) {
  require(grad.size() == tok.values.size(), "gradient dimension mismatch for " + tok.token_id);
  for (std::size_t i = 0; i < grad.size(); ++i)
    tok.values[i] = static_cast<float>(static_cast<double>(tok.values[i]) - lr * grad[i]);
}

ImageTensor gaussian_like(const ImageTensor& like, Rng& rng) {
  std::vector<double> d(like.size());
  for (double& v : d) v = rng.normal();
  return ImageTensor(like.height(), like.width(), like.channels(), Space::latent, std::move(d));
}

// Token id → gradient accumulator.
using Grads = std::map<std::string, Vector>;

void accumulate(Grads& g, const std::string& id, const Vector& v, double scale) {
  auto& dst = g[id];
  if (dst.empty()) dst.assign(v.size(), 0.0);
  axpy(scale, v, dst);
}

struct StepOutcome {
  LossBreakdown loss;
  Grads tokens;
  std::vector<double> head;
};

struct Sample {
  std::size_t concept_index = 0;
  std::string prompt;
  int t = 1;
  const ImageTensor* eps = nullptr;
};

struct PriorSample {
  const ImageTensor* x0 = nullptr;
  std::string prompt;
  int t = 1;
  const ImageTensor* eps = nullptr;
};

bool attention_target_usable(const BinaryMask& mask, int h, int w) {
  return !mask.resampled(h, w).empty();
}

// Loss of one sampled concept under the given phase weighting, with optional
// gradients for the tokens and the backend head.
StepOutcome evaluate(const RunState& s, const ModelBackend& b, Phase phase, const Sample& smp,
                     const PriorSample* prior, const LossWeights& w, bool want_grad) {
  const LearnedConcept& c = s.concepts[smp.concept_index];
  const BinaryMask& mask = c.record.mask;
  const int t = smp.t;
  StepOutcome out;

  const ImageTensor x0 = b.to_latent(s.image);
  const ImageTensor xt = add_noise(x0, t, *smp.eps, b.schedule());
  const Conditioning cond = b.encode(smp.prompt);
  const DenoisePrediction pred = b.predict_noise(xt, t, cond);

  std::vector<double> g_eps;
  const double recon = want_grad ? recon_loss_grad(*smp.eps, pred.noise_estimate, mask, g_eps)
                                 : recon_loss(*smp.eps, pred.noise_estimate, mask);

  // Attention target: conspec in phase one, the intrinsic tokens' mean map afterwards.
  std::vector<std::string> att_tokens;
  if (phase == Phase::phase1 || c.intrinsics.empty()) {
    att_tokens.push_back(c.conspec.token_id);
  } else {
    for (const auto& it : c.intrinsics) att_tokens.push_back(it.embedding.token_id);
  }
  double att = 0.0;
  std::map<std::string, std::vector<double>> att_cot;
  const AttentionMap& first = pred.attention.at(att_tokens.front());
  if (attention_target_usable(mask, first.height(), first.width())) {
    std::vector<double> mean(first.size(), 0.0);
    for (const auto& id : att_tokens) {
      const auto a = pred.attention.at(id).normalized();
      axpy(1.0 / static_cast<double>(att_tokens.size()), a.weights(), mean);
    }
    const auto al = wasserstein_attention_loss(AttentionMap(first.height(), first.width(), mean),
                                               mask, want_grad);
    att = al.value;
    if (want_grad)
      for (const auto& id : att_tokens) {
        auto g = al.grad;
        for (double& v : g) v *= w.lambda_att / static_cast<double>(att_tokens.size());
        att_cot[id] = std::move(g);
      }
  }

  double triplet = 0.0;
  if (phase == Phase::phase1 || phase == Phase::refine) {
    const Vector anchor = b.word_embedding(c.init_word);
    const auto tg = triplet_loss_grad(anchor, c.conspec.as_vector(), c.inspec.as_vector(),
                                      w.gamma_phase1);
    triplet += tg.value;
    if (want_grad) {
      accumulate(out.tokens, c.conspec.token_id, tg.positive, w.lambda_triplet);
      accumulate(out.tokens, c.inspec.token_id, tg.negative, w.lambda_triplet);
    }
  }
  if ((phase == Phase::phase2 || phase == Phase::refine) && c.intrinsics.size() > 1) {
    for (std::size_t j = 0; j < c.intrinsics.size(); ++j) {
      const auto& axis = c.intrinsics[j].axis.name;
      const Vector anchor = b.encode_text(c.intrinsics[j].axis.anchor_prompt());
      std::vector<NamedVector> others;
      std::map<std::string, double> row;
      for (std::size_t k = 0; k < c.intrinsics.size(); ++k) {
        if (k == j) continue;
        const auto& other = c.intrinsics[k].axis.name;
        others.push_back({other, c.intrinsics[k].embedding.as_vector()});
        row[other] = w.gamma(axis, other);
      }
      const auto ig = intrinsic_triplet_loss_grad(anchor, c.intrinsics[j].embedding.as_vector(),
                                                  others, row);
      triplet += ig.value;
      if (want_grad) {
        accumulate(out.tokens, c.intrinsics[j].embedding.token_id, ig.own, w.lambda_triplet);
        std::size_t idx = 0;
        for (std::size_t k = 0; k < c.intrinsics.size(); ++k) {
          if (k == j) continue;
          accumulate(out.tokens, c.intrinsics[k].embedding.token_id, ig.others[idx++],
                     w.lambda_triplet);
        }
      }
    }
  }

  std::optional<double> prior_value;
  if (prior) {
    const ImageTensor pxt = add_noise(*prior->x0, prior->t, *prior->eps, b.schedule());
    const Conditioning pcond = b.encode(prior->prompt);
    const auto ppred = b.predict_noise(pxt, prior->t, pcond);
    std::vector<double> g_prior;
    prior_value = recon_loss_grad(*prior->eps, ppred.noise_estimate, std::nullopt, g_prior);
    if (want_grad) {
      for (double& v : g_prior) v *= prior_weight;
      const auto pg = b.predict_noise_vjp(pxt, prior->t, pcond, DenoiseCotangent{g_prior, {}});
      out.head = pg.parameters;
      for (const auto& [id, g] : pg.tokens) accumulate(out.tokens, id, g, 1.0);
    }
  }

  out.loss = total_loss(recon, att, triplet, w, prior_value);

  if (want_grad) {
    const auto dg = b.predict_noise_vjp(xt, t, cond, DenoiseCotangent{g_eps, att_cot});
    for (const auto& [id, g] : dg.tokens) accumulate(out.tokens, id, g, 1.0);
    if (out.head.empty()) {
      out.head = dg.parameters;
    } else {
      for (std::size_t i = 0; i < out.head.size(); ++i) out.head[i] += dg.parameters[i];
    }
  }
  return out;
}

TokenEmbedding* find_token(LearnedConcept& c, const std::string& id) {
  if (c.conspec.token_id == id) return &c.conspec;
  if (c.inspec.token_id == id) return &c.inspec;
  for (auto& it : c.intrinsics)
    if (it.embedding.token_id == id) return &it.embedding;
  return nullptr;
}

// Which of a concept's tokens a phase may move.
bool trainable_in(Phase phase, const LearnedConcept& c, const std::string& id) {
  switch (phase) {
    case Phase::phase1: return id == c.conspec.token_id || id == c.inspec.token_id;
    case Phase::phase2:
      return std::any_of(c.intrinsics.begin(), c.intrinsics.end(),
                         [&](const IntrinsicToken& t) { return t.embedding.token_id == id; });
    case Phase::refine: return find_token(const_cast<LearnedConcept&>(c), id) != nullptr;
    case Phase::done: return false;
  }
  return false;
}

// evaluate() with numeric failures stamped by phase and step.
StepOutcome evaluate_step(const RunState& s, const ModelBackend& b, Phase phase, const Sample& smp,
                          const PriorSample* prior, const LossWeights& w, int step) {
  try {
    return evaluate(s, b, phase, smp, prior, w, true);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::numeric_failure) throw;
    fail(ErrorCode::numeric_failure,
         std::string(to_string(phase)) + " step " + std::to_string(step) + ": " + e.what());
  }
}

void check_finite(const LossBreakdown& l, Phase phase, int step) {
  if (!std::isfinite(l.total))
    fail(ErrorCode::numeric_failure, std::string(to_string(phase)) + " step " +
                                         std::to_string(step) + ": non-finite loss");
}

void sync_concept(const LearnedConcept& c, ModelBackend& b) {
  b.set_token(c.conspec.token_id, c.conspec.values);
  b.set_token(c.inspec.token_id, c.inspec.values);
  for (const auto& it : c.intrinsics) b.set_token(it.embedding.token_id, it.embedding.values);
}

RunState run_token_phase(RunState state, ModelBackend& backend, const TrainSchedule& sched,
                         const LossWeights& w, Phase phase, int steps, Phase next) {
  sched.validate();
  w.validate();
  require(state.phase == phase, "training phases must run in order");
  require(!state.concepts.empty(), "no concepts to train");
  sync_tokens(state, backend);
  Rng rng(derive_seed(sched.seed, to_string(phase)));
  const auto& bank = TemplateBank::standard();
  const int T = backend.schedule().timesteps();
  for (int step = 0; step < steps; ++step) {
    const auto ci = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(state.concepts.size()) - 1));
    const auto prompt = sample_prompt(bank, state.concepts[ci], phase, rng);
    const int t = static_cast<int>(rng.uniform_int(1, T));
    const ImageTensor eps = gaussian_like(backend.to_latent(state.image), rng);
    const auto out = evaluate_step(state, backend, phase, {ci, prompt.rendered, t, &eps}, nullptr, w, step);
    check_finite(out.loss, phase, step);
    auto& c = state.concepts[ci];
    for (const auto& [id, g] : out.tokens) {
      if (!trainable_in(phase, c, id)) continue;
      if (!all_finite(g))
        fail(ErrorCode::numeric_failure, std::string(to_string(phase)) + " step " +
                                             std::to_string(step) + ": non-finite gradient");
      apply_step(*find_token(c, id), g, sched.learning_rate_tokens);
    }
    sync_concept(c, backend);
    state.loss_history.push_back({step, phase, concept_tag(ci), out.loss});
    state.step = step + 1;
  }
  state.phase = next;
  state.step = 0;
  return state;
}

}  // namespace

std::vector<LearnedConcept> init_tokens(const LocalizationResult& loc,
                                        const std::vector<IntrinsicAxis>& axes,
                                        ModelBackend& backend, double jitter_sigma,
                                        std::uint64_t seed, std::vector<std::string>* notes) {
  require(!loc.records.empty(), "init_tokens: localization produced no records");
  require(jitter_sigma >= 0.0, "init_tokens: jitter must be >= 0");
  for (std::size_t j = 0; j < axes.size(); ++j) {
    require(!axes[j].name.empty(), "intrinsic axis names must be non-empty");
    for (std::size_t k = 0; k < j; ++k)
      require(axes[k].name != axes[j].name, "duplicate intrinsic axis " + axes[j].name);
  }
  Rng rng(derive_seed(seed, "init"));
  const Vector placeholder = backend.word_embedding(backend.placeholder_word());
  std::vector<LearnedConcept> out;
  for (std::size_t i = 0; i < loc.records.size(); ++i) {
    const int idx = static_cast<int>(i);
    LearnedConcept c;
    c.record = loc.records[i];
    const std::string& label = c.record.text_concept.label;
    c.init_word = label;
    if (!backend.in_vocabulary(label)) {
      const Vector e = backend.word_embedding(label);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& word : backend.vocabulary()) {
        const double d = squared_distance(e, backend.word_embedding(word));
        if (d < best) {
          best = d;
          c.init_word = word;
        }
      }
      if (notes) notes->push_back("label '" + label + "' not in vocabulary; conspec " +
                                  conspec_id(idx) + " initialized from '" + c.init_word + "'");
    }
    c.conspec = {conspec_id(idx), to_float(backend.word_embedding(c.init_word))};
    c.inspec = jittered(inspec_id(idx), placeholder, jitter_sigma, rng);
    for (const auto& axis : axes)
      c.intrinsics.push_back(
          {axis, jittered(intrinsic_id(idx, axis.name), backend.word_embedding(axis.name),
                          jitter_sigma, rng)});
    backend.register_token(c.conspec);
    backend.register_token(c.inspec);
    for (const auto& it : c.intrinsics) backend.register_token(it.embedding);
    out.push_back(std::move(c));
  }
  return out;
}

std::map<AxisPair, double> axis_margins(const std::vector<IntrinsicAxis>& axes,
                                        const ModelBackend& backend) {
  std::map<AxisPair, double> out;
  std::vector<Vector> e;
  for (const auto& a : axes) e.push_back(backend.encode_text(a.name));
  for (std::size_t j = 0; j < axes.size(); ++j)
    for (std::size_t k = 0; k < axes.size(); ++k)
      out[{axes[j].name, axes[k].name}] = j == k ? 0.0 : squared_distance(e[j], e[k]);
  return out;
}

void sync_tokens(const RunState& state, ModelBackend& backend) {
  for (const auto& c : state.concepts) sync_concept(c, backend);
}

RunState start_run(const LocalizationResult& loc, const ImageTensor& image,
                   const std::vector<IntrinsicAxis>& axes, ModelBackend& backend,
                   const TrainSchedule& sched, LossWeights weights) {
  sched.validate();
  if (image.space() != Space::pixel) fail(ErrorCode::invalid_input, "training image must be in pixel space");
  RunState s;
  s.image = image;
  s.axes = axes;
  s.concepts = init_tokens(loc, axes, backend, init_jitter_sigma, sched.seed, &s.notes);
  for (const auto& c : s.concepts)
    if (c.record.mask.height() != image.height() || c.record.mask.width() != image.width())
      fail(ErrorCode::invalid_input, "concept mask and training image sizes differ");
  weights.gamma_phase2 = axis_margins(axes, backend);
  weights.validate();
  s.margins = weights;
  s.head_parameters = backend.trainable_parameters();
  s.prior_seeds = {derive_seed(sched.seed, "prior0") % 1000003, derive_seed(sched.seed, "prior1") % 1000003};
  return s;
}

RunState train_phase_one(RunState state, ModelBackend& backend, const TrainSchedule& sched,
                         const LossWeights& w) {
  return run_token_phase(std::move(state), backend, sched, w, Phase::phase1, sched.phase1_steps,
                         Phase::phase2);
}

RunState train_phase_two(RunState state, ModelBackend& backend, const TrainSchedule& sched,
                         const LossWeights& w) {
  return run_token_phase(std::move(state), backend, sched, w, Phase::phase2, sched.phase2_steps,
                         Phase::refine);
}

std::vector<ImageTensor> prior_batch(const RunState& state, const ModelBackend& backend) {
  std::vector<ImageTensor> out;
  for (const auto& c : state.concepts)
    for (auto seed : state.prior_seeds)
      out.push_back(backend.generate(backend.encode("a photo of a " + c.record.text_concept.label), seed));
  return out;
}

RunState refine(RunState state, ModelBackend& backend, const TrainSchedule& sched,
                const LossWeights& w) {
  sched.validate();
  w.validate();
  require(state.phase == Phase::refine, "refine runs after phase two");
  sync_tokens(state, backend);
  std::vector<double> head = backend.trainable_parameters();
  if (head.empty()) {
    state.notes.push_back("refine skipped: backend exposes no trainable parameters");
    state.phase = Phase::done;
    state.step = 0;
    return state;
  }
  const auto priors = prior_batch(state, backend);
  Rng rng(derive_seed(sched.seed, "refine"));
  const auto& bank = TemplateBank::standard();
  const int T = backend.schedule().timesteps();
  for (int step = 0; step < sched.refine_steps; ++step) {
    const auto ci = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(state.concepts.size()) - 1));
    const auto prompt = sample_prompt(bank, state.concepts[ci], Phase::refine, rng);
    const int t = static_cast<int>(rng.uniform_int(1, T));
    const ImageTensor eps = gaussian_like(backend.to_latent(state.image), rng);
    const auto pi = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(priors.size()) - 1));
    const int pt = static_cast<int>(rng.uniform_int(1, T));
    const ImageTensor peps = gaussian_like(eps, rng);
    const ImageTensor px0 = backend.to_latent(priors[pi]);
    const PriorSample prior{&px0,
                            "a photo of a " +
                                state.concepts[pi / state.prior_seeds.size()].record.text_concept.label,
                            pt, &peps};
    const auto out = evaluate_step(state, backend, Phase::refine, {ci, prompt.rendered, t, &eps},
                                   &prior, w, step);
    check_finite(out.loss, Phase::refine, step);
    auto& c = state.concepts[ci];
    for (const auto& [id, g] : out.tokens) {
      if (!trainable_in(Phase::refine, c, id)) continue;
      if (!all_finite(g))
        fail(ErrorCode::numeric_failure, "refine step " + std::to_string(step) + ": non-finite gradient");
      apply_step(*find_token(c, id), g, sched.learning_rate_refine);
    }
    if (!all_finite(out.head))
      fail(ErrorCode::numeric_failure, "refine step " + std::to_string(step) + ": non-finite gradient");
    for (std::size_t i = 0; i < head.size(); ++i) head[i] -= sched.learning_rate_refine * out.head[i];
    backend.set_trainable_parameters(head);
    sync_concept(c, backend);
    state.loss_history.push_back({step, Phase::refine, concept_tag(ci), out.loss});
    state.step = step + 1;
  }
  state.head_parameters = head;
  state.phase = Phase::done;
  state.step = 0;
  return state;
}

std::vector<ProbeSample> probe_batch(const RunState& state, const ModelBackend& backend,
                                     int count, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "probe"));
  const auto& bank = TemplateBank::standard();
  const int T = backend.schedule().timesteps();
  const ImageTensor like = backend.to_latent(state.image);
  std::vector<ProbeSample> out;
  for (int i = 0; i < count; ++i) {
    ProbeSample p;
    p.concept_index = static_cast<std::size_t>(i) % state.concepts.size();
    p.prompt = sample_prompt(bank, state.concepts[p.concept_index], Phase::refine, rng).rendered;
    p.t = static_cast<int>(rng.uniform_int(1, T));
    p.eps = gaussian_like(like, rng);
    out.push_back(std::move(p));
  }
  return out;
}

double probe_loss(const RunState& state, const ModelBackend& backend,
                  const std::vector<ProbeSample>& probe, const std::vector<ImageTensor>& priors,
                  const LossWeights& w) {
  require(!probe.empty(), "probe batch is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto& p = probe[i];
    std::optional<PriorSample> prior;
    ImageTensor px0;
    if (!priors.empty()) {
      const std::size_t pi = i % priors.size();
      px0 = backend.to_latent(priors[pi]);
      const std::size_t per = std::max<std::size_t>(1, state.prior_seeds.size());
      prior = PriorSample{&px0, "a photo of a " + state.concepts[pi / per].record.text_concept.label,
                          p.t, &p.eps};
    }
    sum += evaluate(state, backend, Phase::refine, {p.concept_index, p.prompt, p.t, &p.eps},
                    prior ? &*prior : nullptr, w, false)
               .loss.total;
  }
  return sum / static_cast<double>(probe.size());
}

std::string nearest_axis(const Vector& token, const std::vector<IntrinsicAxis>& axes,
                         const ModelBackend& backend) {
  require(!axes.empty(), "nearest_axis: no axes");
  std::string best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& a : axes) {
    const double d = squared_distance(token, backend.encode_text(a.anchor_prompt()));
    if (d < best_d) {
      best_d = d;
      best = a.name;
    }
  }
  return best;
}

}  // namespace ice
