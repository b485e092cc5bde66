#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ice/backends/contracts.hpp"
#include "ice/core/rng.hpp"
#include "ice/core/types.hpp"
#include "ice/localization/localize.hpp"
#include "ice/losses/losses.hpp"

namespace ice {

struct TrainSchedule {
  int phase1_steps = 400;
  int phase2_steps = 400;
  int refine_steps = 300;
  double learning_rate_tokens = 5e-3;
  double learning_rate_refine = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

// The thirty prompt templates used during concept learning, each with one "{}".
class TemplateBank {
 public:
  static const TemplateBank& standard();
  explicit TemplateBank(std::vector<std::string> templates);

  const std::vector<std::string>& templates() const noexcept { return templates_; }
  const std::string& sample(Rng& rng) const;
  std::string sha256() const;

 private:
  std::vector<std::string> templates_;
};

enum class Phase { phase1, phase2, refine, done };

std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view s);

struct LossRow {
  int step = 0;
  Phase phase = Phase::phase1;
  std::string concept_id;
  LossBreakdown loss;
};

// One CSV row: step,phase,concept_id,recon,att,triplet,prior,total.
std::string loss_csv(const std::vector<LossRow>& rows);

struct RunState {
  std::vector<LearnedConcept> concepts;
  std::vector<IntrinsicAxis> axes;
  Phase phase = Phase::phase1;
  int step = 0;
  LossWeights margins;
  std::vector<LossRow> loss_history;
  ImageTensor image;                     // pixel-space training image
  std::vector<double> head_parameters;   // backend trainable parameters after refine
  std::vector<std::uint64_t> prior_seeds;
  std::vector<std::string> notes;
};

// Filler text joined with " & ".
std::string phase_filler(const LearnedConcept& c, Phase phase);

PromptSpec sample_prompt(const TemplateBank& bank, const LearnedConcept& c, Phase phase, Rng& rng);

// Registers conspec/inspec/intrinsic tokens for every record. `notes` collects
// vocabulary fallbacks.
std::vector<LearnedConcept> init_tokens(const LocalizationResult& loc,
                                        const std::vector<IntrinsicAxis>& axes,
                                        ModelBackend& backend, double jitter_sigma,
                                        std::uint64_t seed, std::vector<std::string>* notes = nullptr);

// γ_jk = ‖E(name_j) − E(name_k)‖² from the backend text encoder.
std::map<AxisPair, double> axis_margins(const std::vector<IntrinsicAxis>& axes,
                                        const ModelBackend& backend);

inline constexpr double init_jitter_sigma = 0.01;

// Tokens initialized, margins computed, phase = phase1.
RunState start_run(const LocalizationResult& loc, const ImageTensor& image,
                   const std::vector<IntrinsicAxis>& axes, ModelBackend& backend,
                   const TrainSchedule& sched, LossWeights weights);

RunState train_phase_one(RunState state, ModelBackend& backend, const TrainSchedule& sched,
                         const LossWeights& w);
RunState train_phase_two(RunState state, ModelBackend& backend, const TrainSchedule& sched,
                         const LossWeights& w);
RunState refine(RunState state, ModelBackend& backend, const TrainSchedule& sched,
                const LossWeights& w);

// Class-noun prior images "a photo of a {label}", one per (concept, seed), in
// concept-major order. Generated with the backend's current parameters.
std::vector<ImageTensor> prior_batch(const RunState& state, const ModelBackend& backend);

// Fixed set of (concept, prompt, t, ε) samples used to compare model states.
struct ProbeSample {
  std::size_t concept_index = 0;
  std::string prompt;
  int t = 1;
  ImageTensor eps;
};
std::vector<ProbeSample> probe_batch(const RunState& state, const ModelBackend& backend,
                                     int count, std::uint64_t seed);
// Mean total loss (refine weighting, prior included) over the probe batch.
double probe_loss(const RunState& state, const ModelBackend& backend,
                  const std::vector<ProbeSample>& probe, const std::vector<ImageTensor>& priors,
                  const LossWeights& w);

// Nearest anchor prompt "a {axis} concept" for a token.
std::string nearest_axis(const Vector& token, const std::vector<IntrinsicAxis>& axes,
                         const ModelBackend& backend);

// Pushes the state's embeddings into the backend token table.
void sync_tokens(const RunState& state, ModelBackend& backend);

}  // namespace ice
