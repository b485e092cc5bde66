#include "ice/cli/config.hpp"

#include <set>

#include "ice/core/checksum.hpp"
#include "ice/core/error.hpp"
#include "ice/core/io.hpp"

namespace ice {

using json = nlohmann::ordered_json;

namespace {

// Reads typed values out of one JSON object and rejects keys it was never
// asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::schema_violation, where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::invalid_argument("number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned()) throw std::invalid_argument("nonnegative integer");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      fail(ErrorCode::schema_violation, where() + "." + key + ": expected " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail(ErrorCode::schema_violation, "unknown config key '" + sub(k.c_str()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  localization.validate();
  schedule.validate();
  if (!(weights.lambda_att >= 0.0) || !(weights.lambda_triplet >= 0.0) || !(weights.gamma_phase1 >= 0.0))
    fail(ErrorCode::schema_violation, "weights must be nonnegative");
  if (!weights.gamma_phase2.empty())
    fail(ErrorCode::schema_violation, "phase-two margins are computed from the text encoder");
  std::set<std::string> names;
  for (const auto& a : axes) {
    if (a.name.empty() || a.name.find_first_of(" \t&<>") != std::string::npos)
      fail(ErrorCode::schema_violation, "axis names must be single words: '" + a.name + "'");
    if (a.name == "object") fail(ErrorCode::schema_violation, "the object axis is the conspec token");
    if (!names.insert(a.name).second) fail(ErrorCode::schema_violation, "duplicate axis '" + a.name + "'");
  }
  if (schedule.seed != seed) fail(ErrorCode::schema_violation, "schedule seed must mirror the run seed");
  if (evaluation.similarity_mode != "auto" && evaluation.similarity_mode != "raw_cosine" &&
      evaluation.similarity_mode != "affine")
    fail(ErrorCode::schema_violation, "evaluation.similarity_mode must be auto, raw_cosine or affine");
  if (evaluation.images_per_concept < 1)
    fail(ErrorCode::schema_violation, "evaluation.images_per_concept must be >= 1");
  const auto& o = backend.synthetic;
  if (o.embedding_dim < 2 || o.attention_grid < 1 || o.timesteps < 1 || !(o.decode_beta > 0.0) ||
      !(o.beta_start > 0.0) || !(o.beta_end < 1.0) || o.beta_start > o.beta_end ||
      !(o.attribute_scale >= 0.0) || !(o.function_word_scale >= 0.0) || !(o.attention_floor >= 0.0) ||
      o.placeholder.empty())
    fail(ErrorCode::schema_violation, "backend.synthetic options out of range");
}

RunConfig parse_config(const json& doc) {
  RunConfig c;
  Section root(doc, "");
  if (const json* b = root.child("backend")) {
    Section s(*b, "backend");
    s.get("name", c.backend.name);
    s.get("world", c.backend.world);
    if (const json* o = s.child("synthetic")) {
      Section so(*o, "backend.synthetic");
      auto& x = c.backend.synthetic;
      so.get("embedding_dim", x.embedding_dim);
      so.get("attention_grid", x.attention_grid);
      so.get("decode_beta", x.decode_beta);
      so.get("embedding_seed", x.embedding_seed);
      so.get("timesteps", x.timesteps);
      so.get("beta_start", x.beta_start);
      so.get("beta_end", x.beta_end);
      so.get("placeholder", x.placeholder);
      so.get("attention_floor", x.attention_floor);
      so.get("function_word_scale", x.function_word_scale);
      so.get("attribute_scale", x.attribute_scale);
      so.finish();
    }
    s.finish();
  }
  if (const json* l = root.child("localization")) {
    Section s(*l, "localization");
    s.get("tau", c.localization.tau);
    s.get("max_iterations", c.localization.max_iterations);
    s.get("min_mask_coverage", c.localization.min_mask_coverage);
    s.finish();
  }
  if (const json* t = root.child("schedule")) {
    Section s(*t, "schedule");
    s.get("phase1_steps", c.schedule.phase1_steps);
    s.get("phase2_steps", c.schedule.phase2_steps);
    s.get("refine_steps", c.schedule.refine_steps);
    s.get("learning_rate_tokens", c.schedule.learning_rate_tokens);
    s.get("learning_rate_refine", c.schedule.learning_rate_refine);
    s.finish();
  }
  if (const json* w = root.child("weights")) {
    Section s(*w, "weights");
    s.get("lambda_att", c.weights.lambda_att);
    s.get("lambda_triplet", c.weights.lambda_triplet);
    s.get("gamma_phase1", c.weights.gamma_phase1);
    s.finish();
  }
  if (const json* a = root.child("axes")) {
    if (!a->is_array()) fail(ErrorCode::schema_violation, "axes must be a list of names");
    c.axes.clear();
    for (const auto& v : *a) {
      if (!v.is_string()) fail(ErrorCode::schema_violation, "axes must be a list of names");
      c.axes.push_back({v.get<std::string>()});
    }
  }
  if (const json* p = root.child("paths")) {
    Section s(*p, "paths");
    s.get("input", c.paths.input);
    s.get("workdir", c.paths.workdir);
    s.finish();
  }
  std::uint64_t seed = 0;
  root.get("seed", seed);
  c.set_seed(seed);
  if (const json* e = root.child("evaluation")) {
    Section s(*e, "evaluation");
    s.get("similarity_mode", c.evaluation.similarity_mode);
    s.get("images_per_concept", c.evaluation.images_per_concept);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  const auto& o = c.backend.synthetic;
  json axes = json::array();
  for (const auto& a : c.axes) axes.push_back(a.name);
  return {
      {"backend",
       {{"name", c.backend.name},
        {"world", c.backend.world},
        {"synthetic",
         {{"embedding_dim", o.embedding_dim},
          {"attention_grid", o.attention_grid},
          {"decode_beta", o.decode_beta},
          {"embedding_seed", o.embedding_seed},
          {"timesteps", o.timesteps},
          {"beta_start", o.beta_start},
          {"beta_end", o.beta_end},
          {"placeholder", o.placeholder},
          {"attention_floor", o.attention_floor},
          {"function_word_scale", o.function_word_scale},
          {"attribute_scale", o.attribute_scale}}}}},
      {"localization",
       {{"tau", c.localization.tau},
        {"max_iterations", c.localization.max_iterations},
        {"min_mask_coverage", c.localization.min_mask_coverage}}},
      {"schedule",
       {{"phase1_steps", c.schedule.phase1_steps},
        {"phase2_steps", c.schedule.phase2_steps},
        {"refine_steps", c.schedule.refine_steps},
        {"learning_rate_tokens", c.schedule.learning_rate_tokens},
        {"learning_rate_refine", c.schedule.learning_rate_refine}}},
      {"weights",
       {{"lambda_att", c.weights.lambda_att},
        {"lambda_triplet", c.weights.lambda_triplet},
        {"gamma_phase1", c.weights.gamma_phase1}}},
      {"axes", axes},
      {"paths", {{"input", c.paths.input}, {"workdir", c.paths.workdir}}},
      {"seed", c.seed},
      {"evaluation",
       {{"similarity_mode", c.evaluation.similarity_mode},
        {"images_per_concept", c.evaluation.images_per_concept}}},
  };
}

std::string config_sha256(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("paths");
  return sha256_hex(j.dump());
}

}  // namespace ice
