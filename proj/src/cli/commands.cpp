#include "ice/cli/commands.hpp"

#include <regex>

#include "ice/backends/synthetic.hpp"
#include "ice/cli/svg.hpp"
#include "ice/core/checksum.hpp"
#include "ice/core/error.hpp"
#include "ice/core/io.hpp"
#include "ice/evaluation/uce.hpp"
#include "ice/learning/store.hpp"

namespace ice::cli {

using json = nlohmann::ordered_json;

fs::path localization_dir(const fs::path& workdir) { return workdir / "localization"; }
fs::path store_dir(const fs::path& workdir) { return workdir / "concepts"; }
fs::path generated_dir(const fs::path& workdir) { return workdir / "generated"; }
fs::path eval_dir(const fs::path& workdir) { return workdir / "eval"; }

namespace {

void require_exists(const fs::path& p, ErrorCode code = ErrorCode::input_not_found) {
  if (!fs::exists(p)) fail(code, p.string() + ": no such file or directory");
}

std::string file_sha(const fs::path& p) {
  return sha256_hex(std::span<const std::uint8_t>(io::read_bytes(p)));
}

// Copies the world into `dir`; returns the files written.
std::vector<std::string> attach_world(const fs::path& dir, const synthetic::SyntheticWorld& world) {
  synthetic::save_world(dir / "world.json", world);
  std::vector<std::string> files{"world.json"};
  for (std::size_t i = 0; i < world.shapes.size(); ++i) files.push_back("region_" + std::to_string(i) + ".png");
  return files;
}

void fresh_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

// Loads a store and pushes its tokens and head into a backend built on the
// store's world.
struct LoadedStore {
  StoredRun run;
  OpenedBackend opened;
};

LoadedStore load_store(const RunConfig& cfg, const fs::path& store) {
  require_exists(store);
  LoadedStore s;
  s.run = import_concepts(store);
  const fs::path world = fs::exists(store / "world.json") ? store / "world.json" : fs::path();
  s.opened = open_backend(cfg, world);
  auto& b = *s.opened.backend;
  if (b.name() != s.run.backend || b.embedding_dim() != s.run.embedding_dim)
    fail(ErrorCode::invalid_input, "store was trained on backend '" + s.run.backend + "' (dim " +
                                       std::to_string(s.run.embedding_dim) + "), configured backend is '" +
                                       b.name() + "' (dim " + std::to_string(b.embedding_dim()) + ")");
  for (const auto& c : s.run.state.concepts) {
    b.register_token(c.conspec);
    b.register_token(c.inspec);
    for (const auto& it : c.intrinsics) b.register_token(it.embedding);
  }
  if (!s.run.state.head_parameters.empty()) b.set_trainable_parameters(s.run.state.head_parameters);
  return s;
}

SimilarityMode configured_mode(const RunConfig& cfg, const EmbeddingEncoder& enc) {
  return cfg.evaluation.similarity_mode == "auto" ? default_mode(enc)
                                                  : similarity_mode_from_string(cfg.evaluation.similarity_mode);
}

struct MaskSet {
  std::vector<BinaryMask> masks;
  std::string name;
};

MaskSet load_masks(const fs::path& p) {
  require_exists(p);
  if (fs::is_directory(p)) {
    const auto m = read_localization(p);
    MaskSet s{{}, m.source_image};
    for (const auto& r : m.result.records) s.masks.push_back(r.mask);
    return s;
  }
  json doc;
  try {
    doc = json::parse(io::read_text(p));
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, p.string() + ": " + e.what());
  }
  if (doc.contains("records")) {
    const auto m = read_localization(p);
    MaskSet s{{}, m.source_image};
    for (const auto& r : m.result.records) s.masks.push_back(r.mask);
    return s;
  }
  if (doc.contains("shapes")) {
    const auto w = synthetic::load_world(p);
    MaskSet s{{}, p.filename().string()};
    for (const auto& sh : w.shapes) s.masks.push_back(sh.region);
    return s;
  }
  if (doc.contains("masks")) {
    // Externally annotated masks: {"masks": ["a.png", ...]}, paths relative to the file.
    MaskSet s{{}, p.filename().string()};
    if (!doc["masks"].is_array()) fail(ErrorCode::schema_violation, p.string() + ": masks must be a list of PNG paths");
    for (const auto& m : doc["masks"]) {
      if (!m.is_string()) fail(ErrorCode::schema_violation, p.string() + ": masks must be a list of PNG paths");
      const auto png = p.parent_path() / m.get<std::string>();
      require_exists(png);
      s.masks.push_back(io::read_mask_png(png));
    }
    return s;
  }
  fail(ErrorCode::schema_violation, p.string() + ": not a localization manifest, world file or mask list");
}

void write_plot(const fs::path& dir, const std::string& name, const std::string& svg) {
  fs::create_directories(dir);
  io::write_text(dir / name, svg);
}

}  // namespace

OpenedBackend open_backend(const RunConfig& cfg, const fs::path& fallback_world) {
  OpenedBackend out;
  if (cfg.backend.name == "synthetic") {
    const fs::path world = !cfg.backend.world.empty() ? fs::path(cfg.backend.world) : fallback_world;
    if (world.empty())
      fail(ErrorCode::invalid_input, "synthetic backend needs a world: set backend.world or pass a world file");
    require_exists(world);
    out.world = synthetic::load_world(world);
    out.backend = std::make_unique<synthetic::SyntheticBackend>(*out.world, cfg.backend.synthetic);
    return out;
  }
  out.backend = make_backend(cfg.backend);
  return out;
}

synthetic::SyntheticWorld world_synth(int count, std::uint64_t seed, int height, int width,
                                      const fs::path& out) {
  auto world = synthetic::synthesize_world(count, seed, height, width);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  synthetic::save_world(out, world);
  io::write_png(out.parent_path() / "image.png", world.render());
  // The ground-truth attribute words double as an icbench descriptions fixture.
  json described = json::object();
  for (const auto& sh : world.shapes)
    described[sh.category] = {{"object", sh.category}, {"material", sh.material}, {"colour", sh.colour}};
  io::write_text(out.parent_path() / "descriptions.json", json{{"image.png", described}}.dump(2) + "\n");
  return world;
}

fs::path cmd_localize(const RunConfig& cfg, const fs::path& input, const fs::path& workdir) {
  require_exists(input);
  const bool is_world = input.extension() == ".json";
  std::optional<synthetic::SyntheticWorld> input_world;
  ImageTensor image;
  if (is_world) {
    input_world = synthetic::load_world(input);
    image = input_world->render();
  } else {
    image = io::read_png(input);
  }
  auto opened = open_backend(cfg, is_world ? input : fs::path());
  auto& b = *opened.backend;
  const auto result = localize(image, b, b, cfg.localization);

  const auto dir = localization_dir(workdir);
  fresh_dir(dir);
  std::vector<std::string> extra;
  if (opened.world) extra = attach_world(dir, *opened.world);
  write_localization(dir, result, input.filename().string(), image, {config_sha256(cfg), extra});
  return dir;
}

fs::path cmd_learn(const RunConfig& cfg, const fs::path& manifest, const fs::path& workdir) {
  require_exists(manifest);
  const auto dir = store_dir(workdir);
  // A failed run must not leave an older store looking current.
  fs::remove_all(dir);
  const auto man = read_localization(manifest);
  if (man.result.records.empty())
    fail(ErrorCode::invalid_input, "the localization manifest has no records to learn from");
  const fs::path world = fs::exists(man.dir / "world.json") ? man.dir / "world.json" : fs::path();
  auto opened = open_backend(cfg, world);
  auto& b = *opened.backend;

  auto state = start_run(man.result, man.image, cfg.axes, b, cfg.schedule, cfg.weights);
  const LossWeights w = state.margins;
  state = train_phase_one(std::move(state), b, cfg.schedule, w);
  state = train_phase_two(std::move(state), b, cfg.schedule, w);
  state = refine(std::move(state), b, cfg.schedule, w);

  fresh_dir(dir);
  std::vector<std::string> attachments;
  if (opened.world) attachments = attach_world(dir, *opened.world);
  {
    std::vector<double> recon, triplet, total;
    std::vector<std::pair<double, std::string>> marks;
    Phase last = Phase::done;
    for (std::size_t i = 0; i < state.loss_history.size(); ++i) {
      const auto& r = state.loss_history[i];
      if (r.phase != last) marks.emplace_back(static_cast<double>(i), std::string(to_string(r.phase)));
      last = r.phase;
      recon.push_back(r.loss.recon);
      triplet.push_back(r.loss.triplet);
      total.push_back(r.loss.total);
    }
    write_plot(dir, "loss_curve.svg",
               svg::line_chart("training loss", {{"total", total}, {"recon", recon}, {"triplet", triplet}}, marks));
    attachments.push_back("loss_curve.svg");
  }
  StoredRun run{std::move(state), cfg.schedule, b.name(), b.embedding_dim(), config_sha256(cfg), attachments};
  export_concepts(dir, run);
  return dir;
}

Composition Composition::parse(const std::string& spec) {
  static const std::regex whole(R"(obj(\d+)(?::(.*))?)");
  static const std::regex item(R"(([A-Za-z_][A-Za-z0-9_-]*)=obj(\d+))");
  std::smatch m;
  if (!std::regex_match(spec, m, whole))
    fail(ErrorCode::invalid_input, "composition '" + spec + "': expected objN or objN:axis=objM,...");
  Composition c;
  c.base = std::stoi(m[1].str());
  if (m[2].matched) {
    std::string rest = m[2].str();
    std::size_t start = 0;
    while (start <= rest.size()) {
      const auto end = rest.find(',', start);
      const std::string part = rest.substr(start, end == std::string::npos ? std::string::npos : end - start);
      std::smatch im;
      if (!std::regex_match(part, im, item))
        fail(ErrorCode::invalid_input, "composition '" + spec + "': bad override '" + part + "'");
      c.overrides.emplace_back(im[1].str(), std::stoi(im[2].str()));
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  return c;
}

std::string Composition::slug() const {
  std::string s = "obj" + std::to_string(base);
  for (const auto& [axis, donor] : overrides) s += "." + axis + "-obj" + std::to_string(donor);
  return s;
}

std::string composition_filler(const std::vector<LearnedConcept>& concepts, const Composition& c) {
  const auto concept_at = [&](int i) -> const LearnedConcept& {
    if (i < 0 || static_cast<std::size_t>(i) >= concepts.size())
      fail(ErrorCode::unknown_concept, "no concept obj" + std::to_string(i) + " in the store");
    return concepts[static_cast<std::size_t>(i)];
  };
  const auto& base = concept_at(c.base);
  std::map<std::string, int> donor;
  for (const auto& [axis, d] : c.overrides) {
    concept_at(d);
    bool known = axis == "object";
    for (const auto& it : base.intrinsics) known = known || it.axis.name == axis;
    if (!known) fail(ErrorCode::unknown_token, "concept obj" + std::to_string(c.base) + " has no '" + axis + "' token");
    donor[axis] = d;
  }
  std::string out;
  for (const auto& it : base.intrinsics) {
    const auto d = donor.find(it.axis.name);
    out += (d == donor.end() ? it.embedding.token_id : concept_at(d->second).intrinsic(it.axis.name).token_id) + " & ";
  }
  const auto d = donor.find("object");
  return out + (d == donor.end() ? base.conspec.token_id : concept_at(d->second).conspec.token_id);
}

std::vector<fs::path> cmd_generate(const RunConfig& cfg, const fs::path& store,
                                   const std::vector<Composition>& compositions, std::uint64_t seed,
                                   bool joint, const fs::path& workdir) {
  if (compositions.empty()) fail(ErrorCode::invalid_input, "generate: no composition given");
  auto loaded = load_store(cfg, store);
  auto& b = *loaded.opened.backend;
  const auto& concepts = loaded.run.state.concepts;

  struct Job {
    std::string slug, prompt;
    std::vector<std::string> specs;
  };
  std::vector<Job> jobs;
  if (joint) {
    Job j;
    std::string filler;
    for (std::size_t i = 0; i < compositions.size(); ++i) {
      filler += (i ? " and " : "") + composition_filler(concepts, compositions[i]);
      j.slug += (i ? "+" : "") + compositions[i].slug();
      j.specs.push_back(compositions[i].slug());
    }
    j.prompt = PromptSpec::make("a photo of a {}", filler).rendered;
    jobs.push_back(std::move(j));
  } else {
    for (const auto& c : compositions)
      jobs.push_back({c.slug(), PromptSpec::make("a photo of a {}", composition_filler(concepts, c)).rendered, {c.slug()}});
  }

  const auto dir = generated_dir(workdir);
  fs::create_directories(dir);
  std::vector<fs::path> out;
  json files = json::array();
  for (const auto& j : jobs) {
    const auto img = b.generate(b.encode(j.prompt), seed);
    const std::string name = j.slug + ".seed" + std::to_string(seed) + ".png";
    io::write_png(dir / name, img);
    files.push_back({{"file", name}, {"compositions", j.specs}, {"prompt", j.prompt}, {"seed", seed},
                     {"sha256", file_sha(dir / name)}});
    out.push_back(dir / name);
  }
  json doc = {{"store_manifest_sha256", file_sha(store / "concepts_manifest.json")},
              {"config_sha256", config_sha256(cfg)},
              {"images", files}};
  doc["content_sha256"] = sha256_hex(doc.dump());
  io::write_text(dir / "generated.json", doc.dump(2) + "\n");
  return out;
}

fs::path cmd_eval_masks(const RunConfig& cfg, const fs::path& pred, const fs::path& gt, bool plots,
                        const fs::path& workdir) {
  const auto p = load_masks(pred);
  const auto g = load_masks(gt);
  const auto r = evaluate_masks(p.masks, g.masks);
  const auto dir = eval_dir(workdir);
  std::vector<std::string> extra;
  if (plots) {
    std::vector<std::string> cats;
    std::vector<double> iou, rec, prec;
    for (std::size_t i = 0; i < r.assignment.size(); ++i) {
      cats.push_back(std::to_string(r.assignment[i].first) + "-" + std::to_string(r.assignment[i].second));
      iou.push_back(r.per_pair[i].iou);
      rec.push_back(r.per_pair[i].recall);
      prec.push_back(r.per_pair[i].precision);
    }
    extra.push_back("masks.svg");
    write_plot(dir, "masks.svg", svg::bar_chart("matched masks (pred-gt)", cats,
                                                {{"IoU", iou}, {"recall", rec}, {"precision", prec}}));
  }
  write_report(dir, "masks", mask_report(p.name, r), config_sha256(cfg), extra);
  return dir / "masks.json";
}

fs::path cmd_eval_uce(const RunConfig& cfg, const fs::path& store, bool plots, const fs::path& workdir) {
  auto loaded = load_store(cfg, store);
  auto& b = *loaded.opened.backend;
  UceProtocol protocol;
  protocol.images_per_concept = cfg.evaluation.images_per_concept;
  const auto& s = loaded.run.state;
  const auto r = uce_evaluate(s.concepts, s.image, b, configured_mode(cfg, b.evaluation_encoder()), protocol);
  const auto dir = eval_dir(workdir);
  std::vector<std::string> extra;
  if (plots) {
    std::vector<std::string> cats;
    std::vector<double> v;
    for (const auto& c : r.per_concept) {
      cats.push_back(c.label);
      v.push_back(c.sim_identity);
    }
    extra.push_back("uce.svg");
    write_plot(dir, "uce.svg", svg::bar_chart("identity similarity per concept", cats, {{"SIM-I", v}}));
  }
  write_report(dir, "uce", uce_report("image.png", r, protocol), config_sha256(cfg), extra);
  return dir / "uce.json";
}

fs::path cmd_eval_icbench(const RunConfig& cfg, const fs::path& store, const fs::path& descriptions,
                          const std::string& image_key, bool plots, const fs::path& workdir) {
  if (descriptions.empty() || !fs::exists(descriptions))
    fail(ErrorCode::descriptions_missing,
         "descriptions fixture not found: " + (descriptions.empty() ? std::string("(none given)") : descriptions.string()));
  json doc;
  try {
    doc = json::parse(io::read_text(descriptions));
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, descriptions.string() + ": " + e.what());
  }
  if (!doc.is_object() || doc.empty())
    fail(ErrorCode::schema_violation, descriptions.string() + ": expected {image: {concept: {axis: text}}}");
  std::string key = image_key;
  if (key.empty()) {
    if (doc.size() != 1)
      fail(ErrorCode::schema_violation, descriptions.string() + " describes several images; choose one with --image");
    key = doc.begin().key();
  }
  if (!doc.contains(key)) fail(ErrorCode::descriptions_missing, "no descriptions for image '" + key + "'");
  ConceptDescriptions d;
  try {
    for (const auto& [label, axes] : doc.at(key).items())
      for (const auto& [axis, text] : axes.items()) d[label][axis] = text.get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, descriptions.string() + ": " + e.what());
  }

  auto loaded = load_store(cfg, store);
  auto& b = *loaded.opened.backend;
  const auto& enc = b.evaluation_encoder();
  const auto r = icbench_scores(loaded.run.state.concepts, d, b, enc, configured_mode(cfg, enc));
  const auto dir = eval_dir(workdir);
  std::vector<std::string> extra;
  if (plots) {
    std::vector<std::string> cats;
    std::vector<double> tt, tv;
    for (const auto& [axis, v] : r.per_axis) {
      cats.push_back(axis);
      tt.push_back(v.first);
      tv.push_back(v.second);
    }
    extra.push_back("icbench.svg");
    write_plot(dir, "icbench.svg", svg::bar_chart("intrinsic concept scores", cats, {{"SIM T-T", tt}, {"SIM T-V", tv}}));
  }
  write_report(dir, "icbench", icbench_report(key, r, enc.id()), config_sha256(cfg), extra);
  return dir / "icbench.json";
}

fs::path cmd_eval_pixels(const RunConfig& cfg, const fs::path& pred, const fs::path& gt, bool align,
                         bool plots, const fs::path& workdir) {
  require_exists(pred);
  require_exists(gt);
  LabelGrid p, g;
  p.labels = io::read_label_png(pred, p.height, p.width);
  g.labels = io::read_label_png(gt, g.height, g.width);
  if (align) p = align_labels(p, g);
  const auto m = pixel_label_metrics(p, g);
  const auto dir = eval_dir(workdir);
  std::vector<std::string> extra;
  if (plots) {
    std::vector<std::string> cats;
    std::vector<double> v;
    for (const auto& [label, iou] : m.class_iou) {
      cats.push_back(std::to_string(label));
      v.push_back(iou);
    }
    extra.push_back("pixels.svg");
    write_plot(dir, "pixels.svg", svg::bar_chart("per-class IoU", cats, {{"IoU", v}}));
  }
  write_report(dir, "pixels", pixel_report(pred.filename().string(), m, align), config_sha256(cfg), extra);
  return dir / "pixels.json";
}

std::string error_json(ErrorCode code, const std::string& message) {
  return json{{"error", {{"code", to_string(code)}, {"message", message}, {"exit_code", exit_code_for(code)}}}}.dump();
}

}  // namespace ice::cli
