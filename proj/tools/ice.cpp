// ice: localize concepts in a single image, learn structured concept tokens,
// compose them into new images and evaluate the results.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "ice/cli/commands.hpp"
#include "ice/core/error.hpp"

namespace fs = std::filesystem;
using namespace ice;

namespace {

struct Globals {
  std::string config;
  std::string workdir;
  std::optional<std::uint64_t> seed;
};

RunConfig resolve_config(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) cfg.set_seed(*g.seed);
  cfg.validate();
  return cfg;
}

// --workdir, then paths.workdir, then $ICE_WORKDIR, then the current directory.
fs::path resolve_workdir(const Globals& g, const RunConfig& cfg) {
  if (!g.workdir.empty()) return g.workdir;
  if (!cfg.paths.workdir.empty()) return cfg.paths.workdir;
  if (const char* env = std::getenv("ICE_WORKDIR"); env && *env) return env;
  return fs::current_path();
}

fs::path input_or_config(const std::string& given, const RunConfig& cfg, const char* what) {
  if (!given.empty()) return given;
  if (!cfg.paths.input.empty()) return cfg.paths.input;
  fail(ErrorCode::invalid_input, std::string("missing ") + what + " (argument or paths.input)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intrinsic concept extraction from a single image"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config, "JSON run config");
  app.add_option("-w,--workdir", g.workdir, "output directory (default: $ICE_WORKDIR or .)");
  app.add_option("--seed", g.seed, "overrides the config seed");

  std::string input;
  auto* localize = app.add_subcommand("localize", "Stage One: extract object-level concepts and masks");
  localize->add_option("image", input, "PNG image or synthetic world JSON");

  std::string manifest;
  auto* learn = app.add_subcommand("learn", "Stage Two: learn conspec, inspec and intrinsic tokens");
  learn->add_option("manifest", manifest, "Stage One directory or concepts.json");

  std::string store;
  std::vector<std::string> compose;
  std::uint64_t gen_seed = 0;
  bool joint = false;
  auto* generate = app.add_subcommand("generate", "render images from learned token compositions");
  generate->add_option("store", store, "concept store directory")->required();
  generate->add_option("--compose", compose, "objN or objN:axis=objM,... (repeatable)")->required();
  generate->add_option("--image-seed", gen_seed, "generation seed (default: the run seed)");
  generate->add_flag("--joint", joint, "render all compositions in one image");

  auto* eval = app.add_subcommand("eval", "metrics and reports");
  eval->require_subcommand(1);
  bool plots = false;
  eval->add_flag("--plots", plots, "also write SVG plots");
  std::string pred, gt;
  auto* masks = eval->add_subcommand("masks", "Hungarian-matched mask quality");
  masks->add_option("--pred", pred, "localization manifest, world JSON or mask list")->required();
  masks->add_option("--gt", gt, "localization manifest, world JSON or mask list")->required();
  auto* uce = eval->add_subcommand("uce", "identity/composition similarity and top-k accuracy");
  uce->add_option("store", store, "concept store directory")->required();
  std::string descriptions, image_key;
  auto* icbench = eval->add_subcommand("icbench", "intrinsic concept text-text / text-visual scores");
  icbench->add_option("store", store, "concept store directory")->required();
  icbench->add_option("--descriptions", descriptions, "descriptions.json");
  icbench->add_option("--image", image_key, "image key in the descriptions file");
  bool align = false;
  auto* pixels = eval->add_subcommand("pixels", "pixel accuracy and mIoU of label maps");
  pixels->add_option("--pred", pred, "predicted label PNG")->required();
  pixels->add_option("--gt", gt, "ground-truth label PNG")->required();
  pixels->add_flag("--align", align, "Hungarian-align predicted label ids first");

  auto* world = app.add_subcommand("world", "synthetic world fixtures");
  world->require_subcommand(1);
  int count = 3, height = 32, width = 32;
  std::uint64_t world_seed = 0;
  std::string out;
  auto* synth = world->add_subcommand("synth", "write a synthetic world (JSON, regions, image.png, descriptions.json)");
  synth->add_option("--count", count, "number of shapes")->check(CLI::Range(1, 5));
  synth->add_option("--world-seed", world_seed, "layout seed (default: --seed, else 0)");
  synth->add_option("--height", height)->check(CLI::PositiveNumber);
  synth->add_option("--width", width)->check(CLI::PositiveNumber);
  synth->add_option("--out", out, "world JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << cli::error_json(ErrorCode::invalid_input, e.what()) << '\n';
    return exit_code_for(ErrorCode::invalid_input);
  }

  try {
    const RunConfig cfg = resolve_config(g);
    const fs::path workdir = resolve_workdir(g, cfg);
    fs::path result;
    if (*localize) {
      result = cli::cmd_localize(cfg, input_or_config(input, cfg, "image"), workdir);
    } else if (*learn) {
      const fs::path m = manifest.empty() ? cli::localization_dir(workdir) : fs::path(manifest);
      result = cli::cmd_learn(cfg, m, workdir);
    } else if (*generate) {
      std::vector<cli::Composition> comps;
      for (const auto& c : compose) comps.push_back(cli::Composition::parse(c));
      const std::uint64_t s = generate->count("--image-seed") ? gen_seed : cfg.seed;
      for (const auto& p : cli::cmd_generate(cfg, store, comps, s, joint, workdir))
        std::cout << p.string() << '\n';
      return 0;
    } else if (*masks) {
      result = cli::cmd_eval_masks(cfg, pred, gt, plots, workdir);
    } else if (*uce) {
      result = cli::cmd_eval_uce(cfg, store, plots, workdir);
    } else if (*icbench) {
      result = cli::cmd_eval_icbench(cfg, store, descriptions, image_key, plots, workdir);
    } else if (*pixels) {
      result = cli::cmd_eval_pixels(cfg, pred, gt, align, plots, workdir);
    } else if (*synth) {
      const std::uint64_t s = synth->count("--world-seed") ? world_seed : g.seed.value_or(0);
      cli::world_synth(count, s, height, width, out);
      result = out;
    }
    std::cout << result.string() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << cli::error_json(e.code(), e.what()) << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << cli::error_json(ErrorCode::invalid_input, e.what()) << '\n';
    return exit_code_for(ErrorCode::invalid_input);
  }
}
