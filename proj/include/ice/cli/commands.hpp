#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ice/backends/synthetic_world.hpp"
#include "ice/cli/config.hpp"
#include "ice/evaluation/report.hpp"

namespace ice::cli {

namespace fs = std::filesystem;

// Output locations below the workdir.
fs::path localization_dir(const fs::path& workdir);
fs::path store_dir(const fs::path& workdir);
fs::path generated_dir(const fs::path& workdir);
fs::path eval_dir(const fs::path& workdir);

// Backend plus, for the synthetic backend, the world it was built on.
struct OpenedBackend {
  std::unique_ptr<ModelBackend> backend;
  std::optional<synthetic::SyntheticWorld> world;
};

// The configured backend; `fallback_world` is used when the config names none.
OpenedBackend open_backend(const RunConfig& cfg, const fs::path& fallback_world);

// Writes <out> (world JSON), its region PNGs, image.png and a descriptions.json
// with each shape's attribute words beside it.
synthetic::SyntheticWorld world_synth(int count, std::uint64_t seed, int height, int width,
                                      const fs::path& out);

// `input` is a PNG or a synthetic world JSON. Returns the manifest directory.
fs::path cmd_localize(const RunConfig& cfg, const fs::path& input, const fs::path& workdir);

// `manifest` is a Stage One directory or its concepts.json. Returns the store.
fs::path cmd_learn(const RunConfig& cfg, const fs::path& manifest, const fs::path& workdir);

// "obj0" renders concept 0 from its intrinsic tokens and conspec (the inspec
// is left out so swapped attributes are not pulled back by it);
// "obj0:colour=obj1,material=obj2" swaps in other concepts' tokens.
struct Composition {
  int base = 0;
  std::vector<std::pair<std::string, int>> overrides;  // axis → donor concept

  static Composition parse(const std::string& spec);
  std::string slug() const;
};

// One image per composition, or a single image of all of them when `joint`.
std::vector<fs::path> cmd_generate(const RunConfig& cfg, const fs::path& store,
                                   const std::vector<Composition>& compositions, std::uint64_t seed,
                                   bool joint, const fs::path& workdir);

// Filler used for a composition over a loaded store.
std::string composition_filler(const std::vector<LearnedConcept>& concepts, const Composition& c);

fs::path cmd_eval_masks(const RunConfig& cfg, const fs::path& pred, const fs::path& gt,
                        bool plots, const fs::path& workdir);
fs::path cmd_eval_uce(const RunConfig& cfg, const fs::path& store, bool plots,
                      const fs::path& workdir);
fs::path cmd_eval_icbench(const RunConfig& cfg, const fs::path& store,
                          const fs::path& descriptions, const std::string& image_key, bool plots,
                          const fs::path& workdir);
fs::path cmd_eval_pixels(const RunConfig& cfg, const fs::path& pred, const fs::path& gt,
                         bool align, bool plots, const fs::path& workdir);

// {"error": {"code", "message", "exit_code"}} as one line.
std::string error_json(ErrorCode code, const std::string& message);

}  // namespace ice::cli
