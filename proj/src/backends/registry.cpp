#include "ice/backends/registry.hpp"

#include "ice/core/error.hpp"

namespace ice {

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& config) {
  if (config.name == "synthetic") {
    if (config.world.empty())
      fail(ErrorCode::invalid_input, "synthetic backend needs backend.world (a world JSON file)");
    return std::make_unique<synthetic::SyntheticBackend>(synthetic::load_world(config.world),
                                                         config.synthetic);
  }
  if (config.name == "diffusion-adapter")
    fail(ErrorCode::backend_unavailable,
         "the diffusion adapter is a documented contract; no implementation is linked into this build");
  fail(ErrorCode::invalid_input, "unknown backend '" + config.name + "'");
}

}  // namespace ice
