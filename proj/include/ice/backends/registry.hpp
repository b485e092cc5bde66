#pragma once

#include <memory>
#include <string>

#include "ice/backends/contracts.hpp"
#include "ice/backends/synthetic.hpp"

namespace ice {

struct BackendConfig {
  std::string name = "synthetic";
  std::string world;  // synthetic world JSON
  synthetic::SyntheticOptions synthetic;
};

// "synthetic" needs a world file. "diffusion-adapter" names the documented
// real-model contract, which this build does not ship; it fails with
// backend_unavailable.
std::unique_ptr<ModelBackend> make_backend(const BackendConfig& config);

}  // namespace ice
