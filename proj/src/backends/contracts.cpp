#include "ice/backends/contracts.hpp"

#include "ice/core/error.hpp"

namespace ice {

PromptSpec PromptSpec::make(std::string template_text, std::string filler) {
  const auto slot = template_text.find("{}");
  if (slot == std::string::npos || template_text.find("{}", slot + 2) != std::string::npos) {
    fail(ErrorCode::contract_violation,
         "prompt template must contain exactly one {} slot: " + template_text);
  }
  std::string rendered = template_text;
  rendered.replace(slot, 2, filler);
  return PromptSpec{std::move(template_text), std::move(filler), std::move(rendered)};
}

}  // namespace ice
