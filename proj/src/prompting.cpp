#include "exprforge/prompting.hpp"

#include "exprforge/error.hpp"

namespace exprforge {

namespace {

void append_part(std::string& out, std::string_view part) {
  if (part.empty()) return;
  if (!out.empty()) out += kPromptSeparator;
  out += part;
}

}  // namespace

std::string assemble_prompt(const PromptTemplate& tmpl, const std::vector<std::string>& tags) {
  std::string out;
  append_part(out, tmpl.prefix);
  for (const auto& t : tags) append_part(out, t);
  append_part(out, tmpl.suffix);
  return out;
}

std::string inject_lora_triggers(std::string_view prompt, const std::vector<LoRAConfig>& loras) {
  std::string out(prompt);
  for (const auto& lora : loras) {
    for (const auto& word : lora.trigger_words) append_part(out, word);
  }
  return out;
}

void validate_lora(const LoRAConfig& lora) {
  if (!(lora.weight > 0.0 && lora.weight <= 2.0)) {
    throw Error(ErrorCode::ParamOutOfRange, "LoRA '" + lora.name + "' weight must be in (0, 2]", "lora.weight");
  }
  for (const auto& w : lora.trigger_words) {
    if (w.empty()) throw Error(ErrorCode::ParamOutOfRange, "LoRA '" + lora.name + "' has an empty trigger word", "lora.trigger_words");
  }
  if (lora.step_override && *lora.step_override < 1) {
    throw Error(ErrorCode::ParamOutOfRange, "LoRA '" + lora.name + "' step override must be >= 1", "lora.step_override");
  }
  if (lora.cfg_override && !(*lora.cfg_override > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange, "LoRA '" + lora.name + "' cfg override must be > 0", "lora.cfg_override");
  }
}

}  // namespace exprforge
