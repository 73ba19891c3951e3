#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exprforge {

// Prefix describes the image content, suffix controls the style. Either may be empty.
struct PromptTemplate {
  std::string prefix;
  std::string suffix;
};

struct LoRAConfig {
  std::string name;
  std::vector<std::string> trigger_words;
  double weight = 1.0;  // (0, 2]
  std::optional<int> step_override;
  std::optional<double> cfg_override;
  friend bool operator==(const LoRAConfig&, const LoRAConfig&) = default;
};

inline constexpr std::string_view kPromptSeparator = ", ";

// prefix, tags..., suffix joined with ", "; empty parts are skipped.
std::string assemble_prompt(const PromptTemplate& tmpl, const std::vector<std::string>& tags);

// Appends each LoRA's trigger words to the end of the prompt.
std::string inject_lora_triggers(std::string_view prompt, const std::vector<LoRAConfig>& loras);

// Throws ParamOutOfRange when weight is outside (0, 2] or a trigger word is empty.
void validate_lora(const LoRAConfig& lora);

}  // namespace exprforge
