#include "exprforge/json_io.hpp"

#include "exprforge/error.hpp"

namespace exprforge {

using json = nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& field, const char* expected) {
  throw Error(ErrorCode::ParamOutOfRange, "field '" + field + "' must be " + expected, field);
}

double number_field(const json& j, const char* field, double current) {
  auto it = j.find(field);
  if (it == j.end()) return current;
  if (!it->is_number()) bad_field(field, "a number");
  return it->get<double>();
}

}  // namespace

json to_json(const HyperParams& p) {
  json j = {
      {"denoising_strength", p.denoising_strength},
      {"controlnet_steps", p.controlnet_steps},
      {"sampling_steps", p.sampling_steps},
      {"cfg_scale", p.cfg_scale},
  };
  if (p.seed) {
    j["seed"] = *p.seed;
  } else {
    j["seed"] = "random";
  }
  return j;
}

HyperParams hyper_params_from_json(const json& j, HyperParams base) {
  if (!j.is_object()) bad_field("params", "an object");
  base.denoising_strength = number_field(j, "denoising_strength", base.denoising_strength);
  base.controlnet_steps = number_field(j, "controlnet_steps", base.controlnet_steps);
  base.cfg_scale = number_field(j, "cfg_scale", base.cfg_scale);
  if (auto it = j.find("sampling_steps"); it != j.end()) {
    if (!it->is_number_integer()) bad_field("sampling_steps", "an integer");
    base.sampling_steps = it->get<int>();
  }
  if (auto it = j.find("seed"); it != j.end()) {
    if (it->is_string() && it->get<std::string>() == "random") {
      base.seed.reset();
    } else if (it->is_number_unsigned()) {
      base.seed = it->get<std::uint64_t>();
    } else if (it->is_number_integer() && it->get<std::int64_t>() < 0) {
      base.seed.reset();  // negative seeds conventionally mean random
    } else {
      bad_field("seed", "a non-negative integer or \"random\"");
    }
  }
  return base;
}

json to_json(const LoRAConfig& l) {
  json j = {{"name", l.name}, {"trigger_words", l.trigger_words}, {"weight", l.weight}};
  if (l.step_override) j["step_override"] = *l.step_override;
  if (l.cfg_override) j["cfg_override"] = *l.cfg_override;
  return j;
}

LoRAConfig lora_from_json(const json& j) {
  if (!j.is_object()) bad_field("lora", "an object");
  LoRAConfig l;
  if (auto it = j.find("name"); it != j.end()) {
    if (!it->is_string()) bad_field("lora.name", "a string");
    l.name = it->get<std::string>();
  }
  if (auto it = j.find("trigger_words"); it != j.end()) {
    if (!it->is_array()) bad_field("lora.trigger_words", "an array of strings");
    for (const auto& w : *it) {
      if (!w.is_string()) bad_field("lora.trigger_words", "an array of strings");
      l.trigger_words.push_back(w.get<std::string>());
    }
  }
  l.weight = number_field(j, "weight", l.weight);
  if (auto it = j.find("step_override"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) bad_field("lora.step_override", "an integer");
    l.step_override = it->get<int>();
  }
  if (auto it = j.find("cfg_override"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) bad_field("lora.cfg_override", "a number");
    l.cfg_override = it->get<double>();
  }
  return l;
}

json to_json(const ScoredTag& t, int rank) {
  json fields = json::array();
  for (auto f : t.matched_fields) fields.push_back(std::string(to_string(f)));
  return {{"rank", rank}, {"tag", t.tag_name}, {"score", t.score}, {"matched_fields", fields}};
}

}  // namespace exprforge
