#include "exprforge/expression_db.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "exprforge/error.hpp"

namespace exprforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::zh: return "zh";
    case Language::en: return "en";
    case Language::ja: return "ja";
    case Language::ko: return "ko";
    case Language::other: return "other";
  }
  return "other";
}

Language parse_language(std::string_view code) {
  if (code == "zh") return Language::zh;
  if (code == "en") return Language::en;
  if (code == "ja") return Language::ja;
  if (code == "ko") return Language::ko;
  return Language::other;
}

namespace {

[[noreturn]] void schema_error(std::size_t record, const std::string& field, const std::string& what) {
  std::ostringstream msg;
  msg << "record " << record << ": field '" << field << "' " << what;
  throw Error(ErrorCode::SchemaViolation, msg.str(), field);
}

const json& require(const json& obj, const char* field, std::size_t record) {
  auto it = obj.find(field);
  if (it == obj.end()) schema_error(record, field, "is missing");
  return *it;
}

std::string require_string(const json& obj, const char* field, std::size_t record) {
  const json& v = require(obj, field, record);
  if (!v.is_string()) schema_error(record, field, "must be a string");
  return v.get<std::string>();
}

StoryEntry parse_story(const json& s, std::size_t record) {
  if (!s.is_object()) schema_error(record, "stories", "entries must be objects");
  StoryEntry story;
  const std::string lang = require_string(s, "language", record);
  story.language = parse_language(lang);
  if (story.language == Language::other) schema_error(record, "stories.language", "unsupported code '" + lang + "'");
  const json& idx = require(s, "index", record);
  if (!idx.is_number_integer()) schema_error(record, "stories.index", "must be an integer");
  story.index = idx.get<int>();
  if (story.index < 1 || story.index > 5) schema_error(record, "stories.index", "must be in [1,5]");
  story.text = require_string(s, "text", record);
  if (story.text.empty()) schema_error(record, "stories.text", "must be non-empty");
  return story;
}

std::vector<StoryEntry> load_story_file(const fs::path& file, std::size_t record) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingFile, "stories file not found: " + file.string(), file.string());
  std::vector<StoryEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json s;
    try {
      s = json::parse(line);
    } catch (const json::parse_error& e) {
      schema_error(record, "stories", std::string("file line is not valid JSON: ") + e.what());
    }
    out.push_back(parse_story(s, record));
  }
  return out;
}

ExpressionTag parse_tag(const json& obj, std::size_t record, const fs::path& root) {
  if (!obj.is_object()) schema_error(record, "<record>", "must be a JSON object");
  ExpressionTag tag;
  tag.name = require_string(obj, "name", record);
  if (tag.name.empty()) schema_error(record, "name", "must be non-empty");
  tag.definition = require_string(obj, "definition", record);
  if (tag.definition.empty()) schema_error(record, "definition", "must be non-empty");

  const json& flag = require(obj, "transformation_free", record);
  if (!flag.is_boolean()) schema_error(record, "transformation_free", "must be a boolean");
  tag.transformation_free = flag.get<bool>();

  const json& aliases = require(obj, "aliases", record);
  if (!aliases.is_array()) schema_error(record, "aliases", "must be an array");
  for (const auto& a : aliases) {
    if (!a.is_object()) schema_error(record, "aliases", "entries must be objects");
    Alias alias;
    alias.text = require_string(a, "text", record);
    if (alias.text.empty()) schema_error(record, "aliases.text", "must be non-empty");
    if (auto it = a.find("language"); it != a.end() && it->is_string()) {
      alias.language = parse_language(it->get<std::string>());
    }
    tag.aliases.push_back(std::move(alias));
  }

  if (auto it = obj.find("stories"); it != obj.end()) {
    if (it->is_string()) {
      tag.stories = load_story_file(root / it->get<std::string>(), record);
    } else if (it->is_array()) {
      for (const auto& s : *it) tag.stories.push_back(parse_story(s, record));
    } else {
      schema_error(record, "stories", "must be an array or a relative file path");
    }
  }

  if (auto it = obj.find("example_images"); it != obj.end()) {
    if (!it->is_array()) schema_error(record, "example_images", "must be an array");
    for (const auto& e : *it) {
      if (!e.is_object()) schema_error(record, "example_images", "entries must be objects");
      ExampleImageRef ref;
      ref.character_id = require_string(e, "character_id", record);
      const json& seed = require(e, "seed", record);
      if (!seed.is_number_integer()) schema_error(record, "example_images.seed", "must be an integer");
      ref.seed = seed.get<std::int64_t>();
      ref.path = require_string(e, "path", record);
      if (ref.path.empty() || fs::path(ref.path).is_absolute()) {
        schema_error(record, "example_images.path", "must be a non-empty relative path");
      }
      tag.example_images.push_back(std::move(ref));
    }
  }
  return tag;
}

}  // namespace

ExpressionDatabase ExpressionDatabase::from_tags(std::vector<ExpressionTag> tags, fs::path root) {
  ExpressionDatabase db;
  db.root_ = std::move(root);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& t = tags[i];
    if (t.name.empty()) schema_error(i + 1, "name", "must be non-empty");
    if (t.definition.empty()) schema_error(i + 1, "definition", "must be non-empty");
    if (!db.by_name_.emplace(t.name, i).second) {
      throw Error(ErrorCode::DuplicateTagName, "duplicate tag name '" + t.name + "'", t.name);
    }
  }
  for (const auto& t : tags) {
    std::set<std::string> own;
    for (const auto& a : t.aliases) {
      if (a.text.empty()) throw Error(ErrorCode::SchemaViolation, "empty alias on tag '" + t.name + "'", "aliases.text");
      if (a.text == t.name) {
        throw Error(ErrorCode::SchemaViolation, "alias '" + a.text + "' duplicates the canonical name", "aliases.text");
      }
      if (!own.insert(a.text).second) {
        throw Error(ErrorCode::SchemaViolation, "alias '" + a.text + "' listed twice on tag '" + t.name + "'",
                    "aliases.text");
      }
      if (auto other = db.by_name_.find(a.text); other != db.by_name_.end()) {
        throw Error(ErrorCode::AliasCollision,
                    "alias '" + a.text + "' of tag '" + t.name + "' collides with tag name '" + a.text + "'", a.text);
      }
      auto [it, inserted] = db.alias_index_.emplace(a.text, t.name);
      if (!inserted) {
        throw Error(ErrorCode::AliasCollision,
                    "alias '" + a.text + "' maps to both '" + it->second + "' and '" + t.name + "'", a.text);
      }
    }
    for (const auto& s : t.stories) {
      if (s.text.empty() || s.index < 1 || s.index > 5) {
        throw Error(ErrorCode::SchemaViolation, "invalid story on tag '" + t.name + "'", "stories");
      }
    }
  }
  db.tags_ = std::move(tags);
  return db;
}

const ExpressionTag* ExpressionDatabase::get_tag(std::string_view name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &tags_[it->second];
}

const ExpressionTag* ExpressionDatabase::resolve_alias(std::string_view alias) const {
  if (const auto* t = get_tag(alias)) return t;
  auto it = alias_index_.find(alias);
  return it == alias_index_.end() ? nullptr : get_tag(it->second);
}

std::optional<std::size_t> ExpressionDatabase::position(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::vector<const ExpressionTag*> ExpressionDatabase::list_transformation_free() const {
  std::vector<const ExpressionTag*> out;
  for (const auto& t : tags_) {
    if (t.transformation_free) out.push_back(&t);
  }
  return out;
}

DatabaseCounts ExpressionDatabase::counts() const {
  DatabaseCounts c;
  c.tags = tags_.size();
  for (const auto& t : tags_) {
    c.aliases += t.aliases.size();
    c.stories += t.stories.size();
    c.image_refs += t.example_images.size();
    c.transformation_free += t.transformation_free ? 1 : 0;
  }
  return c;
}

ExpressionDatabase parse_database(std::string_view jsonl, const fs::path& root) {
  std::vector<ExpressionTag> tags;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      schema_error(record, "<record>", std::string("is not valid JSON: ") + e.what());
    }
    tags.push_back(parse_tag(obj, record, root));
  }
  return ExpressionDatabase::from_tags(std::move(tags), root);
}

ExpressionDatabase load_database(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorCode::MissingFile, "database path not found: " + path.string(), path.string());
  fs::path file = path;
  fs::path root = path.parent_path();
  if (fs::is_directory(path)) {
    file = path / "tags.jsonl";
    root = path;
    if (!fs::exists(file)) throw Error(ErrorCode::MissingFile, "missing " + file.string(), file.string());
  }
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + file.string(), file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_database(buf.str(), root);
}

std::string serialize_database(const ExpressionDatabase& db) {
  std::string out;
  for (const auto& t : db.tags()) {
    json obj;
    obj["name"] = t.name;
    obj["definition"] = t.definition;
    obj["aliases"] = json::array();
    for (const auto& a : t.aliases) obj["aliases"].push_back({{"text", a.text}, {"language", to_string(a.language)}});
    obj["transformation_free"] = t.transformation_free;
    obj["stories"] = json::array();
    for (const auto& s : t.stories) {
      obj["stories"].push_back({{"language", to_string(s.language)}, {"index", s.index}, {"text", s.text}});
    }
    obj["example_images"] = json::array();
    for (const auto& e : t.example_images) {
      obj["example_images"].push_back({{"character_id", e.character_id}, {"seed", e.seed}, {"path", e.path}});
    }
    out += obj.dump();
    out += '\n';
  }
  return out;
}

ValidationReport validate_database(const ExpressionDatabase& db) {
  ValidationReport report;
  report.counts = db.counts();
  const auto& c = report.counts;
  const auto& full = kFullDatasetCounts;
  auto compare = [&](const char* what, std::size_t got, std::size_t want) {
    if (got != want) {
      report.warnings.push_back(std::string(what) + ": " + std::to_string(got) + " (full dataset has " +
                                std::to_string(want) + ")");
    }
  };
  compare("tags", c.tags, full.tags);
  compare("aliases", c.aliases, full.aliases);
  compare("stories", c.stories, full.stories);
  compare("image refs", c.image_refs, full.image_refs);
  compare("transformation-free tags", c.transformation_free, full.transformation_free);

  if (!db.root().empty() && fs::is_directory(db.root() / "images")) {
    for (const auto& t : db.tags()) {
      for (const auto& e : t.example_images) {
        if (!fs::exists(db.root() / e.path)) {
          report.warnings.push_back("missing example image for '" + t.name + "': " + e.path);
        }
      }
    }
  }
  return report;
}

std::string build_story_generation_prompt(const ExpressionTag& tag, Language language, int n_stories) {
  const char* language_name = nullptr;
  switch (language) {
    case Language::zh: language_name = "Chinese"; break;
    case Language::en: language_name = "English"; break;
    case Language::ja: language_name = "Japanese"; break;
    case Language::ko: language_name = "Korean"; break;
    case Language::other: break;
  }
  if (language_name == nullptr) {
    throw Error(ErrorCode::UnsupportedLanguage, "stories can only be requested in zh, en, ja or ko");
  }
  if (n_stories < 1) throw Error(ErrorCode::ParamOutOfRange, "n_stories must be >= 1", "n_stories");

  std::string aliases = "[";
  for (std::size_t i = 0; i < tag.aliases.size(); ++i) {
    if (i > 0) aliases += ", ";
    aliases += '"' + tag.aliases[i].text + '"';
  }
  aliases += "]";

  const std::string n = std::to_string(n_stories);
  std::string out;
  out += "Expression Tag: " + tag.name + "\n\n";
  out += "Definition:\n\n";
  out += tag.definition + "\n\n";
  out += "Alternative Tags: " + aliases + "\n\n";
  out += "Provide a short story background (3 to 5 sentences) that make a character do this expression. ";
  out += "Generate natural stories, without explicitly referring to the expression. ";
  out += "Write the story in " + std::string(language_name) + ", and repeat " + n + " times. ";
  out += "Only output " + n + " stories, each starting with a number from 1 to " + n + ", followed by a period.";
  return out;
}

}  // namespace exprforge
