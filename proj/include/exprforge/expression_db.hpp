#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exprforge {

enum class Language { zh, en, ja, ko, other };

std::string_view to_string(Language lang);
// Unknown codes map to Language::other.
Language parse_language(std::string_view code);

struct Alias {
  std::string text;
  Language language = Language::other;
  friend bool operator==(const Alias&, const Alias&) = default;
};

struct StoryEntry {
  Language language = Language::en;
  int index = 1;  // 1..5
  std::string text;
  friend bool operator==(const StoryEntry&, const StoryEntry&) = default;
};

struct ExampleImageRef {
  std::string character_id;
  std::int64_t seed = 0;
  std::string path;  // relative to the database root
  friend bool operator==(const ExampleImageRef&, const ExampleImageRef&) = default;
};

struct ExpressionTag {
  std::string name;
  std::string definition;
  std::vector<Alias> aliases;
  bool transformation_free = true;
  std::vector<StoryEntry> stories;
  std::vector<ExampleImageRef> example_images;
  friend bool operator==(const ExpressionTag&, const ExpressionTag&) = default;
};

struct DatabaseCounts {
  std::size_t tags = 0;
  std::size_t aliases = 0;
  std::size_t stories = 0;
  std::size_t image_refs = 0;
  std::size_t transformation_free = 0;
  friend bool operator==(const DatabaseCounts&, const DatabaseCounts&) = default;
};

// Reference sizes of the complete published corpus.
inline constexpr DatabaseCounts kFullDatasetCounts{135, 332, 2700, 3375, 100};

// Immutable, validated collection of expression tags. Construct through
// load_database() or ExpressionDatabase::from_tags(); both enforce every
// invariant (unique names, unique aliases, non-empty fields).
class ExpressionDatabase {
 public:
  ExpressionDatabase() = default;

  static ExpressionDatabase from_tags(std::vector<ExpressionTag> tags, std::filesystem::path root = {});

  const std::vector<ExpressionTag>& tags() const noexcept { return tags_; }
  const std::filesystem::path& root() const noexcept { return root_; }
  std::size_t size() const noexcept { return tags_.size(); }
  bool empty() const noexcept { return tags_.empty(); }

  // Exact, case-sensitive lookup of the canonical name.
  const ExpressionTag* get_tag(std::string_view name) const;
  // Alias lookup; canonical names also resolve to themselves.
  const ExpressionTag* resolve_alias(std::string_view alias) const;
  // Position of a tag in database order, for tie-breaking.
  std::optional<std::size_t> position(std::string_view name) const;

  const std::map<std::string, std::string, std::less<>>& alias_index() const noexcept { return alias_index_; }

  std::vector<const ExpressionTag*> list_transformation_free() const;

  DatabaseCounts counts() const;

 private:
  std::vector<ExpressionTag> tags_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
  std::map<std::string, std::string, std::less<>> alias_index_;
  std::filesystem::path root_;
};

// Loads a database directory (containing tags.jsonl) or a tags.jsonl file.
ExpressionDatabase load_database(const std::filesystem::path& path);

// Parses tags.jsonl content. `root` resolves relative story-file paths.
ExpressionDatabase parse_database(std::string_view jsonl, const std::filesystem::path& root = {});

// One JSON object per line, stories inlined.
std::string serialize_database(const ExpressionDatabase& db);

struct ValidationReport {
  DatabaseCounts counts;
  std::vector<std::string> warnings;
};

// Reports counts; mismatches against the full-corpus sizes and missing
// example image files (only checked when the images/ tree exists) are
// warnings, never errors.
ValidationReport validate_database(const ExpressionDatabase& db);

// Renders the prompt used to ask an LLM for example stories for `tag`.
// Throws UnsupportedLanguage for Language::other.
std::string build_story_generation_prompt(const ExpressionTag& tag, Language language, int n_stories);

}  // namespace exprforge
