#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exprforge/expression_db.hpp"

namespace exprforge {

class TextCompletionClient;

enum class Field { name = 0, alias = 1, definition = 2, story = 3 };
inline constexpr std::size_t kFieldCount = 4;

std::string_view to_string(Field f);

struct RetrievalQuery {
  std::string text;
  std::optional<Language> language_hint;
  int k = 5;
};

struct ScoredTag {
  std::string tag_name;
  double score = 0.0;
  std::vector<Field> matched_fields;
  friend bool operator==(const ScoredTag&, const ScoredTag&) = default;
};

// Score assigned to an exact name/alias match; ranks above any lexical score.
inline constexpr double kExactMatchScore = 1.0e9;

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  std::array<double, kFieldCount> field_weights{4.0, 4.0, 2.0, 1.0};
};

// Latin text splits on whitespace and punctuation (ASCII lowercased); runs of
// CJK characters become overlapping character bigrams (a lone character is
// kept as a unigram).
std::vector<std::string> tokenize(std::string_view text);

// Per-field BM25 statistics over the tags of one database. A pure function of
// the database: rebuilding yields identical scores.
class RetrievalIndex {
 public:
  struct FieldStats {
    std::vector<std::map<std::string, int, std::less<>>> term_freqs;  // per document
    std::vector<int> lengths;
    std::map<std::string, int, std::less<>> doc_freq;
    double avg_length = 0.0;
  };

  RetrievalIndex() = default;
  explicit RetrievalIndex(const ExpressionDatabase& db, Bm25Params params = {});

  std::size_t document_count() const noexcept { return names_.size(); }
  const FieldStats& field(Field f) const { return fields_[static_cast<std::size_t>(f)]; }
  const Bm25Params& params() const noexcept { return params_; }
  const std::vector<std::string>& tag_names() const noexcept { return names_; }

  // Exact name/alias lookup used for the rank-1 short-circuit.
  struct ExactHit {
    std::size_t doc;
    Field field;
  };
  std::optional<ExactHit> exact_match(std::string_view text) const;

 private:
  Bm25Params params_;
  std::vector<std::string> names_;
  std::map<std::string, std::size_t, std::less<>> name_to_doc_;
  std::map<std::string, std::size_t, std::less<>> alias_to_doc_;
  std::array<FieldStats, kFieldCount> fields_;
};

RetrievalIndex build_index(const ExpressionDatabase& db, Bm25Params params = {});

// Ranked tags, at most query.k. An exact name or alias match is always rank 1;
// remaining slots hold positive BM25 scores, ties broken by database order.
std::vector<ScoredTag> retrieve(const RetrievalIndex& index, const RetrievalQuery& query);

struct LlmRetrievalResult {
  std::vector<ScoredTag> tags;
  // True when the model named no valid tag and lexical retrieval was used instead.
  bool degraded = false;
  std::string raw_response;
};

// The database rendered as the model's context: name, definition and aliases per tag.
std::string build_retrieval_context(const ExpressionDatabase& db);
std::string build_retrieval_prompt(const ExpressionDatabase& db, const RetrievalQuery& query);

// Splits a model answer on commas/newlines and keeps names that resolve
// exactly (name or alias). No fuzzy matching.
std::vector<std::string> parse_tag_response(const ExpressionDatabase& db, std::string_view response);

// Asks `llm` to pick tags. Throws EndpointUnavailable when the client fails;
// falls back to `index` lexical retrieval (degraded = true) when the answer
// contains no valid tag.
LlmRetrievalResult retrieve_via_llm(const ExpressionDatabase& db, const RetrievalIndex& index,
                                    const RetrievalQuery& query, TextCompletionClient& llm);

}  // namespace exprforge
