#include "exprforge/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "exprforge/error.hpp"
#include "exprforge/llm_client.hpp"

namespace exprforge {

std::string_view to_string(Field f) {
  switch (f) {
    case Field::name: return "name";
    case Field::alias: return "alias";
    case Field::definition: return "definition";
    case Field::story: return "story";
  }
  return "?";
}

namespace {

// Decodes one UTF-8 sequence starting at text[i]; advances i. Malformed
// bytes decode as U+FFFD one byte at a time.
char32_t next_codepoint(std::string_view text, std::size_t& i) {
  const auto c0 = static_cast<unsigned char>(text[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= text.size()) return -1;
    const auto c = static_cast<unsigned char>(text[i + k]);
    return (c & 0xC0) == 0x80 ? (c & 0x3F) : -1;
  };
  if (c0 < 0x80) {
    ++i;
    return c0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((c0 & 0xE0) == 0xC0) {
    len = 2;
    cp = c0 & 0x1F;
  } else if ((c0 & 0xF0) == 0xE0) {
    len = 3;
    cp = c0 & 0x0F;
  } else if ((c0 & 0xF8) == 0xF0) {
    len = 4;
    cp = c0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int v = cont(static_cast<std::size_t>(k));
    if (v < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(v);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

bool is_cjk(char32_t cp) {
  return (cp >= 0x3040 && cp <= 0x30FF) ||   // hiragana, katakana
         (cp >= 0x3400 && cp <= 0x4DBF) ||   // CJK ext A
         (cp >= 0x4E00 && cp <= 0x9FFF) ||   // CJK unified
         (cp >= 0xF900 && cp <= 0xFAFF) ||   // compatibility ideographs
         (cp >= 0x1100 && cp <= 0x11FF) ||   // hangul jamo
         (cp >= 0x3130 && cp <= 0x318F) ||   // hangul compatibility jamo
         (cp >= 0xAC00 && cp <= 0xD7AF) ||   // hangul syllables
         (cp >= 0x31F0 && cp <= 0x31FF) ||   // katakana extensions
         (cp >= 0xFF66 && cp <= 0xFF9F);     // halfwidth katakana
}

bool is_separator(char32_t cp) {
  if (cp < 0x80) {
    const auto c = static_cast<unsigned char>(cp);
    return !(std::isalnum(c) != 0);
  }
  return (cp >= 0x2000 && cp <= 0x206F) ||  // general punctuation
         (cp >= 0x3000 && cp <= 0x303F) ||  // CJK symbols and punctuation
         (cp >= 0xFF00 && cp <= 0xFF65) ||  // fullwidth forms
         cp == 0x00A0 || cp == 0xFFFD || cp == 0x30FB;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string word;
  std::vector<char32_t> cjk_run;

  auto flush_word = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  auto flush_cjk = [&] {
    if (cjk_run.size() == 1) {
      std::string t;
      append_utf8(t, cjk_run[0]);
      tokens.push_back(std::move(t));
    } else {
      for (std::size_t k = 0; k + 1 < cjk_run.size(); ++k) {
        std::string t;
        append_utf8(t, cjk_run[k]);
        append_utf8(t, cjk_run[k + 1]);
        tokens.push_back(std::move(t));
      }
    }
    cjk_run.clear();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_codepoint(text, i);
    if (is_cjk(cp)) {
      flush_word();
      cjk_run.push_back(cp);
    } else if (is_separator(cp)) {
      flush_word();
      flush_cjk();
    } else {
      flush_cjk();
      if (cp < 0x80) {
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(cp)));
      } else {
        append_utf8(word, cp);
      }
    }
  }
  flush_word();
  flush_cjk();
  return tokens;
}

RetrievalIndex::RetrievalIndex(const ExpressionDatabase& db, Bm25Params params) : params_(params) {
  const auto& tags = db.tags();
  for (auto& f : fields_) {
    f.term_freqs.resize(tags.size());
    f.lengths.resize(tags.size(), 0);
  }
  auto add = [&](Field field, std::size_t doc, std::string_view text) {
    auto& stats = fields_[static_cast<std::size_t>(field)];
    for (auto& tok : tokenize(text)) {
      ++stats.term_freqs[doc][tok];
      ++stats.lengths[doc];
    }
  };
  for (std::size_t d = 0; d < tags.size(); ++d) {
    const auto& t = tags[d];
    names_.push_back(t.name);
    name_to_doc_.emplace(t.name, d);
    add(Field::name, d, t.name);
    for (const auto& a : t.aliases) {
      alias_to_doc_.emplace(a.text, d);
      add(Field::alias, d, a.text);
    }
    add(Field::definition, d, t.definition);
    for (const auto& s : t.stories) add(Field::story, d, s.text);
  }
  for (auto& f : fields_) {
    long long total = 0;
    for (std::size_t d = 0; d < tags.size(); ++d) {
      total += f.lengths[d];
      for (const auto& [term, tf] : f.term_freqs[d]) ++f.doc_freq[term];
    }
    f.avg_length = tags.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(tags.size());
  }
}

std::optional<RetrievalIndex::ExactHit> RetrievalIndex::exact_match(std::string_view text) const {
  const auto key = trim(text);
  if (auto it = name_to_doc_.find(key); it != name_to_doc_.end()) return ExactHit{it->second, Field::name};
  if (auto it = alias_to_doc_.find(key); it != alias_to_doc_.end()) return ExactHit{it->second, Field::alias};
  return std::nullopt;
}

RetrievalIndex build_index(const ExpressionDatabase& db, Bm25Params params) { return RetrievalIndex(db, params); }

std::vector<ScoredTag> retrieve(const RetrievalIndex& index, const RetrievalQuery& query) {
  std::vector<ScoredTag> out;
  const std::size_t n_docs = index.document_count();
  if (n_docs == 0 || query.k < 1) return out;

  const auto tokens = tokenize(query.text);
  const std::set<std::string> terms(tokens.begin(), tokens.end());
  const auto& p = index.params();

  struct Candidate {
    std::size_t doc;
    double score;
    std::vector<Field> fields;
  };
  std::vector<Candidate> candidates;
  const auto exact = index.exact_match(query.text);

  for (std::size_t d = 0; d < n_docs; ++d) {
    double total = 0.0;
    std::vector<Field> matched;
    for (std::size_t fi = 0; fi < kFieldCount; ++fi) {
      const auto& stats = index.field(static_cast<Field>(fi));
      if (stats.avg_length <= 0.0) continue;
      const auto& tf_map = stats.term_freqs[d];
      const double norm = p.k1 * (1.0 - p.b + p.b * stats.lengths[d] / stats.avg_length);
      double field_score = 0.0;
      for (const auto& term : terms) {
        auto it = tf_map.find(term);
        if (it == tf_map.end()) continue;
        const double df = stats.doc_freq.at(term);
        const double idf = std::log(1.0 + (static_cast<double>(n_docs) - df + 0.5) / (df + 0.5));
        const double tf = it->second;
        field_score += idf * tf * (p.k1 + 1.0) / (tf + norm);
      }
      if (field_score > 0.0) {
        total += p.field_weights[fi] * field_score;
        matched.push_back(static_cast<Field>(fi));
      }
    }
    if (exact && exact->doc == d) {
      if (std::find(matched.begin(), matched.end(), exact->field) == matched.end()) {
        matched.insert(matched.begin(), exact->field);
      }
      candidates.push_back({d, kExactMatchScore, std::move(matched)});
    } else if (total > 0.0) {
      candidates.push_back({d, total, std::move(matched)});
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc < b.doc;
  });
  const auto limit = std::min(candidates.size(), static_cast<std::size_t>(query.k));
  for (std::size_t i = 0; i < limit; ++i) {
    auto& c = candidates[i];
    std::sort(c.fields.begin(), c.fields.end());
    out.push_back({index.tag_names()[c.doc], c.score, std::move(c.fields)});
  }
  return out;
}

std::string build_retrieval_context(const ExpressionDatabase& db) {
  std::string out;
  for (const auto& t : db.tags()) {
    out += "Tag: " + t.name + "\n";
    out += "Definition: " + t.definition + "\n";
    out += "Alternative Tags: ";
    for (std::size_t i = 0; i < t.aliases.size(); ++i) {
      if (i > 0) out += ", ";
      out += t.aliases[i].text;
    }
    out += "\n\n";
  }
  return out;
}

std::string build_retrieval_prompt(const ExpressionDatabase& db, const RetrievalQuery& query) {
  std::string out;
  out += "You are given a database of expression tags.\n\n";
  out += build_retrieval_context(db);
  out += "Select up to " + std::to_string(query.k) +
         " expression tags from the database that best match the text below. "
         "Output only tag names exactly as written in the database, separated by commas or newlines, "
         "most relevant first. Do not output anything else.\n\n";
  out += "Text: " + query.text + "\n";
  return out;
}

std::vector<std::string> parse_tag_response(const ExpressionDatabase& db, std::string_view response) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (start <= response.size()) {
    auto end = response.find_first_of(",\n", start);
    if (end == std::string_view::npos) end = response.size();
    auto piece = trim(response.substr(start, end - start));
    if (piece.size() >= 2 && (piece.front() == '"' || piece.front() == '\'' || piece.front() == '`') &&
        piece.back() == piece.front()) {
      piece = trim(piece.substr(1, piece.size() - 2));
    }
    if (!piece.empty()) {
      if (const auto* tag = db.resolve_alias(piece)) {
        if (std::find(names.begin(), names.end(), tag->name) == names.end()) names.push_back(tag->name);
      }
    }
    start = end + 1;
  }
  return names;
}

LlmRetrievalResult retrieve_via_llm(const ExpressionDatabase& db, const RetrievalIndex& index,
                                    const RetrievalQuery& query, TextCompletionClient& llm) {
  LlmRetrievalResult result;
  result.raw_response = llm.complete(build_retrieval_prompt(db, query));
  auto names = parse_tag_response(db, result.raw_response);
  if (names.empty()) {
    result.degraded = true;
    result.tags = retrieve(index, query);
    return result;
  }
  if (names.size() > static_cast<std::size_t>(std::max(query.k, 1))) names.resize(static_cast<std::size_t>(query.k));
  for (auto& n : names) result.tags.push_back({std::move(n), 1.0, {}});
  return result;
}

}  // namespace exprforge
