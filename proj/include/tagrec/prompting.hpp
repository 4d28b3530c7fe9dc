#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tagrec/corpus.hpp"

namespace tagrec {

/// Generator input: instruction, report text and question joined by newlines.
struct AssembledInput {
  std::string record_id;
  std::string text;
};

AssembledInput assemble_generation_input(std::string_view instruction, const NumeralRecord& record);

/// Listwise re-ranking prompt with `{{gen_doc}}`, `{{passages}}` and `{{n}}`
/// placeholders. Substitution is single-pass, so placeholder-looking text
/// inside substituted values is left alone.
class PromptTemplate {
 public:
  PromptTemplate(std::string body, std::string version);

  static const PromptTemplate& builtin();
  static PromptTemplate from_file(const std::filesystem::path& path);

  const std::string& body() const noexcept { return body_; }
  // Label recorded in manifests: "builtin-v1" or "file:<path>#<fnv64 hex>".
  const std::string& version() const noexcept { return version_; }

  std::string render(std::string_view gen_doc, std::string_view passages, std::size_t n) const;

 private:
  std::string body_;
  std::string version_;
};

// Numbered passage block, one "[i] <text>" line per member in the given order.
// Line breaks inside a text are folded to spaces.
std::string format_passages(std::span<const std::string_view> texts);

std::string build_rerank_prompt(std::string_view gen_doc, std::span<const std::string_view> group_texts,
                                const PromptTemplate& tpl = PromptTemplate::builtin());
std::string build_rerank_prompt(std::string_view gen_doc, std::span<const TagDocument> group,
                                const PromptTemplate& tpl = PromptTemplate::builtin());

struct RankingReply {
  std::vector<std::size_t> order;  // 1-based presented positions, most relevant first
  std::string raw;
};

// Extracts bracketed integers in order of appearance and repairs the result
// into a permutation of 1..group_len: out-of-range ids are dropped, only the
// first occurrence of a duplicate is kept, missing ids are appended in
// ascending order. Throws UnparseableReply when no valid id is present.
RankingReply parse_ranking_reply(std::string_view raw, std::size_t group_len);

// Inverse of parse for a well-formed order: "[a] > [b] > ...".
std::string format_ranking(std::span<const std::size_t> order);

}  // namespace tagrec
