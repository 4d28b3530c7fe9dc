#include "tagrec/prompting.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tagrec/errors.hpp"
#include "tagrec/rng.hpp"

namespace tagrec {
namespace {

// Kept byte-identical to templates/rerank_prompt_v1.txt (checked by a test).
constexpr std::string_view kBuiltinRerankPrompt =
    "You are an expert in XBRL financial reporting taxonomies.\n"
    "Below is a reference tag document describing a financial numeral, followed by {{n}} candidate "
    "tag documents. Each candidate is marked with a numeric identifier in square brackets.\n"
    "\n"
    "Reference document:\n"
    "{{gen_doc}}\n"
    "\n"
    "Candidate documents:\n"
    "{{passages}}\n"
    "\n"
    "Rank the {{n}} candidate documents by how well each one matches the reference document, most "
    "relevant first.\n"
    "Answer only with the ranking in the form [a] > [b] > ..., using every identifier from 1 to {{n}} "
    "exactly once. Do not explain your answer and do not add any other text.\n";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

AssembledInput assemble_generation_input(std::string_view instruction, const NumeralRecord& record) {
  if (instruction.empty()) throw std::invalid_argument("assemble_generation_input: empty instruction");
  std::string text;
  text.reserve(instruction.size() + record.report_text.size() + record.question.size() + 2);
  text.append(instruction).append("\n").append(record.report_text).append("\n").append(record.question);
  return AssembledInput{record.record_id, std::move(text)};
}

PromptTemplate::PromptTemplate(std::string body, std::string version)
    : body_(std::move(body)), version_(std::move(version)) {
  for (std::string_view required : {"{{gen_doc}}", "{{passages}}"}) {
    if (body_.find(required) == std::string::npos) {
      throw ConfigError("prompt template '" + version_ + "' lacks placeholder " + std::string(required));
    }
  }
}

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate tpl(std::string(kBuiltinRerankPrompt), "builtin-v1");
  return tpl;
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open prompt template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string body = ss.str();
  std::string version = "file:" + path.filename().string() + "#" + hex64(fnv1a64(body));
  return PromptTemplate(std::move(body), std::move(version));
}

std::string PromptTemplate::render(std::string_view gen_doc, std::string_view passages, std::size_t n) const {
  std::string out;
  out.reserve(body_.size() + gen_doc.size() + passages.size());
  const std::string n_text = std::to_string(n);
  std::size_t pos = 0;
  while (pos < body_.size()) {
    const std::size_t open = body_.find("{{", pos);
    if (open == std::string::npos) {
      out.append(body_, pos, std::string::npos);
      break;
    }
    const std::size_t close = body_.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(body_, pos, std::string::npos);
      break;
    }
    out.append(body_, pos, open - pos);
    const std::string_view name(body_.data() + open + 2, close - open - 2);
    if (name == "gen_doc") {
      out.append(gen_doc);
    } else if (name == "passages") {
      out.append(passages);
    } else if (name == "n") {
      out.append(n_text);
    } else {
      out.append(body_, open, close + 2 - open);
    }
    pos = close + 2;
  }
  return out;
}

std::string format_passages(std::span<const std::string_view> texts) {
  std::string out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out.append("[").append(std::to_string(i + 1)).append("] ");
    for (char c : texts[i]) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
  }
  return out;
}

std::string build_rerank_prompt(std::string_view gen_doc, std::span<const std::string_view> group_texts,
                                const PromptTemplate& tpl) {
  if (group_texts.empty()) throw std::invalid_argument("build_rerank_prompt: empty group");
  if (gen_doc.empty()) throw std::invalid_argument("build_rerank_prompt: empty generated document");
  return tpl.render(gen_doc, format_passages(group_texts), group_texts.size());
}

std::string build_rerank_prompt(std::string_view gen_doc, std::span<const TagDocument> group,
                                const PromptTemplate& tpl) {
  std::vector<std::string_view> texts;
  texts.reserve(group.size());
  for (const auto& doc : group) texts.emplace_back(doc.text);
  return build_rerank_prompt(gen_doc, texts, tpl);
}

RankingReply parse_ranking_reply(std::string_view raw, std::size_t group_len) {
  if (group_len == 0) throw std::invalid_argument("parse_ranking_reply: group_len must be positive");

  std::vector<bool> seen(group_len + 1, false);
  std::vector<std::size_t> order;
  order.reserve(group_len);

  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '[') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < raw.size() && (raw[j] == ' ' || raw[j] == '\t')) ++j;
    const std::size_t digits_begin = j;
    std::size_t value = 0;
    bool overflow = false;
    while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) {
      if (value > group_len) {
        overflow = true;  // already out of range; keep consuming digits
      } else {
        value = value * 10 + static_cast<std::size_t>(raw[j] - '0');
      }
      ++j;
    }
    const bool has_digits = j > digits_begin;
    while (j < raw.size() && (raw[j] == ' ' || raw[j] == '\t')) ++j;
    if (has_digits && j < raw.size() && raw[j] == ']') {
      if (!overflow && value >= 1 && value <= group_len && !seen[value]) {
        seen[value] = true;
        order.push_back(value);
      }
      i = j + 1;
    } else {
      i = i + 1;
    }
  }

  if (order.empty()) {
    std::string excerpt(raw.substr(0, 80));
    throw UnparseableReply("no ranking identifier in 1.." + std::to_string(group_len) + " found in reply: \"" +
                           excerpt + (raw.size() > 80 ? "...\"" : "\""));
  }
  for (std::size_t id = 1; id <= group_len; ++id) {
    if (!seen[id]) order.push_back(id);
  }
  return RankingReply{std::move(order), std::string(raw)};
}

std::string format_ranking(std::span<const std::size_t> order) {
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0) out.append(" > ");
    out.append("[").append(std::to_string(order[i])).append("]");
  }
  return out;
}

}  // namespace tagrec
