#include "tagrec/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "json.hpp"
#include "tagrec/errors.hpp"

namespace tagrec {
namespace {

using json = nlohmann::ordered_json;

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

const std::string& require_string(const json& obj, const char* key, std::string_view source,
                                  std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw CorpusError(where(source, line) + ": field '" + key + "' missing or not a string");
  }
  return it->get_ref<const std::string&>();
}

std::optional<std::string> optional_string(const json& obj, const char* key,
                                           std::string_view source, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw CorpusError(where(source, line) + ": field '" + key + "' must be a string or null");
  }
  return it->get<std::string>();
}

json parse_line(const std::string& line, std::string_view source, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CorpusError(where(source, line_no) + ": malformed JSON: " + e.what());
  }
  if (!obj.is_object()) throw CorpusError(where(source, line_no) + ": expected a JSON object");
  return obj;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  return in;
}

}  // namespace

TaxonomyCorpus::TaxonomyCorpus(std::vector<TagDocument> docs) : docs_(std::move(docs)) {
  index_by_id_.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto& doc = docs_[i];
    if (doc.tag_id.empty()) throw CorpusError("tag document " + std::to_string(i) + " has an empty tag_id");
    if (is_blank(doc.text)) throw CorpusError("tag '" + doc.tag_id + "' has a blank text");
    auto [it, inserted] = index_by_id_.emplace(doc.tag_id, i);
    if (!inserted) {
      throw CorpusError("duplicate tag_id '" + doc.tag_id + "' at positions " +
                        std::to_string(it->second) + " and " + std::to_string(i));
    }
  }
}

std::optional<std::size_t> TaxonomyCorpus::position(std::string_view tag_id) const {
  auto it = index_by_id_.find(std::string(tag_id));
  if (it == index_by_id_.end()) return std::nullopt;
  return it->second;
}

const TagDocument* TaxonomyCorpus::find(std::string_view tag_id) const {
  auto pos = position(tag_id);
  return pos ? &docs_[*pos] : nullptr;
}

TaxonomyCorpus read_taxonomy(std::istream& in, std::string_view source) {
  std::vector<TagDocument> docs;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const json obj = parse_line(line, source, line_no);
    TagDocument doc{require_string(obj, "tag_id", source, line_no),
                    require_string(obj, "text", source, line_no)};
    if (doc.tag_id.empty()) throw CorpusError(where(source, line_no) + ": empty tag_id");
    if (is_blank(doc.text)) {
      throw CorpusError(where(source, line_no) + ": blank text for tag '" + doc.tag_id + "'");
    }
    auto [it, inserted] = first_line.emplace(doc.tag_id, line_no);
    if (!inserted) {
      throw CorpusError(std::string(source) + ": duplicate tag_id '" + doc.tag_id + "' on lines " +
                        std::to_string(it->second) + " and " + std::to_string(line_no));
    }
    docs.push_back(std::move(doc));
  }
  if (in.bad()) throw CorpusError(std::string(source) + ": read error");
  if (docs.empty()) throw CorpusError(std::string(source) + ": empty taxonomy");
  return TaxonomyCorpus(std::move(docs));
}

TaxonomyCorpus load_taxonomy(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_taxonomy(in, path.string());
}

void write_taxonomy(std::ostream& out, const TaxonomyCorpus& corpus) {
  for (const auto& doc : corpus.docs()) {
    json obj;
    obj["tag_id"] = doc.tag_id;
    obj["text"] = doc.text;
    out << obj.dump() << '\n';
  }
}

std::vector<NumeralRecord> read_dataset(std::istream& in, const TaxonomyCorpus* corpus,
                                        std::string_view source) {
  std::vector<NumeralRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const json obj = parse_line(line, source, line_no);
    NumeralRecord rec;
    rec.record_id = require_string(obj, "record_id", source, line_no);
    rec.report_text = require_string(obj, "report_text", source, line_no);
    rec.numeral = require_string(obj, "numeral", source, line_no);
    rec.question = require_string(obj, "question", source, line_no);
    rec.gold_tag_id = optional_string(obj, "gold_tag_id", source, line_no);
    rec.gen_tag_doc = optional_string(obj, "gen_tag_doc", source, line_no);

    if (rec.record_id.empty()) throw CorpusError(where(source, line_no) + ": empty record_id");
    if (!seen.insert(rec.record_id).second) {
      throw CorpusError(where(source, line_no) + ": duplicate record_id '" + rec.record_id + "'");
    }
    if (rec.numeral.empty()) {
      throw CorpusError(where(source, line_no) + ": record '" + rec.record_id + "' has an empty numeral");
    }
    if (rec.report_text.find(rec.numeral) == std::string::npos) {
      throw CorpusError(where(source, line_no) + ": record '" + rec.record_id + "': numeral '" +
                        rec.numeral + "' does not occur in report_text");
    }
    if (corpus != nullptr && rec.gold_tag_id && !corpus->contains(*rec.gold_tag_id)) {
      throw CorpusError(where(source, line_no) + ": record '" + rec.record_id +
                        "': unknown gold_tag_id '" + *rec.gold_tag_id + "'");
    }
    records.push_back(std::move(rec));
  }
  if (in.bad()) throw CorpusError(std::string(source) + ": read error");
  return records;
}

std::vector<NumeralRecord> load_dataset(const std::filesystem::path& path, const TaxonomyCorpus* corpus) {
  auto in = open_input(path);
  return read_dataset(in, corpus, path.string());
}

void write_dataset(std::ostream& out, std::span<const NumeralRecord> records) {
  for (const auto& rec : records) {
    json obj;
    obj["record_id"] = rec.record_id;
    obj["report_text"] = rec.report_text;
    obj["numeral"] = rec.numeral;
    obj["question"] = rec.question;
    obj["gold_tag_id"] = rec.gold_tag_id ? json(*rec.gold_tag_id) : json(nullptr);
    obj["gen_tag_doc"] = rec.gen_tag_doc ? json(*rec.gen_tag_doc) : json(nullptr);
    out << obj.dump() << '\n';
  }
}

}  // namespace tagrec
