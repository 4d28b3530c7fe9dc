#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tagrec {

/// One taxonomy tag paired with its descriptive document.
struct TagDocument {
  std::string tag_id;
  std::string text;

  bool operator==(const TagDocument&) const = default;
};

/// Ordered, id-addressable set of tag documents.
///
/// Construction validates the invariants (non-empty ids, non-blank texts,
/// unique ids); the object is immutable afterwards and safe to share across
/// threads.
class TaxonomyCorpus {
 public:
  TaxonomyCorpus() = default;
  explicit TaxonomyCorpus(std::vector<TagDocument> docs);

  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  std::span<const TagDocument> docs() const noexcept { return docs_; }
  const TagDocument& at(std::size_t position) const { return docs_.at(position); }

  std::optional<std::size_t> position(std::string_view tag_id) const;
  const TagDocument* find(std::string_view tag_id) const;
  bool contains(std::string_view tag_id) const { return position(tag_id).has_value(); }

 private:
  std::vector<TagDocument> docs_;
  std::unordered_map<std::string, std::size_t> index_by_id_;
};

/// One annotated numeral: the report text, the numeral's surface form, the
/// question targeting it, and optionally its gold tag and a stored generation.
struct NumeralRecord {
  std::string record_id;
  std::string report_text;
  std::string numeral;
  std::string question;
  std::optional<std::string> gold_tag_id;
  std::optional<std::string> gen_tag_doc;

  bool operator==(const NumeralRecord&) const = default;
};

TaxonomyCorpus load_taxonomy(const std::filesystem::path& path);
TaxonomyCorpus read_taxonomy(std::istream& in, std::string_view source = "<stream>");
void write_taxonomy(std::ostream& out, const TaxonomyCorpus& corpus);

// When `corpus` is given every present gold_tag_id must resolve in it.
std::vector<NumeralRecord> load_dataset(const std::filesystem::path& path,
                                        const TaxonomyCorpus* corpus = nullptr);
std::vector<NumeralRecord> read_dataset(std::istream& in, const TaxonomyCorpus* corpus = nullptr,
                                        std::string_view source = "<stream>");
void write_dataset(std::ostream& out, std::span<const NumeralRecord> records);

}  // namespace tagrec
