#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tagrec/pipeline.hpp"
#include "tagrec/rerank.hpp"

namespace tagrec {

// Single-line JSON renderings (no trailing newline).
std::string trace_json_line(const RerankTrace& trace);
std::string prediction_json_line(const Prediction& prediction);

void write_traces(std::ostream& out, std::span<const RerankTrace> traces);
void write_predictions(std::ostream& out, std::span<const Prediction> predictions);

std::vector<Prediction> read_predictions(std::istream& in, std::string_view source = "<stream>");
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace tagrec
