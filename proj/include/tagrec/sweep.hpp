#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tagrec/eval.hpp"
#include "tagrec/pipeline.hpp"
#include "tagrec/rerank.hpp"

namespace tagrec {

enum class SweepAxis { Iterations, GroupSize, Ordering };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepCell {
  std::string value;  // as given on the command line
  std::string label;  // row label in the text table
  RerankConfig config;
  std::optional<EvalReport> report;
  std::string error;  // set when the cell failed
  std::size_t failures = 0;
  std::size_t fallback_events = 0;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::Iterations;
  std::vector<SweepCell> cells;

  std::string to_json() const;
  std::string to_text() const;
};

// Applies `value` to the swept field of `base`; throws ConfigError.
RerankConfig apply_sweep_value(const RerankConfig& base, SweepAxis axis, std::string_view value);
std::string sweep_label(SweepAxis axis, const RerankConfig& config);

// One evaluation per value. Generation and retrieval run once and are shared
// across cells; remote ranker calls are shared through the response cache.
// A failing cell is recorded and the sweep continues.
SweepTable sweep(const PipelineContext& ctx, const RerankConfig& base, SweepAxis axis,
                 std::span<const std::string> values);

}  // namespace tagrec
