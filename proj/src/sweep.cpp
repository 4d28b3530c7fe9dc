#include "tagrec/sweep.hpp"

#include <charconv>

#include "json.hpp"
#include "tagrec/errors.hpp"

namespace tagrec {
namespace {

std::size_t parse_count(std::string_view text) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("expected a positive integer, got '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Iterations: return "iterations";
    case SweepAxis::GroupSize: return "group-size";
    case SweepAxis::Ordering: return "ordering";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "iterations" || text == "Iterations") return SweepAxis::Iterations;
  if (text == "group-size" || text == "GroupSize") return SweepAxis::GroupSize;
  if (text == "ordering" || text == "Ordering") return SweepAxis::Ordering;
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (expected iterations|group-size|ordering)");
}

RerankConfig apply_sweep_value(const RerankConfig& base, SweepAxis axis, std::string_view value) {
  RerankConfig cfg = base;
  switch (axis) {
    case SweepAxis::Iterations: cfg.iterations = parse_count(value); break;
    case SweepAxis::GroupSize: cfg.group_size = parse_count(value); break;
    case SweepAxis::Ordering: cfg.ordering = parse_ordering(value); break;
  }
  cfg.validate();
  return cfg;
}

std::string sweep_label(SweepAxis axis, const RerankConfig& config) {
  switch (axis) {
    case SweepAxis::Iterations: return "1-" + std::to_string(config.iterations) + " iters";
    case SweepAxis::GroupSize: return std::to_string(config.group_size);
    case SweepAxis::Ordering:
      return config.ordering == Ordering::OrderPreserving ? "Order-Preserving" : "Order-Shuffled";
  }
  return {};
}

SweepTable sweep(const PipelineContext& ctx, const RerankConfig& base, SweepAxis axis,
                 std::span<const std::string> values) {
  if (values.empty()) throw std::invalid_argument("sweep: no values");
  base.validate();

  SweepTable table;
  table.axis = axis;
  const Preparation prep = prepare_records(ctx, base.top_k);

  for (const auto& value : values) {
    SweepCell cell;
    cell.value = value;
    cell.label = value;
    try {
      cell.config = apply_sweep_value(base, axis, value);
      cell.label = sweep_label(axis, cell.config);
      const RunOutput out = rerank_prepared(ctx, prep, cell.config);
      cell.failures = out.failures.size();
      cell.fallback_events = out.fallback_events;
      cell.report = evaluate_predictions(out.predictions, ctx.records);
    } catch (const AuthError&) {
      throw;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    table.cells.push_back(std::move(cell));
  }
  return table;
}

std::string SweepTable::to_json() const {
  nlohmann::ordered_json obj;
  obj["axis"] = to_string(axis);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json row;
    row["value"] = c.value;
    row["label"] = c.label;
    if (c.report) {
      row["status"] = "ok";
      row["report"] = nlohmann::ordered_json::parse(report_json(*c.report, false));
    } else {
      row["status"] = "failed";
      row["error"] = c.error;
    }
    row["record_failures"] = c.failures;
    row["fallback_events"] = c.fallback_events;
    rows.push_back(std::move(row));
  }
  obj["rows"] = std::move(rows);
  return obj.dump(2);
}

std::string SweepTable::to_text() const {
  std::vector<TableRow> rows;
  for (const auto& c : cells) rows.push_back({c.label, c.report});
  const char* header = axis == SweepAxis::Iterations  ? "Iteration Range"
                       : axis == SweepAxis::GroupSize ? "Group Size"
                                                      : "Grouping Strategy";
  return format_metrics_table(header, rows);
}

}  // namespace tagrec
