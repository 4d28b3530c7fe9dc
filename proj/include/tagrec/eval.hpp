#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tagrec/corpus.hpp"
#include "tagrec/pipeline.hpp"

namespace tagrec {

struct PredictionItem {
  std::string record_id;
  std::string gold_tag_id;
  std::string predicted_tag_id;
};

/// Single-label predictions with gold; record ids are unique.
class PredictionSet {
 public:
  PredictionSet() = default;
  explicit PredictionSet(std::vector<PredictionItem> items);

  std::span<const PredictionItem> items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }

 private:
  std::vector<PredictionItem> items_;
};

struct ClassMetrics {
  std::string tag_id;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MacroMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<ClassMetrics> per_class;  // class universe = gold classes, sorted by tag id
};

double hits_at_1(const PredictionSet& preds);
MacroMetrics macro_metrics(const PredictionSet& preds);

struct EvalReport {
  double hits_at_1 = 0.0;
  double macro_p = 0.0;
  double macro_r = 0.0;
  double macro_f1 = 0.0;
  double avg = 0.0;
  std::vector<ClassMetrics> per_class;
  std::size_t n_records = 0;
  std::size_t n_classes = 0;
  // Diagnostics filled by evaluate_predictions.
  std::optional<double> gold_in_top_k_rate;
  std::size_t skipped_without_gold = 0;
  std::size_t missing_predictions = 0;
};

EvalReport evaluate(const PredictionSet& preds);

// Joins pipeline predictions with dataset gold. Records without gold are
// skipped and counted; a prediction whose record id is not in the dataset is
// an error.
EvalReport evaluate_predictions(std::span<const Prediction> predictions, std::span<const NumeralRecord> dataset);

std::string report_json(const EvalReport& report, bool include_per_class = true);

/// Row of a metrics table: label followed by Hits@1, M-P, M-R, M-F1, AVG.
struct TableRow {
  std::string label;
  std::optional<EvalReport> report;  // absent renders as a failed row
};

std::string format_metrics_table(std::string_view header, std::span<const TableRow> rows, bool with_avg = true);

}  // namespace tagrec
