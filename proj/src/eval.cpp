#include "tagrec/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "tagrec/errors.hpp"

namespace tagrec {

PredictionSet::PredictionSet(std::vector<PredictionItem> items) : items_(std::move(items)) {
  std::unordered_set<std::string> seen;
  for (const auto& it : items_) {
    if (!seen.insert(it.record_id).second) {
      throw std::invalid_argument("PredictionSet: duplicate record_id '" + it.record_id + "'");
    }
    if (it.gold_tag_id.empty()) throw std::invalid_argument("PredictionSet: empty gold for '" + it.record_id + "'");
  }
}

double hits_at_1(const PredictionSet& preds) {
  if (preds.empty()) throw std::invalid_argument("hits_at_1: empty prediction set");
  std::size_t correct = 0;
  for (const auto& it : preds.items()) correct += it.predicted_tag_id == it.gold_tag_id ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

MacroMetrics macro_metrics(const PredictionSet& preds) {
  if (preds.empty()) throw std::invalid_argument("macro_metrics: empty prediction set");

  std::map<std::string, ClassMetrics> classes;
  for (const auto& it : preds.items()) classes[it.gold_tag_id].tag_id = it.gold_tag_id;
  for (const auto& it : preds.items()) {
    if (it.predicted_tag_id == it.gold_tag_id) {
      ++classes[it.gold_tag_id].tp;
    } else {
      ++classes[it.gold_tag_id].fn;
      // Predicted-only classes are outside the universe and get no row.
      if (auto c = classes.find(it.predicted_tag_id); c != classes.end()) ++c->second.fp;
    }
  }

  MacroMetrics out;
  for (auto& [id, c] : classes) {
    const std::size_t pd = c.tp + c.fp;
    const std::size_t rd = c.tp + c.fn;
    c.precision = pd == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(pd);
    c.recall = rd == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(rd);
    // Harmonic mean of p and r, written over counts so it is a single rounding.
    const std::size_t fd = 2 * c.tp + c.fp + c.fn;
    c.f1 = c.tp == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(fd);
    out.precision += c.precision;
    out.recall += c.recall;
    out.f1 += c.f1;
    out.per_class.push_back(c);
  }
  const auto n = static_cast<double>(out.per_class.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

EvalReport evaluate(const PredictionSet& preds) {
  EvalReport r;
  r.hits_at_1 = hits_at_1(preds);
  auto macro = macro_metrics(preds);
  r.macro_p = macro.precision;
  r.macro_r = macro.recall;
  r.macro_f1 = macro.f1;
  r.avg = (r.hits_at_1 + r.macro_p + r.macro_r + r.macro_f1) / 4.0;
  r.per_class = std::move(macro.per_class);
  r.n_records = preds.size();
  r.n_classes = r.per_class.size();
  return r;
}

EvalReport evaluate_predictions(std::span<const Prediction> predictions, std::span<const NumeralRecord> dataset) {
  std::unordered_map<std::string, const NumeralRecord*> by_id;
  for (const auto& rec : dataset) by_id.emplace(rec.record_id, &rec);

  std::vector<PredictionItem> items;
  std::size_t skipped = 0;
  std::size_t in_top_k = 0;
  std::unordered_set<std::string> predicted_ids;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.record_id);
    if (it == by_id.end()) throw Error("prediction for unknown record_id '" + p.record_id + "'");
    predicted_ids.insert(p.record_id);
    const auto& gold = it->second->gold_tag_id;
    if (!gold) {
      ++skipped;
      continue;
    }
    in_top_k += p.gold_in_top_k ? 1 : 0;
    items.push_back({p.record_id, *gold, p.predicted_tag_id});
  }
  if (items.empty()) throw Error("no predictions with gold tags to evaluate");

  EvalReport r = evaluate(PredictionSet(std::move(items)));
  r.skipped_without_gold = skipped;
  r.gold_in_top_k_rate = static_cast<double>(in_top_k) / static_cast<double>(r.n_records);
  for (const auto& rec : dataset) {
    if (rec.gold_tag_id && !predicted_ids.contains(rec.record_id)) ++r.missing_predictions;
  }
  return r;
}

std::string report_json(const EvalReport& r, bool include_per_class) {
  nlohmann::ordered_json obj;
  obj["hits_at_1"] = r.hits_at_1;
  obj["macro_p"] = r.macro_p;
  obj["macro_r"] = r.macro_r;
  obj["macro_f1"] = r.macro_f1;
  obj["avg"] = r.avg;
  obj["n_records"] = r.n_records;
  obj["n_classes"] = r.n_classes;
  obj["gold_in_top_k_rate"] = r.gold_in_top_k_rate ? nlohmann::ordered_json(*r.gold_in_top_k_rate) : nullptr;
  obj["skipped_without_gold"] = r.skipped_without_gold;
  obj["missing_predictions"] = r.missing_predictions;
  if (include_per_class) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& c : r.per_class) {
      rows.push_back({{"tag_id", c.tag_id},
                      {"tp", c.tp},
                      {"fp", c.fp},
                      {"fn", c.fn},
                      {"p", c.precision},
                      {"r", c.recall},
                      {"f1", c.f1}});
    }
    obj["per_class"] = std::move(rows);
  }
  return obj.dump(2);
}

std::string format_metrics_table(std::string_view header, std::span<const TableRow> rows, bool with_avg) {
  std::size_t width = header.size();
  for (const auto& row : rows) width = std::max(width, row.label.size());
  width += 2;

  auto pad = [&](std::string_view s) {
    std::string out(s);
    out.resize(width, ' ');
    return out;
  };
  std::string out = pad(header) + "Hits@1    M-P       M-R       M-F1";
  if (with_avg) out += "      AVG";
  out += '\n';
  for (const auto& row : rows) {
    out += pad(row.label);
    if (!row.report) {
      out += "failed\n";
      continue;
    }
    const auto& r = *row.report;
    char buf[96];
    if (with_avg) {
      std::snprintf(buf, sizeof buf, "%.4f    %.4f    %.4f    %.4f    %.4f", r.hits_at_1, r.macro_p, r.macro_r,
                    r.macro_f1, r.avg);
    } else {
      std::snprintf(buf, sizeof buf, "%.4f    %.4f    %.4f    %.4f", r.hits_at_1, r.macro_p, r.macro_r, r.macro_f1);
    }
    out += buf;
    out += '\n';
  }
  return out;
}

}  // namespace tagrec
