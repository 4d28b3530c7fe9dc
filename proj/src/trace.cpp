#include "tagrec/trace.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "json.hpp"
#include "tagrec/errors.hpp"

namespace tagrec {
namespace {

using json = nlohmann::ordered_json;

json group_json(const GroupOutcome& g) {
  json obj;
  obj["presented"] = g.presented;
  obj["reply"] = g.reply ? json(*g.reply) : json(nullptr);
  obj["order"] = g.order;
  obj["winner"] = g.winner;
  obj["fallback"] = g.fallback;
  return obj;
}

json counts_json(const std::map<std::string, std::size_t>& counts) {
  json obj = json::object();
  for (const auto& [id, n] : counts) obj[id] = n;
  return obj;
}

}  // namespace

std::string trace_json_line(const RerankTrace& t) {
  json obj;
  obj["record_id"] = t.record_id;
  json config;
  config["top_k"] = t.config.top_k;
  config["group_size"] = t.config.group_size;
  config["iterations"] = t.config.iterations;
  config["ordering"] = to_string(t.config.ordering);
  config["vote_mode"] = to_string(t.config.vote_mode);
  config["seed"] = t.config.seed;
  obj["config"] = std::move(config);

  json candidates = json::array();
  for (const auto& c : t.candidates) {
    candidates.push_back({{"tag_id", c.tag_id}, {"score", c.score}, {"retrieval_rank", c.retrieval_rank}});
  }
  obj["candidates"] = std::move(candidates);

  json rounds = json::array();
  for (const auto& r : t.rounds) {
    json round;
    round["round"] = r.round;
    json groups = json::array();
    for (const auto& g : r.groups) groups.push_back(group_json(g));
    round["groups"] = std::move(groups);
    if (r.final_call) round["final_call"] = group_json(*r.final_call);
    round["voted"] = r.voted;
    rounds.push_back(std::move(round));
  }
  obj["rounds"] = std::move(rounds);
  obj["votes"] = counts_json(t.tally.counts);
  obj["total_rounds"] = t.tally.total_rounds;
  obj["predicted_tag_id"] = t.predicted_tag_id;

  json events = json::array();
  for (const auto& e : t.fallback_events) {
    events.push_back({{"round", e.round}, {"group", e.group}, {"reason", e.reason}});
  }
  obj["fallback_events"] = std::move(events);
  return obj.dump();
}

std::string prediction_json_line(const Prediction& p) {
  json obj;
  obj["record_id"] = p.record_id;
  obj["predicted_tag_id"] = p.predicted_tag_id;
  obj["gold_tag_id"] = p.gold_tag_id ? json(*p.gold_tag_id) : json(nullptr);
  obj["votes"] = counts_json(p.votes);
  obj["gold_in_top_k"] = p.gold_in_top_k;
  return obj.dump();
}

void write_traces(std::ostream& out, std::span<const RerankTrace> traces) {
  for (const auto& t : traces) out << trace_json_line(t) << '\n';
}

void write_predictions(std::ostream& out, std::span<const Prediction> predictions) {
  for (const auto& p : predictions) out << prediction_json_line(p) << '\n';
}

std::vector<Prediction> read_predictions(std::istream& in, std::string_view source) {
  std::vector<Prediction> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    try {
      const json obj = json::parse(line);
      Prediction p;
      p.record_id = obj.at("record_id").get<std::string>();
      p.predicted_tag_id = obj.at("predicted_tag_id").get<std::string>();
      if (auto it = obj.find("gold_tag_id"); it != obj.end() && !it->is_null()) p.gold_tag_id = it->get<std::string>();
      if (auto it = obj.find("votes"); it != obj.end()) {
        for (const auto& [id, n] : it->items()) p.votes[id] = n.get<std::size_t>();
      }
      if (auto it = obj.find("gold_in_top_k"); it != obj.end() && !it->is_null()) p.gold_in_top_k = it->get<bool>();
      if (!seen.insert(p.record_id).second) throw Error(where + ": duplicate record_id '" + p.record_id + "'");
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw Error(where + ": malformed prediction line: " + e.what());
    }
  }
  return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open predictions " + path.string());
  return read_predictions(in, path.string());
}

}  // namespace tagrec
