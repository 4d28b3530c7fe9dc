#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"
#include "tagrec/backends.hpp"
#include "tagrec/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace testsupport {

TempDir::TempDir(const std::string& label) {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const auto candidate = fs::temp_directory_path() / (label + "-" + std::to_string(rd()) + std::to_string(rd()));
    if (fs::create_directories(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create a temp directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

std::string ranking_for(const std::string& prompt) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 3 || line[0] != '[') continue;
    const auto close = line.find(']');
    if (close == std::string::npos || close < 2) continue;
    const std::string digits = line.substr(1, close - 1);
    if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
    keyed.emplace_back(tagrec::fnv1a64(line.substr(close + 1)), std::stoul(digits));
  }
  std::sort(keyed.begin(), keyed.end());
  std::string out;
  for (const auto& [key, id] : keyed) {
    if (!out.empty()) out += " > ";
    out += "[" + std::to_string(id) + "]";
  }
  return out;
}

std::string chat_response(const std::string& content) {
  json body;
  body["id"] = "fake";
  body["choices"] = json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}});
  return body.dump();
}

}  // namespace

FakeOpenAI::FakeOpenAI() : server_(std::make_unique<httplib::Server>()) {
  auto gate = [this](const httplib::Request& req, httplib::Response& res) {
    requests_.fetch_add(1);
    std::lock_guard lock(mu_);
    last_auth_ = req.get_header_value("Authorization");
    last_body_ = req.body;
    if (!failures_.empty()) {
      res.status = failures_.front();
      failures_.pop_front();
      res.set_content(R"({"error":"injected"})", "application/json");
      return false;
    }
    return true;
  };
  server_->Post("/v1/chat/completions", [gate](const httplib::Request& req, httplib::Response& res) {
    if (!gate(req, res)) return;
    const auto body = json::parse(req.body);
    const std::string prompt = body.at("messages").back().at("content").get<std::string>();
    std::string content;
    if (prompt.find("Candidate documents:") != std::string::npos) {
      content = ranking_for(prompt);
    } else {
      const auto nl = prompt.find_last_of('\n');
      content = "generated: " + (nl == std::string::npos ? prompt : prompt.substr(nl + 1));
    }
    res.set_content(chat_response(content), "application/json");
  });
  server_->Post("/v1/embeddings", [gate](const httplib::Request& req, httplib::Response& res) {
    if (!gate(req, res)) return;
    const auto body = json::parse(req.body);
    std::vector<std::string> texts;
    for (const auto& t : body.at("input")) texts.push_back(t.get<std::string>());
    tagrec::HashEmbedder embedder(16);
    const auto vectors = embedder.embed_batch(texts);
    json data = json::array();
    // Reverse order on the wire; clients must honour "index".
    for (std::size_t i = vectors.size(); i-- > 0;) {
      json values = json::array();
      for (float v : vectors[i].values()) values.push_back(v);
      data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", std::move(values)}});
    }
    res.set_content(json{{"object", "list"}, {"data", std::move(data)}}.dump(), "application/json");
  });
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("fake server: cannot bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

FakeOpenAI::~FakeOpenAI() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void FakeOpenAI::fail_next(int status, std::size_t times) {
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < times; ++i) failures_.push_back(status);
}

std::string FakeOpenAI::last_authorization() const {
  std::lock_guard lock(mu_);
  return last_auth_;
}

std::string FakeOpenAI::last_body() const {
  std::lock_guard lock(mu_);
  return last_body_;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

tagrec::TaxonomyCorpus fixture_taxonomy() {
  const std::vector<std::string> texts{
      "revenue from contracts with customers recognized during the period",
      "cash and cash equivalents held at the end of reporting",
      "goodwill impairment loss charged against acquired intangible value",
      "income tax expense benefit computed on pretax earnings",
      "operating lease liability payments due under noncurrent arrangements",
      "share based compensation granted to employees as stock awards",
      "inventory net of reserves for obsolete finished goods",
      "long term debt principal maturing beyond twelve months",
      "research and development costs expensed as incurred",
      "dividends declared per common share to stockholders"};
  std::vector<tagrec::TagDocument> docs;
  for (std::size_t i = 0; i < texts.size(); ++i) docs.push_back({"TAG-0" + std::to_string(i), texts[i]});
  return tagrec::TaxonomyCorpus(std::move(docs));
}

std::vector<tagrec::NumeralRecord> fixture_dataset(const tagrec::TaxonomyCorpus& corpus) {
  const std::vector<std::pair<std::string, std::string>> items{
      {"TAG-00", "Revenue was $4.2 million for the quarter."},
      {"TAG-03", "The company recorded tax expense of 812 thousand."},
      {"TAG-05", "Stock awards of 1,250 shares were granted."},
      {"TAG-07", "Debt of 300 million matures in 2031."},
      {"TAG-09", "A dividend of 0.45 per share was declared."}};
  const std::vector<std::string> numerals{"4.2", "812", "1,250", "300", "0.45"};
  std::vector<tagrec::NumeralRecord> records;
  for (std::size_t i = 0; i < items.size(); ++i) {
    tagrec::NumeralRecord r;
    r.record_id = "rec-" + std::to_string(i + 1);
    r.report_text = items[i].second;
    r.numeral = numerals[i];
    r.question = "Which tag describes " + numerals[i] + "?";
    r.gold_tag_id = items[i].first;
    r.gen_tag_doc = corpus.find(items[i].first)->text;
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<tagrec::Candidate> brute_force_top_k(std::span<const float> query, const tagrec::VectorIndex& index,
                                                 std::size_t k) {
  struct Scored {
    double score;
    std::size_t pos;
  };
  std::vector<Scored> all;
  double qn = 0.0;
  for (float v : query) qn += static_cast<double>(v) * v;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto row = index.row(i);
    double d = 0.0, rn = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      d += static_cast<double>(query[j]) * row[j];
      rn += static_cast<double>(row[j]) * row[j];
    }
    all.push_back({d / (std::sqrt(qn) * std::sqrt(rn)), i});
  }
  std::stable_sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  std::vector<tagrec::Candidate> out;
  for (std::size_t r = 0; r < k; ++r) out.push_back({index.tag_id(all[r].pos), all[r].score, r + 1});
  return out;
}

tagrec::MacroMetrics brute_force_macro(const std::vector<tagrec::PredictionItem>& items) {
  std::set<std::string> classes;
  for (const auto& it : items) classes.insert(it.gold_tag_id);
  tagrec::MacroMetrics m;
  for (const auto& c : classes) {
    tagrec::ClassMetrics row;
    row.tag_id = c;
    for (const auto& it : items) {
      const bool g = it.gold_tag_id == c;
      const bool p = it.predicted_tag_id == c;
      if (g && p) ++row.tp;
      if (!g && p) ++row.fp;
      if (g && !p) ++row.fn;
    }
    const double tp = static_cast<double>(row.tp);
    row.precision = row.tp + row.fp == 0 ? 0.0 : tp / static_cast<double>(row.tp + row.fp);
    row.recall = row.tp + row.fn == 0 ? 0.0 : tp / static_cast<double>(row.tp + row.fn);
    row.f1 = row.precision + row.recall == 0.0 ? 0.0
                                               : 2.0 * row.precision * row.recall / (row.precision + row.recall);
    m.precision += row.precision;
    m.recall += row.recall;
    m.f1 += row.f1;
    m.per_class.push_back(row);
  }
  const double n = static_cast<double>(classes.size());
  if (n > 0) {
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
  }
  return m;
}

}  // namespace testsupport
