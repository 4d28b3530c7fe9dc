#include "tagrec/oracle.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tagrec/errors.hpp"
#include "tagrec/prompting.hpp"
#include "tagrec/rng.hpp"

namespace tagrec {
namespace {

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{1});
  return order;
}

std::optional<std::size_t> gold_position(std::span<const RankMember> group, std::optional<std::string_view> gold) {
  if (!gold) return std::nullopt;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group[i].tag_id == *gold) return i + 1;
  }
  return std::nullopt;
}

std::vector<std::size_t> perfect_order(std::span<const RankMember> group, std::optional<std::string_view> gold) {
  auto order = identity(group.size());
  if (auto pos = gold_position(group, gold)) {
    std::rotate(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(*pos - 1),
                order.begin() + static_cast<std::ptrdiff_t>(*pos));
  }
  return order;
}

double parse_rate(std::string_view text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(text), &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid oracle error rate '" + std::string(text) + "'");
  }
}

}  // namespace

void OracleSpec::validate() const {
  if (error_rate && !(*error_rate >= 0.0 && *error_rate <= 1.0)) {
    throw ConfigError("oracle error rate must lie in [0, 1]");
  }
  if (kind == OracleKind::Noisy && !error_rate) throw ConfigError("noisy oracle requires an error rate");
  if (error_rate && kind != OracleKind::Noisy && kind != OracleKind::PositionBiased) {
    throw ConfigError("only noisy and position-biased oracles take an error rate");
  }
}

bool OracleSpec::needs_gold() const {
  return kind == OracleKind::Perfect || kind == OracleKind::Noisy ||
         (kind == OracleKind::PositionBiased && error_rate.has_value());
}

std::string OracleSpec::to_string() const {
  std::string name;
  switch (kind) {
    case OracleKind::Perfect: name = "perfect"; break;
    case OracleKind::Noisy: name = "noisy"; break;
    case OracleKind::Lexical: name = "lexical"; break;
    case OracleKind::PositionBiased: name = "position-biased"; break;
    case OracleKind::IdentityEcho: name = "identity-echo"; break;
  }
  if (error_rate) {
    std::string rate = std::to_string(*error_rate);
    while (rate.size() > 1 && rate.back() == '0') rate.pop_back();
    if (!rate.empty() && rate.back() == '.') rate.push_back('0');
    name += ":" + rate;
  }
  return name;
}

OracleSpec OracleSpec::parse(std::string_view text, std::uint64_t seed) {
  OracleSpec spec;
  spec.seed = seed;
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  if (name == "perfect") {
    spec.kind = OracleKind::Perfect;
  } else if (name == "noisy") {
    spec.kind = OracleKind::Noisy;
  } else if (name == "lexical") {
    spec.kind = OracleKind::Lexical;
  } else if (name == "position-biased") {
    spec.kind = OracleKind::PositionBiased;
  } else if (name == "identity-echo") {
    spec.kind = OracleKind::IdentityEcho;
  } else {
    throw ConfigError("unknown oracle '" + std::string(name) + "'");
  }
  if (colon != std::string_view::npos) spec.error_rate = parse_rate(text.substr(colon + 1));
  spec.validate();
  return spec;
}

std::vector<std::size_t> oracle_rank(const OracleSpec& spec, std::string_view gen_doc,
                                     std::span<const RankMember> group, std::optional<std::string_view> gold_tag_id,
                                     std::uint64_t call_seed) {
  if (group.empty()) throw std::invalid_argument("oracle_rank: empty group");
  if (spec.needs_gold() && !gold_tag_id) {
    throw std::invalid_argument("oracle_rank: " + spec.to_string() + " oracle requires the gold tag");
  }
  const std::size_t n = group.size();

  switch (spec.kind) {
    case OracleKind::Perfect:
      return perfect_order(group, gold_tag_id);

    case OracleKind::Noisy: {
      auto order = perfect_order(group, gold_tag_id);
      Rng rng(mix_seed(spec.seed, call_seed));
      if (n > 1 && rng.unit() < *spec.error_rate) {
        const std::size_t other = 1 + rng.below(n - 1);
        std::swap(order[0], order[other]);
      }
      return order;
    }

    case OracleKind::Lexical: {
      const auto query_tokens = tokenize(gen_doc);
      const std::set<std::string> query(query_tokens.begin(), query_tokens.end());
      std::vector<std::size_t> overlap(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto tokens = tokenize(group[i].text);
        const std::set<std::string> distinct(tokens.begin(), tokens.end());
        for (const auto& t : distinct) overlap[i] += query.contains(t) ? 1 : 0;
      }
      auto order = identity(n);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return overlap[a - 1] > overlap[b - 1]; });
      return order;
    }

    case OracleKind::PositionBiased: {
      if (!spec.error_rate) return identity(n);
      auto order = identity(n);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return group[a - 1].retrieval_rank < group[b - 1].retrieval_rank;
      });
      const auto gold_pos = gold_position(group, gold_tag_id);
      if (!gold_pos) return order;
      Rng rng(mix_seed(spec.seed, call_seed));
      const double miss = n > 1 ? *spec.error_rate * static_cast<double>(*gold_pos - 1) / static_cast<double>(n - 1)
                                : 0.0;
      const bool recognised = !(rng.unit() < miss);
      auto it = std::find(order.begin(), order.end(), *gold_pos);
      if (recognised) {
        std::rotate(order.begin(), it, it + 1);
      } else {
        std::rotate(it, it + 1, order.end());
      }
      return order;
    }

    case OracleKind::IdentityEcho:
      return identity(n);
  }
  return identity(n);
}

OracleRanker::OracleRanker(OracleSpec spec) : spec_(spec) { spec_.validate(); }

std::string OracleRanker::do_rank(const RankRequest& request) {
  counters_.request();
  const auto order = oracle_rank(spec_, request.gen_doc, request.members, request.gold_tag_id, request.call_seed);
  return format_ranking(order);
}

}  // namespace tagrec
