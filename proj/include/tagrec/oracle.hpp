#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tagrec/backends.hpp"

namespace tagrec {

enum class OracleKind { Perfect, Noisy, Lexical, PositionBiased, IdentityEcho };

/// Offline stand-in for the listwise ranking model.
///
///   perfect            gold first (when presented), others in presented order
///   noisy:p            perfect, then with probability p the top element is
///                      swapped with a uniformly chosen other position
///   lexical            descending distinct-token overlap with the generated
///                      document, ties by presented position
///   position-biased    presented order (pure primacy)
///   position-biased:p  primacy-limited recognition: gold is recognised with
///                      probability 1 - p * (pos - 1) / (n - 1) for presented
///                      position pos in a group of n; when it is not, the
///                      member with the best retrieval rank is preferred
///   identity-echo      presented order
struct OracleSpec {
  OracleKind kind = OracleKind::Perfect;
  std::optional<double> error_rate;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  bool needs_gold() const;
  std::string to_string() const;

  // "perfect", "noisy:0.3", "lexical", "position-biased[:p]", "identity-echo".
  static OracleSpec parse(std::string_view text, std::uint64_t seed = 0);
};

// Permutation of 1..group.size(), most relevant first.
std::vector<std::size_t> oracle_rank(const OracleSpec& spec, std::string_view gen_doc,
                                     std::span<const RankMember> group, std::optional<std::string_view> gold_tag_id,
                                     std::uint64_t call_seed = 0);

/// Ranker backend that answers with the oracle's permutation rendered as
/// "[a] > [b] > ...", so the reply goes through the normal parse path.
class OracleRanker final : public Ranker {
 public:
  explicit OracleRanker(OracleSpec spec);

  const OracleSpec& spec() const noexcept { return spec_; }
  std::string id() const override { return "oracle:" + spec_.to_string(); }
  BackendStats stats() const override { return counters_.snapshot(); }

 protected:
  std::string do_rank(const RankRequest& request) override;

 private:
  OracleSpec spec_;
  BackendCounters counters_;
};

}  // namespace tagrec
