#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlab/trace.hpp"

namespace dlab::metrics {

/// Exact non-negative fraction kept in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

/// Average Finalization Parallelism: n / (number of distinct steps).
Rational afp(std::span<const std::int64_t> steps);

struct PairCounts {
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t tied = 0;
};

/// Concordant/discordant pair counts between position and step, O(n log n).
PairCounts count_pairs(std::span<const std::int64_t> steps);

/// Kendall's tau-a of (position, step); ties count in neither C nor D.
/// Throws UndefinedMetricError for n < 2.
double kendall_tau(std::span<const std::int64_t> steps);

struct BlockTrajectory {
  std::int64_t block_index = 0;
  Rational block_afp;
  std::optional<double> block_tau;  // empty when the block has fewer than 2 tokens
  std::size_t token_count = 0;
};

std::vector<BlockTrajectory> block_trajectories(const trace::DecodingTrace& trace);

struct TraceSummary {
  Rational afp;
  std::optional<double> tau;
};

TraceSummary summarize(const trace::DecodingTrace& trace);

/// Inclusive range of block counts, e.g. {1, 2}.
struct BlockBucket {
  std::size_t lo = 1;
  std::size_t hi = 1;
  std::string label() const;
};

struct Bucketing {
  bool by_domain = true;
  bool by_correctness = true;
  bool by_repetitive = true;
  std::vector<BlockBucket> block_buckets;   // empty: no block-count grouping
  std::optional<std::string> metadata_key;  // group additionally by this metadata entry
};

/// Parses "1-2,3-4,5" into block buckets. Throws ParseError.
std::vector<BlockBucket> parse_buckets(const std::string& spec);

struct GroupKey {
  std::string domain;
  std::string correctness;
  std::string repetitive;
  std::string block_bucket;
  std::string metadata;

  auto operator<=>(const GroupKey&) const = default;
};

struct GroupSummary {
  GroupKey key;
  double mean_afp = 0.0;
  std::optional<double> mean_tau;  // empty when every member had undefined tau
  std::size_t count = 0;
  std::size_t excluded_tau_count = 0;
};

/// Per-trace unweighted means grouped by the requested keys, sorted by key.
/// Throws ValidationError if a trace is not on the global step clock.
std::vector<GroupSummary> aggregate(const trace::TraceCorpus& corpus, const Bucketing& bucketing);

struct LabelRow {
  std::string label;
  double avg_local_step = 0.0;
  std::size_t total_count = 0;
};

struct LabelTable {
  std::vector<LabelRow> rows;  // ascending by avg_local_step, then label
  std::size_t skipped = 0;     // tokens without a label
};

/// Mean within-block dense rank of finalize_step, per label, corpus-wide.
LabelTable label_avg_local_step(const trace::TraceCorpus& corpus);

void write_group_csv(std::ostream& out, const std::vector<GroupSummary>& groups, const Bucketing& bucketing);
void write_label_csv(std::ostream& out, const LabelTable& table);

}  // namespace dlab::metrics
