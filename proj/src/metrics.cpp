#include "dlab/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "dlab/error.hpp"

namespace dlab::metrics {
namespace {

// Dense rank (1-based) of each value among the distinct values of `xs`.
std::vector<std::size_t> dense_ranks(std::span<const std::int64_t> xs) {
  std::vector<std::int64_t> distinct(xs.begin(), xs.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::size_t> ranks(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    ranks[k] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), xs[k]) - distinct.begin()) + 1;
  }
  return ranks;
}

std::string format_real(double x) { return fmt::format("{:.12g}", x); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den == 0) throw DomainError("metrics", "zero denominator");
  const auto g = std::gcd(num, den);
  return {num / g, den / g};
}

Rational afp(std::span<const std::int64_t> steps) {
  if (steps.empty()) throw DomainError("metrics", "AFP of an empty step list");
  std::vector<std::int64_t> sorted(steps.begin(), steps.end());
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  return Rational::make(static_cast<std::int64_t>(steps.size()), distinct);
}

PairCounts count_pairs(std::span<const std::int64_t> steps) {
  // Fenwick tree over dense step ranks; scanning positions left to right,
  // earlier tokens with a smaller step form concordant pairs.
  const auto ranks = dense_ranks(steps);
  const std::size_t m = ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end());
  std::vector<std::int64_t> tree(m + 1, 0);
  auto prefix = [&](std::size_t r) {
    std::int64_t s = 0;
    for (; r > 0; r -= r & (~r + 1)) s += tree[r];
    return s;
  };
  PairCounts pc;
  for (std::size_t j = 0; j < ranks.size(); ++j) {
    const auto r = ranks[j];
    const auto less = prefix(r - 1);
    const auto less_or_equal = prefix(r);
    pc.concordant += less;
    pc.tied += less_or_equal - less;
    pc.discordant += static_cast<std::int64_t>(j) - less_or_equal;
    for (auto i = r; i <= m; i += i & (~i + 1)) tree[i] += 1;
  }
  return pc;
}

double kendall_tau(std::span<const std::int64_t> steps) {
  const auto n = static_cast<std::int64_t>(steps.size());
  if (n < 2) throw UndefinedMetricError("metrics", "Kendall's tau needs at least 2 tokens");
  const auto pc = count_pairs(steps);
  const auto pairs = n * (n - 1) / 2;
  return static_cast<double>(pc.concordant - pc.discordant) / static_cast<double>(pairs);
}

std::vector<BlockTrajectory> block_trajectories(const trace::DecodingTrace& t) {
  std::vector<BlockTrajectory> out;
  std::size_t k = 0;
  while (k < t.tokens.size()) {
    const auto block = t.tokens[k].block_index;
    std::vector<std::int64_t> steps;
    for (; k < t.tokens.size() && t.tokens[k].block_index == block; ++k) steps.push_back(t.tokens[k].finalize_step);
    BlockTrajectory bt;
    bt.block_index = block;
    bt.block_afp = afp(steps);
    if (steps.size() >= 2) bt.block_tau = kendall_tau(steps);
    bt.token_count = steps.size();
    out.push_back(bt);
  }
  return out;
}

TraceSummary summarize(const trace::DecodingTrace& t) {
  const auto steps = t.steps();
  TraceSummary s{afp(steps), std::nullopt};
  if (steps.size() >= 2) s.tau = kendall_tau(steps);
  return s;
}

std::string BlockBucket::label() const {
  return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
}

std::vector<BlockBucket> parse_buckets(const std::string& spec) {
  std::vector<BlockBucket> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto end = spec.find(',', start);
    if (end == std::string::npos) end = spec.size();
    const auto item = spec.substr(start, end - start);
    if (!item.empty()) {
      BlockBucket b;
      try {
        const auto dash = item.find('-');
        std::size_t used = 0;
        if (dash == std::string::npos) {
          b.lo = b.hi = std::stoul(item, &used);
          if (used != item.size()) throw std::invalid_argument(item);
        } else {
          b.lo = std::stoul(item.substr(0, dash));
          b.hi = std::stoul(item.substr(dash + 1), &used);
          if (used != item.size() - dash - 1) throw std::invalid_argument(item);
        }
      } catch (const std::exception&) {
        throw ParseError("metrics", 0, "bad bucket \"" + item + "\" (expected lo-hi)");
      }
      if (b.lo > b.hi) throw ParseError("metrics", 0, "bucket \"" + item + "\" has lo > hi");
      out.push_back(b);
    }
    start = end + 1;
  }
  return out;
}

std::vector<GroupSummary> aggregate(const trace::TraceCorpus& corpus, const Bucketing& bucketing) {
  struct Acc {
    double afp_sum = 0.0;
    double tau_sum = 0.0;
    std::size_t count = 0;
    std::size_t tau_count = 0;
  };
  std::map<GroupKey, Acc> groups;
  for (const auto& t : corpus.traces) {
    if (t.step_scope != trace::StepScope::global) {
      throw ValidationError("metrics", t.sample_id, "step_scope", "aggregate requires normalized (global) traces");
    }
    GroupKey key{"*", "*", "*", "*", "*"};
    if (bucketing.by_domain) key.domain = t.domain_tag.value_or("-");
    if (bucketing.by_correctness) key.correctness = trace::to_string(t.correctness);
    if (bucketing.by_repetitive) key.repetitive = t.repetitive ? "true" : "false";
    if (!bucketing.block_buckets.empty()) {
      const auto blocks = t.block_count();
      key.block_bucket = "other";
      for (const auto& b : bucketing.block_buckets) {
        if (blocks >= b.lo && blocks <= b.hi) {
          key.block_bucket = b.label();
          break;
        }
      }
    }
    if (bucketing.metadata_key) {
      auto it = t.metadata.find(*bucketing.metadata_key);
      key.metadata = it == t.metadata.end() ? "-" : it->second;
    }
    const auto s = summarize(t);
    auto& acc = groups[key];
    acc.afp_sum += s.afp.value();
    acc.count += 1;
    if (s.tau) {
      acc.tau_sum += *s.tau;
      acc.tau_count += 1;
    }
  }
  std::vector<GroupSummary> out;
  for (const auto& [key, acc] : groups) {
    GroupSummary g;
    g.key = key;
    g.count = acc.count;
    g.mean_afp = acc.afp_sum / static_cast<double>(acc.count);
    if (acc.tau_count > 0) g.mean_tau = acc.tau_sum / static_cast<double>(acc.tau_count);
    g.excluded_tau_count = acc.count - acc.tau_count;
    out.push_back(std::move(g));
  }
  return out;
}

LabelTable label_avg_local_step(const trace::TraceCorpus& corpus) {
  struct Acc {
    std::size_t rank_sum = 0;
    std::size_t count = 0;
  };
  std::map<std::string, Acc> acc;
  LabelTable table;
  for (const auto& t : corpus.traces) {
    std::size_t k = 0;
    while (k < t.tokens.size()) {
      const auto block = t.tokens[k].block_index;
      const auto begin = k;
      std::vector<std::int64_t> steps;
      for (; k < t.tokens.size() && t.tokens[k].block_index == block; ++k) steps.push_back(t.tokens[k].finalize_step);
      const auto ranks = dense_ranks(steps);
      for (std::size_t j = 0; j < steps.size(); ++j) {
        const auto& tok = t.tokens[begin + j];
        if (!tok.label) {
          ++table.skipped;
          continue;
        }
        auto& a = acc[*tok.label];
        a.rank_sum += ranks[j];
        a.count += 1;
      }
    }
  }
  for (const auto& [label, a] : acc) {
    table.rows.push_back({label, static_cast<double>(a.rank_sum) / static_cast<double>(a.count), a.count});
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const LabelRow& x, const LabelRow& y) { return x.avg_local_step < y.avg_local_step; });
  return table;
}

void write_group_csv(std::ostream& out, const std::vector<GroupSummary>& groups, const Bucketing& bucketing) {
  out << "domain_tag,correctness,repetitive,block_bucket";
  if (bucketing.metadata_key) out << ",meta_" << *bucketing.metadata_key;
  out << ",mean_afp,mean_tau,count,excluded_tau_count\n";
  for (const auto& g : groups) {
    out << csv_field(g.key.domain) << ',' << g.key.correctness << ',' << g.key.repetitive << ',' << g.key.block_bucket;
    if (bucketing.metadata_key) out << ',' << csv_field(g.key.metadata);
    out << ',' << format_real(g.mean_afp) << ',' << (g.mean_tau ? format_real(*g.mean_tau) : "NA") << ','
        << g.count << ',' << g.excluded_tau_count << '\n';
  }
}

void write_label_csv(std::ostream& out, const LabelTable& table) {
  out << "label,avg_local_step,total_count\n";
  for (const auto& r : table.rows) out << csv_field(r.label) << ',' << format_real(r.avg_local_step) << ',' << r.total_count << '\n';
}

}  // namespace dlab::metrics
