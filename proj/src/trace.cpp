#include "dlab/trace.hpp"

#include <algorithm>
#include <set>

#include "dlab/error.hpp"

namespace dlab::trace {
namespace {

void fail(const DecodingTrace& t, const std::string& field, const std::string& msg) {
  throw ValidationError("trace-model", t.sample_id.empty() ? "<unnamed>" : t.sample_id, field, msg);
}

}  // namespace

const char* to_string(StepScope scope) { return scope == StepScope::global ? "global" : "per_block"; }

const char* to_string(Correctness c) {
  switch (c) {
    case Correctness::correct: return "correct";
    case Correctness::incorrect: return "incorrect";
    case Correctness::unknown: break;
  }
  return "unknown";
}

std::vector<std::int64_t> DecodingTrace::steps() const {
  std::vector<std::int64_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.finalize_step);
  return out;
}

std::size_t DecodingTrace::block_count() const {
  std::size_t count = 0;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (k == 0 || tokens[k].block_index != tokens[k - 1].block_index) ++count;
  }
  return count;
}

void validate(const DecodingTrace& t) {
  if (t.sample_id.empty()) fail(t, "sample_id", "must be non-empty");
  if (t.tokens.empty()) fail(t, "tokens", "a trace needs at least one token");
  for (std::size_t k = 0; k < t.tokens.size(); ++k) {
    const auto& tok = t.tokens[k];
    if (tok.position != k) {
      fail(t, "position", "positions must be exactly 0..n-1 without gaps or duplicates (found " +
                              std::to_string(tok.position) + " at index " + std::to_string(k) + ")");
    }
    if (tok.finalize_step < 1) fail(t, "finalize_step", "must be >= 1 at position " + std::to_string(k));
    if (tok.block_index < 0) fail(t, "block_index", "must be >= 0 at position " + std::to_string(k));
    if (k > 0 && tok.block_index < t.tokens[k - 1].block_index) {
      fail(t, "block_index", "must be non-decreasing in position (position " + std::to_string(k) + ")");
    }
  }
  if (t.step_scope != StepScope::global) return;

  // Consecutive blocks must occupy disjoint, increasing step ranges.
  std::int64_t prev_max = 0;
  std::size_t k = 0;
  bool first = true;
  while (k < t.tokens.size()) {
    const auto block = t.tokens[k].block_index;
    std::int64_t lo = t.tokens[k].finalize_step, hi = lo;
    for (; k < t.tokens.size() && t.tokens[k].block_index == block; ++k) {
      lo = std::min(lo, t.tokens[k].finalize_step);
      hi = std::max(hi, t.tokens[k].finalize_step);
    }
    if (!first && lo <= prev_max) {
      fail(t, "finalize_step", "global steps of block " + std::to_string(block) +
                                   " overlap an earlier block");
    }
    prev_max = hi;
    first = false;
  }
}

void validate(const TraceCorpus& corpus) {
  std::set<std::string> seen;
  for (const auto& t : corpus.traces) {
    validate(t);
    if (!seen.insert(t.sample_id).second) fail(t, "sample_id", "duplicate sample_id in corpus");
  }
}

DecodingTrace normalize_steps(const DecodingTrace& trace) {
  if (trace.step_scope == StepScope::global) return trace;
  DecodingTrace out = trace;
  std::int64_t offset = 0;
  std::size_t k = 0;
  while (k < out.tokens.size()) {
    const auto block = out.tokens[k].block_index;
    std::int64_t block_max = 0;
    for (; k < out.tokens.size() && out.tokens[k].block_index == block; ++k) {
      auto& tok = out.tokens[k];
      if (tok.finalize_step < 1) fail(trace, "finalize_step", "local steps must be positive");
      block_max = std::max(block_max, tok.finalize_step);
      tok.finalize_step += offset;
    }
    offset += block_max;
  }
  out.step_scope = StepScope::global;
  return out;
}

TraceCorpus normalize_steps(const TraceCorpus& corpus) {
  TraceCorpus out{{}, corpus.provenance};
  out.traces.reserve(corpus.traces.size());
  for (const auto& t : corpus.traces) out.traces.push_back(normalize_steps(t));
  return out;
}

}  // namespace dlab::trace
