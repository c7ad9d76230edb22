#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dlab::trace {

enum class StepScope { global, per_block };
enum class Correctness { correct, incorrect, unknown };

const char* to_string(StepScope scope);
const char* to_string(Correctness c);

struct TraceToken {
  std::size_t position = 0;
  std::optional<std::string> text;
  std::optional<std::string> label;
  std::int64_t finalize_step = 1;  // c_i, >= 1
  std::int64_t block_index = 0;

  bool operator==(const TraceToken&) const = default;
};

/// Finalization record of one generated sequence. Tokens are stored in
/// position order; `validate` enforces the structural invariants.
struct DecodingTrace {
  std::string sample_id;
  std::vector<TraceToken> tokens;
  std::optional<std::string> domain_tag;
  Correctness correctness = Correctness::unknown;
  bool repetitive = false;
  StepScope step_scope = StepScope::global;
  // Free-form producer annotations (decode mode, solver strategy, ...).
  std::map<std::string, std::string> metadata;

  std::vector<std::int64_t> steps() const;
  std::size_t block_count() const;

  bool operator==(const DecodingTrace&) const = default;
};

struct TraceCorpus {
  std::vector<DecodingTrace> traces;
  std::string provenance;
};

/// Throws ValidationError naming the sample and offending field.
void validate(const DecodingTrace& trace);
void validate(const TraceCorpus& corpus);

/// Rewrites per-block step counters onto one global clock: each block is
/// offset by the running maximum step of all earlier blocks. Global traces
/// are returned unchanged.
DecodingTrace normalize_steps(const DecodingTrace& trace);
TraceCorpus normalize_steps(const TraceCorpus& corpus);

// JSONL ingestion / emission.
TraceCorpus ingest_traces(const std::filesystem::path& path);
TraceCorpus parse_traces(std::istream& in, std::string provenance);
std::string to_json_line(const DecodingTrace& trace);
void emit_traces(std::ostream& out, const TraceCorpus& corpus);

}  // namespace dlab::trace
