#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlab/dist.hpp"
#include "dlab/trace.hpp"

namespace dlab::decoder {

/// Block-diffusion language model backed by exact tables: one master joint
/// over V^L per context, decoded block by block with block size B.
class TableLanguageModel {
 public:
  TableLanguageModel(int block_size, std::vector<dist::JointTable> masters);

  int vocab() const { return vocab_; }
  int length() const { return length_; }
  int block_size() const { return block_size_; }
  int block_count() const { return length_ / block_size_; }
  const std::vector<dist::JointTable>& masters() const { return masters_; }
  std::vector<std::string> context_ids() const;
  const dist::JointTable& master(std::string_view context_id) const;

 private:
  int vocab_;
  int length_;
  int block_size_;
  std::vector<dist::JointTable> masters_;
};

struct DecodeConfig {
  enum class Mode { threshold, accept_all, top1, ar_baseline };
  enum class ChooseRule { greedy_argmax, sample };

  Mode mode = Mode::threshold;
  double tau_conf = 0.9;  // threshold mode only, strictly inside (0, 1)
  ChooseRule choose = ChooseRule::greedy_argmax;
  std::uint64_t sample_seed = kDefaultSeed;
  bool forced_progress = true;

  static DecodeConfig threshold(double tau) { return {Mode::threshold, tau}; }
  static DecodeConfig accept_all() { return {Mode::accept_all, 0.0}; }
  static DecodeConfig top1() { return {Mode::top1, 0.0}; }
  static DecodeConfig ar_baseline() { return {Mode::ar_baseline, 0.0}; }

  void validate() const;
  std::string mode_tag() const;
};

struct DecodeResult {
  std::vector<int> sequence;
  trace::DecodingTrace trace;
};

/// Decodes one sequence. Every step computes the exact conditional
/// p(x_i | committed tokens) for each masked position of the current block
/// and commits the selected positions in parallel; commitments are final.
DecodeResult decode(const TableLanguageModel& model, const DecodeConfig& config, std::string_view context_id);

/// One trace per listed context. Sampling seeds are derived from (seed, index).
trace::TraceCorpus batch_decode(const TableLanguageModel& model, const DecodeConfig& config,
                                std::span<const std::string> contexts, std::uint64_t seed);

/// Contexts "ctx0".."ctx{n-1}", each with a Dirichlet(concentration) master joint.
TableLanguageModel random_model(int vocab, int length, int block_size, std::size_t contexts, Rng& rng,
                                double concentration = 1.0);

/// Joint text format with a "B <block size>" line after the "V L" header.
TableLanguageModel read_model_text(std::istream& in, std::string context_id);
void write_model_text(std::ostream& out, const TableLanguageModel& model, std::string_view context_id);

}  // namespace dlab::decoder
