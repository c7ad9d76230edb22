#include "dlab/decoder.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "dlab/error.hpp"
#include "dlab/text.hpp"

namespace dlab::decoder {
namespace {

constexpr const char* kModule = "decoder-sim";
constexpr int kMask = -1;

}  // namespace

TableLanguageModel::TableLanguageModel(int block_size, std::vector<dist::JointTable> masters)
    : vocab_(0), length_(0), block_size_(block_size), masters_(std::move(masters)) {
  if (masters_.empty()) throw ValidationError(kModule, "TableLanguageModel", "masters", "at least one context required");
  vocab_ = masters_.front().vocab();
  length_ = masters_.front().length();
  for (const auto& m : masters_) {
    if (m.vocab() != vocab_ || m.length() != length_) {
      throw ValidationError(kModule, "TableLanguageModel", "masters", "all contexts must share V and L");
    }
  }
  if (block_size_ < 1 || length_ % block_size_ != 0) {
    throw ValidationError(kModule, "TableLanguageModel", "block_size", "B must be >= 1 and divide L");
  }
}

std::vector<std::string> TableLanguageModel::context_ids() const {
  std::vector<std::string> ids;
  for (const auto& m : masters_) ids.push_back(m.context_id());
  return ids;
}

const dist::JointTable& TableLanguageModel::master(std::string_view context_id) const {
  for (const auto& m : masters_) {
    if (m.context_id() == context_id) return m;
  }
  throw DomainError(kModule, fmt::format("unknown context \"{}\"", context_id));
}

void DecodeConfig::validate() const {
  if (mode == Mode::threshold && !(tau_conf > 0.0 && tau_conf < 1.0)) {
    throw ValidationError(kModule, "DecodeConfig", "tau_conf", "threshold must lie strictly inside (0, 1); use accept_all for 0");
  }
}

std::string DecodeConfig::mode_tag() const {
  switch (mode) {
    case Mode::threshold: return fmt::format("threshold({:g})", tau_conf);
    case Mode::accept_all: return "accept_all";
    case Mode::top1: return "top1";
    case Mode::ar_baseline: break;
  }
  return "ar_baseline";
}

DecodeResult decode(const TableLanguageModel& model, const DecodeConfig& config, std::string_view context_id) {
  config.validate();
  const auto& joint = model.master(context_id);
  const int v = model.vocab(), l = model.length(), b_size = model.block_size();
  const auto vs = static_cast<std::size_t>(v);

  std::vector<std::vector<int>> digits(joint.size());
  for (std::size_t s = 0; s < joint.size(); ++s) digits[s] = dist::decode_state(s, v, l);

  Rng rng(config.sample_seed);
  std::vector<int> values(static_cast<std::size_t>(l), kMask);
  std::vector<std::int64_t> finalized_at(static_cast<std::size_t>(l), 0);
  std::int64_t step = 0;
  std::size_t forced_steps = 0, degenerate = 0;

  std::vector<double> marg(static_cast<std::size_t>(b_size) * vs);
  for (int block = 0; block < model.block_count(); ++block) {
    const int lo = block * b_size, hi = lo + b_size;
    while (std::any_of(values.begin() + lo, values.begin() + hi, [](int x) { return x == kMask; })) {
      ++step;
      // Exact conditionals of the masked block positions given every committed token.
      std::fill(marg.begin(), marg.end(), 0.0);
      double mass = 0.0;
      for (std::size_t s = 0; s < joint.size(); ++s) {
        const auto& y = digits[s];
        bool consistent = true;
        for (int i = 0; i < l && consistent; ++i) {
          const int c = values[static_cast<std::size_t>(i)];
          consistent = (c == kMask || c == y[static_cast<std::size_t>(i)]);
        }
        if (!consistent || joint[s] == 0.0) continue;
        mass += joint[s];
        for (int i = lo; i < hi; ++i) {
          if (values[static_cast<std::size_t>(i)] == kMask) {
            marg[static_cast<std::size_t>(i - lo) * vs + static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += joint[s];
          }
        }
      }
      if (mass <= 0.0) ++degenerate;

      struct Candidate {
        int position;
        double confidence;
        int argmax;
      };
      std::vector<Candidate> masked;
      for (int i = lo; i < hi; ++i) {
        if (values[static_cast<std::size_t>(i)] != kMask) continue;
        double* row = marg.data() + static_cast<std::size_t>(i - lo) * vs;
        for (std::size_t x = 0; x < vs; ++x) row[x] = mass > 0.0 ? row[x] / mass : 1.0 / static_cast<double>(v);
        const auto best = std::max_element(row, row + vs);
        masked.push_back({i, *best, static_cast<int>(best - row)});
      }
      // Highest confidence, lowest position on ties.
      const auto most_confident = *std::max_element(masked.begin(), masked.end(), [](const Candidate& a, const Candidate& b) {
        return a.confidence < b.confidence || (a.confidence == b.confidence && a.position > b.position);
      });

      std::vector<Candidate> chosen;
      switch (config.mode) {
        case DecodeConfig::Mode::threshold:
          for (const auto& c : masked) {
            if (c.confidence >= config.tau_conf) chosen.push_back(c);
          }
          if (chosen.empty()) {
            if (!config.forced_progress) {
              throw DomainError(kModule, "no masked position reaches the threshold and forced progress is off");
            }
            chosen.push_back(most_confident);
            ++forced_steps;
          }
          break;
        case DecodeConfig::Mode::accept_all:
          chosen = masked;
          break;
        case DecodeConfig::Mode::top1:
          chosen.push_back(most_confident);
          break;
        case DecodeConfig::Mode::ar_baseline:
          chosen.push_back(masked.front());
          break;
      }

      for (const auto& c : chosen) {
        int value = c.argmax;
        if (config.choose == DecodeConfig::ChooseRule::sample) {
          const double* row = marg.data() + static_cast<std::size_t>(c.position - lo) * vs;
          std::discrete_distribution<int> pick(row, row + vs);
          value = pick(rng);
        }
        values[static_cast<std::size_t>(c.position)] = value;
        finalized_at[static_cast<std::size_t>(c.position)] = step;
      }
    }
  }

  DecodeResult out;
  out.sequence = values;
  auto& t = out.trace;
  t.sample_id = std::string(context_id);
  t.step_scope = trace::StepScope::global;
  for (int i = 0; i < l; ++i) {
    trace::TraceToken tok;
    tok.position = static_cast<std::size_t>(i);
    tok.text = std::to_string(values[static_cast<std::size_t>(i)]);
    tok.finalize_step = finalized_at[static_cast<std::size_t>(i)];
    tok.block_index = i / b_size;
    t.tokens.push_back(std::move(tok));
  }
  t.metadata["mode"] = config.mode_tag();
  t.metadata["tau_conf"] = config.mode == DecodeConfig::Mode::threshold ? fmt::format("{:g}", config.tau_conf) : "-";
  t.metadata["choose_rule"] = config.choose == DecodeConfig::ChooseRule::sample ? "sample" : "greedy_argmax";
  t.metadata["forced_progress"] = config.forced_progress ? "true" : "false";
  t.metadata["forced_steps"] = std::to_string(forced_steps);
  t.metadata["threshold_basis"] = "raw_max_probability";
  t.metadata["degenerate_conditionings"] = std::to_string(degenerate);
  t.metadata["context_id"] = std::string(context_id);
  trace::validate(t);
  return out;
}

trace::TraceCorpus batch_decode(const TableLanguageModel& model, const DecodeConfig& config,
                                std::span<const std::string> contexts, std::uint64_t seed) {
  trace::TraceCorpus corpus{{}, fmt::format("decoder-sim {} seed={}", config.mode_tag(), seed)};
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    auto cfg = config;
    cfg.sample_seed = derive_seed(seed, k);
    auto result = decode(model, cfg, contexts[k]);
    result.trace.sample_id = fmt::format("{}/{}/{}", config.mode_tag(), contexts[k], k);
    corpus.traces.push_back(std::move(result.trace));
  }
  return corpus;
}

TableLanguageModel random_model(int vocab, int length, int block_size, std::size_t contexts, Rng& rng,
                                double concentration) {
  std::vector<dist::JointTable> masters;
  for (std::size_t k = 0; k < contexts; ++k) {
    masters.push_back(dist::random_joint(vocab, length, rng, concentration, "ctx" + std::to_string(k)));
  }
  return TableLanguageModel(block_size, std::move(masters));
}

TableLanguageModel read_model_text(std::istream& raw, std::string context_id) {
  auto in = strip_comment_lines(raw);
  int v = 0, l = 0, b = 0;
  std::string tag;
  if (!(in >> v >> l)) throw ParseError(kModule, 1, "expected header \"V L\"");
  if (!(in >> tag >> b) || tag != "B") throw ParseError(kModule, 2, "expected \"B <block size>\"");
  const auto n = dist::state_count(v, l);
  std::vector<double> probs(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(in >> probs[k])) throw ParseError(kModule, 0, fmt::format("expected {} probabilities, read {}", n, k));
  }
  std::vector<dist::JointTable> masters;
  masters.emplace_back(v, l, std::move(probs), std::move(context_id));
  return TableLanguageModel(b, std::move(masters));
}

void write_model_text(std::ostream& out, const TableLanguageModel& model, std::string_view context_id) {
  const auto& m = model.master(context_id);
  out << m.vocab() << ' ' << m.length() << '\n' << "B " << model.block_size() << '\n';
  for (std::size_t k = 0; k < m.size(); ++k) out << fmt::format("{:.17g}", m[k]) << (k + 1 == m.size() ? '\n' : ' ');
}

}  // namespace dlab::decoder
