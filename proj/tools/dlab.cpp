// dlab: command-line driver for the decoding-dynamics lab.
//
// Subcommands write their reports into --out-dir. Every JSON report carries
// "version" and the resolved "config"; text, CSV and JSONL outputs start
// with a "# dlab <version> config: {...}" comment line.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "dlab/chain.hpp"
#include "dlab/decoder.hpp"
#include "dlab/error.hpp"
#include "dlab/metrics.hpp"
#include "dlab/puzzles.hpp"
#include "dlab/runtime.hpp"
#include "dlab/trace.hpp"
#include "dlab/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace dlab;

namespace {

constexpr const char* kVersion = "dlab 0.1.0";
constexpr int kUsageError = 2;

/// Base exit code of each subcommand family; +0 input/module error, +1 failed assertion.
enum Family { kMetrics = 10, kSimulate = 20, kVerify = 30, kPuzzle = 40, kRuntime = 50 };

struct Common {
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir = "dlab_out";
};

class Output {
 public:
  Output(const Common& common, json config) : dir_(common.out_dir), config_(std::move(config)) {
    config_["seed"] = common.seed;
    config_["out_dir"] = common.out_dir;
    fs::create_directories(dir_);
  }

  const json& config() const { return config_; }
  std::string header() const { return fmt::format("# {} config: {}\n", kVersion, config_.dump()); }

  std::ofstream open(const std::string& name) const {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw Error("cli", fmt::format("cannot write {}", (dir_ / name).string()));
    return f;
  }
  /// Text artifact with the config comment line.
  std::ofstream open_text(const std::string& name) const {
    auto f = open(name);
    f << header();
    return f;
  }
  void write_json(const std::string& name, json body) const {
    json doc;
    doc["version"] = kVersion;
    doc["config"] = config_;
    for (auto& [k, v] : body.items()) doc[k] = v;
    open(name) << doc.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  json config_;
};

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// JSON has no infinity; non-finite values are spelled out.
json real_json(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

double mean(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string input;
  std::string bucket;
  std::vector<std::string> by{"domain", "correctness", "repetitive"};
  std::string meta_key;
};

int run_metrics(const Common& common, const MetricsArgs& a) {
  metrics::Bucketing bucketing;
  bucketing.by_domain = bucketing.by_correctness = bucketing.by_repetitive = false;
  for (const auto& key : a.by) {
    if (key == "domain") bucketing.by_domain = true;
    else if (key == "correctness") bucketing.by_correctness = true;
    else if (key == "repetitive") bucketing.by_repetitive = true;
    else if (key != "none") throw DomainError("cli", fmt::format("unknown grouping key '{}'", key));
  }
  if (!a.bucket.empty()) bucketing.block_buckets = metrics::parse_buckets(a.bucket);
  if (!a.meta_key.empty()) bucketing.metadata_key = a.meta_key;

  const auto corpus = trace::normalize_steps(trace::ingest_traces(a.input));
  const Output out(common, {{"subcommand", "metrics"},
                            {"input", a.input},
                            {"bucket", a.bucket},
                            {"by", a.by},
                            {"meta_key", a.meta_key}});

  const auto groups = metrics::aggregate(corpus, bucketing);
  {
    auto f = out.open_text("groups.csv");
    metrics::write_group_csv(f, groups, bucketing);
  }
  const auto labels = metrics::label_avg_local_step(corpus);
  {
    auto f = out.open_text("labels.csv");
    metrics::write_label_csv(f, labels);
  }

  std::vector<double> afps;
  std::vector<double> taus;
  {
    auto traces = out.open_text("traces.csv");
    auto blocks = out.open_text("blocks.csv");
    traces << "sample_id,tokens,blocks,afp,tau\n";
    blocks << "sample_id,block_index,tokens,block_afp,block_tau\n";
    for (const auto& t : corpus.traces) {
      const auto s = metrics::summarize(t);
      afps.push_back(s.afp.value());
      if (s.tau) taus.push_back(*s.tau);
      traces << fmt::format("{},{},{},{:.12g},{}\n", t.sample_id, t.tokens.size(), t.block_count(), s.afp.value(),
                            s.tau ? fmt::format("{:.12g}", *s.tau) : "NA");
      for (const auto& b : metrics::block_trajectories(t)) {
        blocks << fmt::format("{},{},{},{:.12g},{}\n", t.sample_id, b.block_index, b.token_count, b.block_afp.value(),
                              b.block_tau ? fmt::format("{:.12g}", *b.block_tau) : "NA");
      }
    }
  }
  out.write_json("metrics.json", {{"traces", corpus.traces.size()},
                                  {"mean_afp", mean(afps)},
                                  {"mean_tau", taus.empty() ? json(nullptr) : json(mean(taus))},
                                  {"undefined_tau", corpus.traces.size() - taus.size()},
                                  {"groups", groups.size()},
                                  {"labels", labels.rows.size()},
                                  {"unlabeled_tokens", labels.skipped}});
  fmt::print("metrics: {} traces, {} groups, mean AFP {:.6g}\n", corpus.traces.size(), groups.size(), mean(afps));
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  int vocab = 3;
  int length = 6;
  int block_size = 3;
  std::size_t contexts = 16;
  std::size_t samples = 1;
  double concentration = 1.0;
  std::string mode = "threshold";
  double tau = 0.9;
  std::string choose = "greedy";
  bool no_forced_progress = false;
  std::string input;
};

decoder::DecodeConfig decode_config(const SimulateArgs& a, std::uint64_t seed) {
  decoder::DecodeConfig c;
  if (a.mode == "threshold") c = decoder::DecodeConfig::threshold(a.tau);
  else if (a.mode == "accept_all") c = decoder::DecodeConfig::accept_all();
  else if (a.mode == "top1") c = decoder::DecodeConfig::top1();
  else if (a.mode == "ar_baseline") c = decoder::DecodeConfig::ar_baseline();
  else throw DomainError("cli", fmt::format("unknown mode '{}'", a.mode));
  if (a.choose == "sample") c.choose = decoder::DecodeConfig::ChooseRule::sample;
  else if (a.choose != "greedy") throw DomainError("cli", fmt::format("unknown choose rule '{}'", a.choose));
  c.sample_seed = seed;
  c.forced_progress = !a.no_forced_progress;
  c.validate();
  return c;
}

int run_simulate(const Common& common, const SimulateArgs& a) {
  const auto config = decode_config(a, common.seed);
  Rng rng(common.seed);
  const auto model = a.input.empty()
                         ? decoder::random_model(a.vocab, a.length, a.block_size, a.contexts, rng, a.concentration)
                         : [&] {
                             std::ifstream f(a.input);
                             if (!f) throw Error("cli", fmt::format("cannot open {}", a.input));
                             return decoder::read_model_text(f, fs::path(a.input).stem().string());
                           }();
  json cfg{{"subcommand", "simulate"}, {"mode", a.mode}, {"tau", a.tau}, {"choose", a.choose},
           {"forced_progress", !a.no_forced_progress}, {"samples", a.samples}};
  if (a.input.empty()) {
    cfg["vocab"] = a.vocab;
    cfg["length"] = a.length;
    cfg["block_size"] = a.block_size;
    cfg["contexts"] = a.contexts;
    cfg["concentration"] = a.concentration;
  } else {
    cfg["input"] = a.input;
  }
  const Output out(common, cfg);

  std::vector<std::string> contexts;
  for (std::size_t s = 0; s < a.samples; ++s) {
    for (const auto& id : model.context_ids()) contexts.push_back(id);
  }
  const auto corpus = decoder::batch_decode(model, config, contexts, common.seed);
  {
    auto f = out.open_text("traces.jsonl");
    trace::emit_traces(f, corpus);
  }

  const auto b = static_cast<std::int64_t>(model.block_size());
  std::vector<double> afps;
  std::vector<double> taus;
  std::vector<double> block_afps;
  std::size_t violations = 0;
  for (const auto& t : corpus.traces) {
    const auto s = metrics::summarize(t);
    afps.push_back(s.afp.value());
    if (s.tau) taus.push_back(*s.tau);
    const auto blocks = metrics::block_trajectories(t);
    for (const auto& bt : blocks) block_afps.push_back(bt.block_afp.value());
    switch (config.mode) {
      case decoder::DecodeConfig::Mode::ar_baseline:
        if (!(s.afp == metrics::Rational::make(1, 1)) || (s.tau && *s.tau != 1.0)) ++violations;
        break;
      case decoder::DecodeConfig::Mode::top1:
        if (!(s.afp == metrics::Rational::make(1, 1))) ++violations;
        break;
      case decoder::DecodeConfig::Mode::accept_all:
        for (const auto& bt : blocks) {
          if (!(bt.block_afp == metrics::Rational::make(b, 1))) ++violations;
        }
        break;
      case decoder::DecodeConfig::Mode::threshold:
        break;
    }
  }
  const char* property = "none";
  switch (config.mode) {
    case decoder::DecodeConfig::Mode::ar_baseline: property = "afp == 1 and tau == 1"; break;
    case decoder::DecodeConfig::Mode::top1: property = "afp == 1"; break;
    case decoder::DecodeConfig::Mode::accept_all: property = "block afp == block size"; break;
    case decoder::DecodeConfig::Mode::threshold: break;
  }
  out.write_json("summary.json", {{"traces", corpus.traces.size()},
                                  {"vocab", model.vocab()},
                                  {"length", model.length()},
                                  {"block_size", model.block_size()},
                                  {"mean_afp", mean(afps)},
                                  {"mean_tau", taus.empty() ? json(nullptr) : json(mean(taus))},
                                  {"mean_block_afp", mean(block_afps)},
                                  {"schedule_property", property},
                                  {"schedule_violations", violations},
                                  {"passed", violations == 0}});
  fmt::print("simulate: {} traces, mean AFP {:.6g}, mean tau {}, schedule violations {}\n", corpus.traces.size(),
             mean(afps), taus.empty() ? "NA" : fmt::format("{:.6g}", mean(taus)), violations);
  return violations == 0 ? 0 : kSimulate + 1;
}

// ---------------------------------------------------------------- verify-theory

struct VerifyArgs {
  int k_max = 50;
  std::vector<double> deltas{1e-1, 1e-2, 1e-3};
  std::string joint;
  std::string predictor = "full_conditional";
  std::string policy = "full";
  double tau = 0.5;
};

json chain_json(const verify::ChainVerification& c) {
  json mixing = json::array();
  for (const auto& m : c.mixing) {
    mixing.push_back({{"delta", m.delta},
                      {"empirical_mixing", m.empirical ? json(*m.empirical) : json(nullptr)},
                      {"bound_mixing", m.bound},
                      {"holds", m.holds}});
  }
  return {{"configuration", c.configuration},
          {"predictor", c.predictor},
          {"policy", c.policy},
          {"states", c.states},
          {"alpha", c.alpha},
          {"max_self_influence", c.max_self_influence},
          {"status", c.status == chain::CheckStatus::checked ? "checked" : "skipped"},
          {"unique_stationary", c.unique_stationary},
          {"worst_contraction_ratio", real_json(c.worst_contraction_ratio)},
          {"contraction_violations", c.contraction_violations},
          {"mixing", mixing},
          {"invariance_defect", opt_json(c.invariance_defect)},
          {"recovery_tv", opt_json(c.recovery_tv)}};
}

chain::SelectionPolicy parse_policy(const std::string& name, double tau, int length) {
  if (name == "threshold") return chain::SelectionPolicy::threshold(tau);
  if (name == "top1") return chain::SelectionPolicy::top1();
  if (name == "full") return chain::SelectionPolicy::full();
  if (name == "random_scan") return chain::SelectionPolicy::random_scan_singleton();
  if (name.rfind("fixed:", 0) == 0) {
    std::vector<int> sites;
    std::stringstream ss(name.substr(6));
    for (std::string tok; std::getline(ss, tok, ',');) {
      const int i = std::stoi(tok);
      if (i < 0 || i >= length) throw DomainError("cli", fmt::format("site {} outside [0, {})", i, length));
      sites.push_back(i);
    }
    return chain::SelectionPolicy::fixed(chain::SiteSet::of(sites));
  }
  throw DomainError("cli", fmt::format("unknown policy '{}'", name));
}

int run_single_chain(const Common& common, const VerifyArgs& a, const verify::TheoryOptions& opts) {
  std::ifstream f(a.joint);
  if (!f) throw Error("cli", fmt::format("cannot open {}", a.joint));
  const auto joint = dist::read_joint_text(f, fs::path(a.joint).stem().string());
  chain::Predictor pred = a.predictor == "mean_field" ? chain::Predictor::mean_field(joint)
                          : a.predictor == "full_conditional"
                              ? chain::Predictor::full_conditional(joint)
                              : throw DomainError("cli", fmt::format("unknown predictor '{}'", a.predictor));
  const auto policy = parse_policy(a.policy, a.tau, joint.length());
  const Output out(common, {{"subcommand", "verify-theory"},
                            {"joint", a.joint},
                            {"predictor", a.predictor},
                            {"policy", a.policy},
                            {"tau", a.tau},
                            {"k_max", a.k_max},
                            {"deltas", a.deltas}});
  const auto kernel = chain::build_kernel(pred, policy);
  const auto dob = chain::dobrushin(pred, policy);
  {
    auto k = out.open_text("kernel.txt");
    chain::write_kernel_text(k, kernel);
    auto d = out.open_text("dobrushin.txt");
    chain::write_dobrushin_text(d, dob);
  }
  const auto c = verify::verify_chain(joint.context_id(), pred, policy, joint, opts);
  const bool ok = c.status == chain::CheckStatus::skipped || (c.contraction_holds() && c.mixing_holds());
  auto body = chain_json(c);
  body["passed"] = ok;
  out.write_json("chain.json", body);
  fmt::print("verify-theory: alpha {:.6g}, {}, {}\n", c.alpha,
             c.status == chain::CheckStatus::checked ? "checked" : "skipped (alpha >= 1)", ok ? "pass" : "FAIL");
  return ok ? 0 : kVerify + 1;
}

int run_verify(const Common& common, const VerifyArgs& a) {
  verify::TheoryOptions opts;
  opts.seed = common.seed;
  opts.k_max = a.k_max;
  opts.deltas = a.deltas;
  for (double d : a.deltas) {
    if (!(d > 0.0 && d < 1.0)) throw DomainError("cli", "every --delta must lie in (0, 1)");
  }
  if (!a.joint.empty()) return run_single_chain(common, a, opts);

  const auto rep = verify::run_theory_suite(opts);
  const Output out(common, {{"subcommand", "verify-theory"},
                            {"k_max", opts.k_max},
                            {"deltas", opts.deltas},
                            {"initials", opts.initials},
                            {"gap_instances", opts.gap_instances},
                            {"metric_instances", opts.metric_instances},
                            {"kernel_instances", opts.kernel_instances},
                            {"chain_instances", opts.chain_instances},
                            {"recovery_instances", opts.recovery_instances},
                            {"meanfield_instances", opts.meanfield_instances}});
  json props = json::array();
  for (const auto& p : rep.properties) {
    props.push_back({{"suite", p.suite},
                     {"name", p.name},
                     {"passed", p.passed},
                     {"instances", p.instances},
                     {"failures", p.failures},
                     {"worst", real_json(p.worst)},
                     {"detail", p.detail}});
    fmt::print("{} {}/{} ({} of {} failed)\n", p.passed ? "PASS" : "FAIL", p.suite, p.name, p.failures, p.instances);
  }
  json chains = json::array();
  for (const auto& c : rep.chains) chains.push_back(chain_json(c));
  out.write_json("theory.json", {{"all_passed", rep.all_passed()}, {"properties", props}, {"chains", chains}});
  return rep.all_passed() ? 0 : kVerify + 1;
}

// ---------------------------------------------------------------- puzzle

struct PuzzleArgs {
  std::string kind = "sudoku";
  std::size_t count = 150;
  int givens = 30;
  int range = 99;
  std::string input;
};

struct StrategyStats {
  std::vector<double> afp;
  std::vector<double> tau;
};

template <class Grid>
struct PuzzleRun {
  std::vector<Grid> puzzles;
  std::vector<std::size_t> attempts;  // cross-math generation attempts
  std::size_t overshoot = 0;
};

int run_puzzle(const Common& common, const PuzzleArgs& a) {
  const bool sudoku = a.kind == "sudoku";
  if (!sudoku && a.kind != "crossmath") throw DomainError("cli", fmt::format("unknown puzzle kind '{}'", a.kind));
  json cfg{{"subcommand", "puzzle"}, {"kind", a.kind}};
  if (a.input.empty()) {
    cfg["count"] = a.count;
    if (sudoku) cfg["givens"] = a.givens;
    else cfg["range"] = a.range;
  } else {
    cfg["input"] = a.input;
  }
  const Output out(common, cfg);

  std::map<std::string, StrategyStats> stats;
  std::size_t unique = 0;
  std::size_t verified = 0;
  std::size_t agree = 0;
  std::size_t lr_tau_violations = 0;
  std::size_t solved = 0;
  std::size_t overshoot = 0;
  std::size_t attempts = 0;
  trace::TraceCorpus corpus;
  corpus.provenance = fmt::format("dlab puzzle {}", a.kind);

  auto puzzles_file = out.open_text("puzzles.txt");
  auto solutions_file = out.open_text("solutions.txt");

  const auto process = [&](const auto& grid, std::size_t index) {
    using Grid = std::decay_t<decltype(grid)>;
    if (puzzles::count_solutions(grid, 2) == 1) ++unique;
    if constexpr (std::is_same_v<Grid, puzzles::SudokuGrid>) puzzles::write_sudoku(puzzles_file, grid);
    else puzzles::write_crossmath(puzzles_file, grid);
    puzzles_file << '\n';

    const auto lr = puzzles::solve_left_to_right(grid);
    const auto easy = puzzles::solve_any_order(grid, false);
    const auto wave = puzzles::solve_any_order(grid, true);
    ++solved;
    const bool ok = puzzles::verify_solution(grid, lr.solution) && puzzles::verify_solution(grid, easy.solution) &&
                    puzzles::verify_solution(grid, wave.solution);
    if (ok) ++verified;
    if (lr.solution == easy.solution && lr.solution == wave.solution) ++agree;
    if constexpr (std::is_same_v<Grid, puzzles::SudokuGrid>) puzzles::write_sudoku(solutions_file, easy.solution);
    else puzzles::write_crossmath(solutions_file, easy.solution);
    solutions_file << '\n';

    if (lr.trace.entries.empty()) return;
    for (const auto* r : {&lr.trace, &easy.trace, &wave.trace}) {
      auto t = puzzles::to_decoding_trace(*r, fmt::format("{}/{}/{}", a.kind, index, r->strategy));
      t.domain_tag = a.kind;
      const auto s = metrics::summarize(t);
      stats[r->strategy].afp.push_back(s.afp.value());
      if (s.tau) stats[r->strategy].tau.push_back(*s.tau);
      if (r == &lr.trace && s.tau && *s.tau != 1.0) ++lr_tau_violations;
      corpus.traces.push_back(std::move(t));
    }
  };

  if (a.input.empty()) {
    for (std::size_t k = 0; k < a.count; ++k) {
      const auto seed = derive_seed(common.seed, k);
      if (sudoku) {
        const auto p = puzzles::generate_sudoku(seed, a.givens);
        if (p.target_overshot) ++overshoot;
        process(p.puzzle, k);
      } else {
        const auto p = puzzles::generate_crossmath(seed, a.range);
        attempts += p.attempts;
        process(p.puzzle, k);
      }
    }
  } else {
    std::ifstream f(a.input);
    if (!f) throw Error("cli", fmt::format("cannot open {}", a.input));
    for (std::size_t k = 0;; ++k) {
      if (sudoku) {
        const auto g = puzzles::read_sudoku(f);
        if (!g) break;
        process(*g, k);
      } else {
        const auto g = puzzles::read_crossmath(f);
        if (!g) break;
        process(*g, k);
      }
    }
  }
  {
    auto f = out.open_text("traces.jsonl");
    trace::emit_traces(f, corpus);
  }

  json strategies = json::object();
  for (const auto& [name, s] : stats) {
    strategies[name] = {{"traces", s.afp.size()},
                        {"mean_afp", mean(s.afp)},
                        {"mean_tau", s.tau.empty() ? json(nullptr) : json(mean(s.tau))}};
  }
  // Generated batches must be unique; supplied puzzles only need to be solved correctly.
  const bool uniqueness_ok = !a.input.empty() || unique == solved;
  const bool passed = uniqueness_ok && verified == solved && lr_tau_violations == 0;
  json body{{"puzzles", solved},
            {"unique", unique},
            {"verified", verified},
            {"strategies_agree", agree},
            {"left_to_right_tau_violations", lr_tau_violations},
            {"strategies", strategies},
            {"passed", passed}};
  if (a.input.empty() && sudoku) body["givens_target_overshoot"] = overshoot;
  if (a.input.empty() && !sudoku) body["generation_attempts"] = attempts;
  out.write_json("summary.json", body);
  fmt::print("puzzle: {} {} puzzles, {} unique, {} verified\n", solved, a.kind, unique, verified);
  for (const auto& [name, s] : stats) {
    fmt::print("  {}: mean AFP {:.6g}, mean tau {}\n", name, mean(s.afp),
               s.tau.empty() ? "NA" : fmt::format("{:.6g}", mean(s.tau)));
  }
  return passed ? 0 : kPuzzle + 1;
}

// ---------------------------------------------------------------- runtime

struct RuntimeArgs {
  std::string input;
  double alpha = 0.5;
  std::vector<int> m{1};
  int m0 = 8;
  double delta = 0.01;
  bool require_no_slowdown = false;
};

int run_runtime(const Common& common, const RuntimeArgs& a) {
  json cfg{{"subcommand", "runtime"}, {"delta", a.delta}, {"require_no_slowdown", a.require_no_slowdown}};
  std::optional<runtime::RuntimeSpec> spec;
  std::vector<int> ms;
  if (!a.input.empty()) {
    std::ifstream f(a.input);
    if (!f) throw Error("cli", fmt::format("cannot open {}", a.input));
    spec = runtime::read_runtime_spec(f);
    cfg["input"] = a.input;
    for (const auto& [m, entry] : spec->alpha_of_m()) ms.push_back(m);
  } else {
    std::map<int, double> t_step{{a.m0, 1.0}};
    std::map<int, runtime::AlphaEntry> alpha;
    for (int m : a.m) {
      t_step[m] = 1.0;
      alpha[m] = {a.alpha, "command line"};
    }
    spec.emplace(t_step, a.m0, alpha);
    cfg["alpha"] = a.alpha;
    cfg["m"] = a.m;
    cfg["m0"] = a.m0;
    cfg["t_step"] = 1.0;
    ms = a.m;
  }
  const Output out(common, cfg);

  json reports = json::array();
  bool all = true;
  for (int m : ms) {
    const auto& entry = spec->alpha_of_m().at(m);
    if (!entry.alpha) {
      reports.push_back({{"m", m}, {"status", "skipped"}, {"reason", "alpha unavailable"}});
      continue;
    }
    const auto r = runtime::no_slowdown(*spec, m, a.delta);
    all = all && r.no_slowdown;
    reports.push_back({{"m", r.m},
                       {"status", "evaluated"},
                       {"alpha", r.alpha},
                       {"alpha_provenance", entry.provenance},
                       {"delta", r.delta},
                       {"k_rounds", r.k_rounds},
                       {"t_edit", r.t_edit},
                       {"t_base", r.t_base},
                       {"no_slowdown", r.no_slowdown},
                       {"binding_inequality", r.binding_inequality}});
    fmt::print("runtime: m = {}, K = {}, {}\n", r.m, r.k_rounds, r.binding_inequality);
  }
  out.write_json("tradeoff.json", {{"m0", spec->m0()}, {"d0", spec->d0()}, {"reports", reports}});
  return (a.require_no_slowdown && !all) ? kRuntime + 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale lab for masked-diffusion decoding dynamics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Base random seed")->capture_default_str();
    sub->add_option("--out-dir", common.out_dir, "Directory for reports")->capture_default_str();
  };

  MetricsArgs ma;
  auto* metrics_cmd = app.add_subcommand("metrics", "AFP / Kendall tau reports for a JSONL trace corpus");
  add_common(metrics_cmd);
  metrics_cmd->add_option("--input", ma.input, "Trace JSONL file")->required();
  metrics_cmd->add_option("--bucket", ma.bucket, "Block-count buckets, e.g. 1-2,3-4");
  metrics_cmd->add_option("--by", ma.by, "Grouping keys: domain correctness repetitive none")->capture_default_str();
  metrics_cmd->add_option("--meta-key", ma.meta_key, "Also group by this trace metadata key");

  SimulateArgs sa;
  auto* simulate_cmd = app.add_subcommand("simulate", "Decode table models and summarize the traces");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--vocab", sa.vocab, "Vocabulary size V")->capture_default_str();
  simulate_cmd->add_option("--length", sa.length, "Sequence length L")->capture_default_str();
  simulate_cmd->add_option("--block-size", sa.block_size, "Block size B (divides L)")->capture_default_str();
  simulate_cmd->add_option("--contexts", sa.contexts, "Number of random contexts")->capture_default_str();
  simulate_cmd->add_option("--samples", sa.samples, "Decodes per context")->capture_default_str();
  simulate_cmd->add_option("--concentration", sa.concentration, "Dirichlet concentration of the tables")
      ->capture_default_str();
  simulate_cmd->add_option("--mode", sa.mode, "threshold | accept_all | top1 | ar_baseline")->capture_default_str();
  simulate_cmd->add_option("--tau", sa.tau, "Confidence threshold for threshold mode")->capture_default_str();
  simulate_cmd->add_option("--choose", sa.choose, "greedy | sample")->capture_default_str();
  simulate_cmd->add_flag("--no-forced-progress", sa.no_forced_progress, "Fail instead of forcing one commit");
  simulate_cmd->add_option("--input", sa.input, "Model text file instead of random tables");

  VerifyArgs va;
  auto* verify_cmd = app.add_subcommand("verify-theory", "Run the property suites, or verify one chain");
  add_common(verify_cmd);
  verify_cmd->add_option("--k-max", va.k_max, "Contraction horizon")->capture_default_str();
  verify_cmd->add_option("--delta", va.deltas, "Mixing targets")->capture_default_str();
  verify_cmd->add_option("--input,--joint", va.joint, "Joint text file: verify a single chain on it");
  verify_cmd->add_option("--predictor", va.predictor, "full_conditional | mean_field")->capture_default_str();
  verify_cmd->add_option("--policy", va.policy, "threshold | top1 | full | random_scan | fixed:i,j")
      ->capture_default_str();
  verify_cmd->add_option("--tau", va.tau, "Editing threshold for the threshold policy")->capture_default_str();

  PuzzleArgs pa;
  auto* puzzle_cmd = app.add_subcommand("puzzle", "Generate and solve puzzles, emit solver traces");
  add_common(puzzle_cmd);
  puzzle_cmd->add_option("--kind", pa.kind, "sudoku | crossmath")->capture_default_str();
  puzzle_cmd->add_option("--count", pa.count, "Puzzles to generate")->capture_default_str();
  puzzle_cmd->add_option("--givens", pa.givens, "Sudoku givens target in [17, 80]")->capture_default_str();
  puzzle_cmd->add_option("--range", pa.range, "Cross-math numbers lie in [1, range]")->capture_default_str();
  puzzle_cmd->add_option("--input", pa.input, "Puzzle file to solve instead of generating");

  RuntimeArgs ra;
  auto* runtime_cmd = app.add_subcommand("runtime", "Editing-round / no-slowdown trade-off");
  add_common(runtime_cmd);
  runtime_cmd->add_option("--input", ra.input, "Runtime spec file (t_step, alpha, m0, d0 lines)");
  runtime_cmd->add_option("--alpha", ra.alpha, "Dobrushin coefficient when no spec file is given")
      ->capture_default_str();
  runtime_cmd->add_option("--m", ra.m, "Stage counts to evaluate")->capture_default_str();
  runtime_cmd->add_option("--m0", ra.m0, "Sequential baseline stage count")->capture_default_str();
  runtime_cmd->add_option("--delta", ra.delta, "Target TV accuracy")->capture_default_str();
  runtime_cmd->add_flag("--require-no-slowdown", ra.require_no_slowdown, "Exit nonzero if any m is slower");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  int family = 0;
  try {
    if (*metrics_cmd) {
      family = kMetrics;
      return run_metrics(common, ma);
    }
    if (*simulate_cmd) {
      family = kSimulate;
      return run_simulate(common, sa);
    }
    if (*verify_cmd) {
      family = kVerify;
      return run_verify(common, va);
    }
    if (*puzzle_cmd) {
      family = kPuzzle;
      return run_puzzle(common, pa);
    }
    family = kRuntime;
    return run_runtime(common, ra);
  } catch (const std::exception& e) {
    std::cerr << fmt::format("error: {}\n", e.what());
  }
  return family;
}
