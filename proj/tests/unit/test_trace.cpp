#include <sstream>

#include "doctest.h"
#include "dlab/error.hpp"
#include "dlab/rng.hpp"
#include "dlab/trace.hpp"

using namespace dlab;
using namespace dlab::trace;

namespace {

DecodingTrace make_trace(std::string id, std::vector<std::int64_t> blocks, std::vector<std::int64_t> steps,
                         StepScope scope = StepScope::global) {
  DecodingTrace t;
  t.sample_id = std::move(id);
  t.step_scope = scope;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    TraceToken tok;
    tok.position = k;
    tok.finalize_step = steps[k];
    tok.block_index = blocks[k];
    t.tokens.push_back(tok);
  }
  return t;
}

TraceCorpus parse(const std::string& text) {
  std::istringstream in(text);
  return parse_traces(in, "test");
}

}  // namespace

TEST_CASE("ingest: three-token trace is echoed") {
  const auto c = parse(
      R"({"sample_id":"a","step_scope":"global","tokens":[)"
      R"({"position":0,"finalize_step":1,"block_index":0},)"
      R"({"position":1,"finalize_step":2,"block_index":0},)"
      R"({"position":2,"finalize_step":3,"block_index":0}]})"
      "\n");
  REQUIRE(c.traces.size() == 1);
  CHECK(c.traces[0].tokens.size() == 3);
  CHECK(c.traces[0].steps() == std::vector<std::int64_t>{1, 2, 3});
  CHECK(c.traces[0].correctness == Correctness::unknown);
  CHECK_FALSE(c.traces[0].repetitive);
}

TEST_CASE("ingest: duplicate position is a validation error on the position field") {
  const std::string line =
      R"({"sample_id":"dup","step_scope":"global","tokens":[)"
      R"({"position":0,"finalize_step":1,"block_index":0},)"
      R"({"position":1,"finalize_step":2,"block_index":0},)"
      R"({"position":2,"finalize_step":3,"block_index":0},)"
      R"({"position":2,"finalize_step":4,"block_index":0}]})";
  try {
    parse(line + "\n");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "position");
    CHECK(e.subject() == "dup");
  }
}

TEST_CASE("ingest: per-block trace is accepted unchanged and round-trips") {
  const auto c = parse(
      R"({"sample_id":"pb","step_scope":"per_block","tokens":[)"
      R"({"position":0,"finalize_step":1,"block_index":0},)"
      R"({"position":1,"finalize_step":1,"block_index":0},)"
      R"({"position":2,"finalize_step":1,"block_index":1}]})"
      "\n");
  REQUIRE(c.traces.size() == 1);
  CHECK(c.traces[0] == make_trace("pb", {0, 0, 1}, {1, 1, 1}, StepScope::per_block));
  std::ostringstream out;
  emit_traces(out, c);
  CHECK(parse(out.str()).traces == c.traces);
}

TEST_CASE("ingest: malformed JSON names the line") {
  const std::string good =
      R"({"sample_id":"a","step_scope":"global","tokens":[{"position":0,"finalize_step":1,"block_index":0}]})";
  try {
    parse(good + "\n\n{not json\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("ingest: missing key, bad scope and zero step are rejected") {
  CHECK_THROWS_AS(parse(R"({"step_scope":"global","tokens":[]})" "\n"), ParseError);
  CHECK_THROWS_AS(parse(R"({"sample_id":"a","step_scope":"local","tokens":[]})" "\n"), ParseError);
  CHECK_THROWS_AS(
      parse(R"({"sample_id":"a","step_scope":"global","tokens":[{"position":0,"finalize_step":0,"block_index":0}]})"
            "\n"),
      ValidationError);
  CHECK_THROWS_AS(parse(R"({"sample_id":"a","step_scope":"global","tokens":[]})" "\n"), ValidationError);
}

TEST_CASE("ingest: optional keys, unknown keys and comments") {
  const auto c = parse(
      "# produced by a test\n"
      R"({"sample_id":"x","step_scope":"global","domain_tag":"math","correct":false,"repetitive":true,)"
      R"("extra":[1,2],"tokens":[{"position":0,"finalize_step":1,"block_index":0,"text":"a","label":"NOUN"}]})"
      "\n");
  const auto& t = c.traces.at(0);
  CHECK(t.domain_tag == "math");
  CHECK(t.correctness == Correctness::incorrect);
  CHECK(t.repetitive);
  CHECK(t.tokens[0].text == "a");
  CHECK(t.tokens[0].label == "NOUN");
}

TEST_CASE("validate: block order and global step overlap") {
  CHECK_THROWS_AS(validate(make_trace("a", {1, 0}, {1, 2})), ValidationError);
  CHECK_THROWS_AS(validate(make_trace("a", {0, 1}, {2, 2})), ValidationError);
  CHECK_NOTHROW(validate(make_trace("a", {0, 1}, {2, 2}, StepScope::per_block)));
  CHECK_NOTHROW(validate(make_trace("a", {0, 0, 1}, {2, 1, 3})));

  TraceCorpus corpus{{make_trace("a", {0}, {1}), make_trace("a", {0}, {1})}, ""};
  try {
    validate(corpus);
    FAIL("expected duplicate sample_id error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "sample_id");
  }
}

TEST_CASE("normalize_steps: worked offsets") {
  CHECK(normalize_steps(make_trace("a", {0, 0, 1, 1}, {1, 2, 1, 1}, StepScope::per_block)).steps() ==
        std::vector<std::int64_t>{1, 2, 3, 3});
  CHECK(normalize_steps(make_trace("a", {0, 1}, {2, 1}, StepScope::per_block)).steps() ==
        std::vector<std::int64_t>{2, 3});
  const auto single = make_trace("a", {0, 0, 0}, {3, 1, 2}, StepScope::per_block);
  CHECK(normalize_steps(single).steps() == single.steps());
  const auto global = make_trace("g", {0, 1}, {1, 2});
  CHECK(normalize_steps(global) == global);
  CHECK_THROWS_AS(normalize_steps(make_trace("a", {0, 1}, {1, 0}, StepScope::per_block)), ValidationError);
}

TEST_CASE("property: normalization is idempotent, order preserving and yields valid global traces") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    std::vector<std::int64_t> blocks;
    std::vector<std::int64_t> steps;
    std::int64_t b = 0;
    for (int k = 0; k < n; ++k) {
      if (k > 0 && std::uniform_int_distribution<int>(0, 3)(rng) == 0) b += std::uniform_int_distribution<int>(1, 2)(rng);
      blocks.push_back(b);
      steps.push_back(std::uniform_int_distribution<int>(1, 6)(rng));
    }
    const auto t = make_trace("r", blocks, steps, StepScope::per_block);
    const auto once = normalize_steps(t);
    CHECK(once.step_scope == StepScope::global);
    CHECK_NOTHROW(validate(once));
    CHECK(normalize_steps(once) == once);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (blocks[static_cast<std::size_t>(i)] != blocks[static_cast<std::size_t>(j)]) continue;
        const auto before = steps[static_cast<std::size_t>(i)] < steps[static_cast<std::size_t>(j)];
        const auto after = once.tokens[static_cast<std::size_t>(i)].finalize_step <
                           once.tokens[static_cast<std::size_t>(j)].finalize_step;
        CHECK(before == after);
      }
    }
  }
}

TEST_CASE("property: emit then ingest is the identity") {
  Rng rng(5);
  TraceCorpus corpus;
  for (int s = 0; s < 50; ++s) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    std::vector<std::int64_t> blocks(static_cast<std::size_t>(n), 0);
    std::vector<std::int64_t> steps;
    for (int k = 0; k < n; ++k) steps.push_back(k + 1);
    auto t = make_trace("s" + std::to_string(s), blocks, steps);
    if (s % 3 == 0) t.domain_tag = "code";
    if (s % 4 == 1) t.correctness = Correctness::correct;
    t.repetitive = s % 5 == 0;
    t.metadata["mode"] = s % 2 ? "top1" : "threshold";
    t.tokens[0].label = "ADJ";
    t.tokens[0].text = "w\"q";
    corpus.traces.push_back(t);
  }
  std::ostringstream out;
  emit_traces(out, corpus);
  CHECK(parse(out.str()).traces == corpus.traces);
}
