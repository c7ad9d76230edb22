#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "dlab/error.hpp"
#include "dlab/trace.hpp"
#include "json.hpp"

namespace dlab::trace {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("trace-model", line, std::string("missing required key \"") + key + "\"");
  return *it;
}

std::int64_t as_int(const json& v, const char* key, std::size_t line) {
  if (!v.is_number_integer()) throw ParseError("trace-model", line, std::string("\"") + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

std::string as_string(const json& v, const char* key, std::size_t line) {
  if (!v.is_string()) throw ParseError("trace-model", line, std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const char* key, std::size_t line) {
  if (!v.is_boolean()) throw ParseError("trace-model", line, std::string("\"") + key + "\" must be a boolean");
  return v.get<bool>();
}

DecodingTrace parse_record(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError("trace-model", line, "record must be a JSON object");
  DecodingTrace t;
  t.sample_id = as_string(require(obj, "sample_id", line), "sample_id", line);

  const auto scope = as_string(require(obj, "step_scope", line), "step_scope", line);
  if (scope == "global") {
    t.step_scope = StepScope::global;
  } else if (scope == "per_block") {
    t.step_scope = StepScope::per_block;
  } else {
    throw ParseError("trace-model", line, "\"step_scope\" must be \"global\" or \"per_block\"");
  }

  const auto& tokens = require(obj, "tokens", line);
  if (!tokens.is_array()) throw ParseError("trace-model", line, "\"tokens\" must be an array");
  for (const auto& tj : tokens) {
    if (!tj.is_object()) throw ParseError("trace-model", line, "token entries must be objects");
    TraceToken tok;
    const auto pos = as_int(require(tj, "position", line), "position", line);
    if (pos < 0) throw ValidationError("trace-model", t.sample_id, "position", "must be non-negative");
    tok.position = static_cast<std::size_t>(pos);
    tok.finalize_step = as_int(require(tj, "finalize_step", line), "finalize_step", line);
    tok.block_index = as_int(require(tj, "block_index", line), "block_index", line);
    if (auto it = tj.find("text"); it != tj.end() && !it->is_null()) tok.text = as_string(*it, "text", line);
    if (auto it = tj.find("label"); it != tj.end() && !it->is_null()) tok.label = as_string(*it, "label", line);
    t.tokens.push_back(std::move(tok));
  }
  std::stable_sort(t.tokens.begin(), t.tokens.end(),
                   [](const TraceToken& a, const TraceToken& b) { return a.position < b.position; });

  if (auto it = obj.find("domain_tag"); it != obj.end() && !it->is_null()) {
    t.domain_tag = as_string(*it, "domain_tag", line);
  }
  if (auto it = obj.find("correct"); it != obj.end() && !it->is_null()) {
    t.correctness = as_bool(*it, "correct", line) ? Correctness::correct : Correctness::incorrect;
  }
  if (auto it = obj.find("repetitive"); it != obj.end() && !it->is_null()) {
    t.repetitive = as_bool(*it, "repetitive", line);
  }
  if (auto it = obj.find("metadata"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError("trace-model", line, "\"metadata\" must be an object");
    for (const auto& [k, v] : it->items()) t.metadata[k] = as_string(v, "metadata", line);
  }
  return t;
}

}  // namespace

TraceCorpus parse_traces(std::istream& in, std::string provenance) {
  TraceCorpus corpus{{}, std::move(provenance)};
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError("trace-model", line, std::string("malformed JSON: ") + e.what());
    }
    auto t = parse_record(obj, line);
    validate(t);
    corpus.traces.push_back(std::move(t));
  }
  validate(corpus);
  return corpus;
}

TraceCorpus ingest_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("trace-model", 0, "cannot open " + path.string());
  return parse_traces(in, path.string());
}

std::string to_json_line(const DecodingTrace& t) {
  ordered_json obj;
  obj["sample_id"] = t.sample_id;
  obj["step_scope"] = to_string(t.step_scope);
  if (t.domain_tag) obj["domain_tag"] = *t.domain_tag;
  if (t.correctness != Correctness::unknown) obj["correct"] = (t.correctness == Correctness::correct);
  obj["repetitive"] = t.repetitive;
  if (!t.metadata.empty()) {
    ordered_json meta = ordered_json::object();
    for (const auto& [k, v] : t.metadata) meta[k] = v;
    obj["metadata"] = std::move(meta);
  }
  ordered_json tokens = ordered_json::array();
  for (const auto& tok : t.tokens) {
    ordered_json tj;
    tj["position"] = tok.position;
    tj["finalize_step"] = tok.finalize_step;
    tj["block_index"] = tok.block_index;
    if (tok.text) tj["text"] = *tok.text;
    if (tok.label) tj["label"] = *tok.label;
    tokens.push_back(std::move(tj));
  }
  obj["tokens"] = std::move(tokens);
  return obj.dump();
}

void emit_traces(std::ostream& out, const TraceCorpus& corpus) {
  for (const auto& t : corpus.traces) out << to_json_line(t) << '\n';
}

}  // namespace dlab::trace
