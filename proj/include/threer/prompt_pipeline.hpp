#pragma once

#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "threer/clients.hpp"
#include "threer/relation_db.hpp"
#include "threer/templates.hpp"

namespace threer {

struct MergeStep {
  Modifier modifier;
  std::string description_after;

  json to_json() const {
    return json{{"modifier", modifier.to_json()}, {"description_after", description_after}};
  }
};

/// Loop state of the iterative merge: the description starts as the intent
/// alone and absorbs one modifier per chat call.
struct MergeState {
  std::string intent;
  std::string current_description;
  std::deque<Modifier> remaining;
  std::vector<MergeStep> applied;

  json to_json() const {
    json steps = json::array();
    for (const auto& s : applied) steps.push_back(s.to_json());
    return json{{"intent", intent}, {"merged", current_description}, {"steps", steps}};
  }
};

struct MergeOptions {
  double temperature = 0.2;
  std::optional<std::int64_t> seed;
  int max_tokens = 1024;
  std::string stage = "merge";
};

/// Issues exactly queue.size() sequential chat calls, each integrating one
/// modifier into the running description. An empty queue returns the intent
/// verbatim without any call.
inline MergeState merge_modifiers(ClientSession& session, const TemplateSet& templates,
                                  const std::string& intent, const std::vector<Modifier>& queue,
                                  const MergeOptions& opts = {}) {
  if (trim_copy(intent).empty()) throw PreconditionViolation("intent must be non-empty");
  MergeState state;
  state.intent = intent;
  state.current_description = intent;
  state.remaining.assign(queue.begin(), queue.end());

  std::size_t step_index = 0;
  while (!state.remaining.empty()) {
    Modifier mod = state.remaining.front();
    state.remaining.pop_front();
    ++step_index;

    ChatRequest req;
    req.system_prompt = templates.merge_system.text;
    req.user_message = render_template(templates.merge_user.text,
                                       {{"user_prompt", intent},
                                        {"description", state.current_description},
                                        {"modifier", mod.text}});
    req.temperature = opts.temperature;
    req.seed = opts.seed;
    req.max_tokens = opts.max_tokens;

    std::string response;
    try {
      response = session.complete(req, opts.stage);
    } catch (const ClientError& e) {
      throw e.with_context("merge step " + std::to_string(step_index));
    }
    std::string next = trim_copy(response);
    if (next.empty()) throw DescriptionCollapse(step_index);
    state.current_description = next;
    state.applied.push_back(MergeStep{std::move(mod), state.current_description});
  }
  return state;
}

/// The Appendix-style refinement prompt: system carries the ten rules, user
/// carries the few-shot block plus the substituted intent and description.
inline RenderedPrompt render_refinement_prompt(const TemplateSet& templates,
                                               const std::string& intent,
                                               const std::string& description) {
  if (intent.empty() || description.empty())
    throw PreconditionViolation("refinement prompt needs non-empty intent and description");
  return RenderedPrompt{
      templates.refine_system.text,
      render_template(templates.refine_user.text,
                      {{"user_prompt", intent}, {"description", description}})};
}

namespace detail {

inline std::string strip_list_numbering(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  std::size_t j = i;
  while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
  if (j > i && j < s.size() && (s[j] == '.' || s[j] == ')')) {
    ++j;
    while (j < s.size() && s[j] == ' ') ++j;
    return s.substr(j);
  }
  if (i < s.size() && (s[i] == '-' || s[i] == '*') && i + 1 < s.size() && s[i + 1] == ' ')
    return s.substr(i + 2);
  return s.substr(i);
}

inline bool starts_with_numbering(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  std::size_t j = i;
  while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
  return j > i && j < s.size() && (s[j] == '.' || s[j] == ')');
}

inline std::vector<std::string> try_json_array(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array()) return {};
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) return {};
    std::string s = trim_copy(item.get<std::string>());
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<std::string> try_fenced_json(const std::string& raw) {
  std::size_t open = raw.find("```");
  if (open == std::string::npos) return {};
  std::size_t body = raw.find('\n', open);
  if (body == std::string::npos) return {};
  std::size_t close = raw.find("```", body);
  if (close == std::string::npos) return {};
  return try_json_array(trim_copy(raw.substr(body + 1, close - body - 1)));
}

inline std::vector<std::string> split_blocks(const std::string& raw) {
  std::vector<std::vector<std::string>> blocks;
  std::vector<std::string> current;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t nl = raw.find('\n', pos);
    std::string line = raw.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    if (trim_copy(line).empty()) {
      if (!current.empty()) blocks.push_back(std::move(current));
      current = {};
    } else {
      current.push_back(trim_copy(line));
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  if (!current.empty()) blocks.push_back(std::move(current));

  // A single block of several numbered lines is a list in disguise.
  if (blocks.size() == 1 && blocks[0].size() >= 2) {
    bool all_numbered = true;
    for (const auto& line : blocks[0]) all_numbered = all_numbered && starts_with_numbering(line);
    if (all_numbered) {
      std::vector<std::vector<std::string>> split;
      for (const auto& line : blocks[0]) split.push_back({line});
      blocks = std::move(split);
    }
  }

  std::vector<std::string> out;
  for (const auto& block : blocks) {
    std::string joined;
    for (const auto& line : block) {
      std::string cleaned = &line == &block.front() ? strip_list_numbering(line) : line;
      if (!joined.empty()) joined += ' ';
      joined += cleaned;
    }
    joined = trim_copy(joined);
    if (!joined.empty()) out.push_back(std::move(joined));
  }
  return out;
}

}  // namespace detail

/// Parses an LLM completion into candidate strings, trying a bare JSON
/// array, then a fenced JSON array, then blank-line-separated blocks with
/// list numbering stripped. Results are truncated to at most n.
inline std::vector<std::string> parse_candidate_list(const std::string& raw, int n) {
  if (n < 1) throw PreconditionViolation("candidate count must be >= 1");
  std::string trimmed = trim_copy(raw);
  std::vector<std::string> out = detail::try_json_array(trimmed);
  if (out.empty()) out = detail::try_fenced_json(trimmed);
  if (out.empty()) out = detail::split_blocks(trimmed);
  if (out.empty())
    throw UnparseableCandidates(trimmed.substr(0, std::min<std::size_t>(trimmed.size(), 120)));
  if (out.size() > static_cast<std::size_t>(n)) out.resize(static_cast<std::size_t>(n));
  return out;
}

/// The N refined prompt variants plus their provenance. Exactly n candidates
/// always; shortfalls are padded with the merged description and flagged.
struct PromptCandidateSet {
  std::string intent;
  std::string merged;
  std::vector<std::string> candidates;
  std::vector<bool> padded;
  std::string retrieval_hash;

  std::size_t padded_count() const {
    std::size_t n = 0;
    for (bool p : padded) n += p;
    return n;
  }

  json to_json() const {
    return json{{"intent", intent},
                {"merged", merged},
                {"candidates", candidates},
                {"padded", padded},
                {"retrieval_hash", retrieval_hash}};
  }

  static PromptCandidateSet from_json(const json& j) {
    PromptCandidateSet s;
    s.intent = j.at("intent").get<std::string>();
    s.merged = j.at("merged").get<std::string>();
    s.candidates = j.at("candidates").get<std::vector<std::string>>();
    s.padded = j.at("padded").get<std::vector<bool>>();
    s.retrieval_hash = j.value("retrieval_hash", "");
    return s;
  }
};

struct RefineOptions {
  double temperature = 0.8;
  std::optional<std::int64_t> seed;
  int max_tokens = 1024;
  int repair_attempts = 2;
  std::string stage = "refine";
};

/// Asks for n distinct refined prompts in one completion; re-asks on parse
/// or count failure up to repair_attempts extra times, then pads with the
/// merged description. Throws RefinementFailure only when nothing at all
/// could be parsed out of any attempt.
inline PromptCandidateSet refine(ClientSession& session, const TemplateSet& templates,
                                 const std::string& intent, const std::string& merged, int n,
                                 const RefineOptions& opts = {}) {
  if (n < 1) throw PreconditionViolation("n must be >= 1");
  RenderedPrompt prompt = render_refinement_prompt(templates, intent, merged);

  std::vector<std::string> best;
  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt <= opts.repair_attempts; ++attempt) {
    ChatRequest req;
    req.system_prompt = prompt.system;
    req.user_message = prompt.user;
    req.temperature = opts.temperature;
    req.seed = opts.seed ? std::optional<std::int64_t>(*opts.seed + attempt) : std::nullopt;
    req.max_tokens = opts.max_tokens;
    std::string raw = session.complete(req, opts.stage);
    try {
      std::vector<std::string> parsed = parse_candidate_list(raw, n);
      if (parsed.size() > best.size()) best = std::move(parsed);
      if (best.size() == static_cast<std::size_t>(n)) break;
      last_error = "parsed only " + std::to_string(best.size()) + " of " + std::to_string(n);
    } catch (const UnparseableCandidates& e) {
      last_error = e.what();
    }
  }
  if (best.empty()) throw RefinementFailure(last_error);

  PromptCandidateSet set;
  set.intent = intent;
  set.merged = merged;
  set.candidates = std::move(best);
  set.padded.assign(set.candidates.size(), false);
  while (set.candidates.size() < static_cast<std::size_t>(n)) {
    set.candidates.push_back(merged);
    set.padded.push_back(true);
  }
  for (const auto& c : set.candidates) {
    if (c.find("{user_prompt}") != std::string::npos ||
        c.find("{description}") != std::string::npos) {
      throw RefinementFailure("candidate contains a template placeholder token");
    }
  }
  return set;
}

}  // namespace threer
