#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "threer/clients.hpp"
#include "threer/ranking.hpp"
#include "threer/templates.hpp"

namespace threer {

enum class CritiqueMetric { kATv, kCT, kFC, kQV };

inline const char* to_string(CritiqueMetric m) {
  switch (m) {
    case CritiqueMetric::kATv: return "A_TV";
    case CritiqueMetric::kCT: return "C_T";
    case CritiqueMetric::kFC: return "F_C";
    case CritiqueMetric::kQV: return "Q_V";
  }
  return "?";
}

inline CritiqueMetric critique_metric_from_string(const std::string& s) {
  if (s == "A_TV") return CritiqueMetric::kATv;
  if (s == "C_T") return CritiqueMetric::kCT;
  if (s == "F_C") return CritiqueMetric::kFC;
  if (s == "Q_V") return CritiqueMetric::kQV;
  throw CritiqueSchemaError("unknown metric: " + s);
}

struct CritiqueReport {
  std::string user_prompt_intent;
  CritiqueMetric metric = CritiqueMetric::kATv;
  int score = 0;  // 0..10
  std::string observation;
  std::string root_cause;
  std::string p_new;
  std::string meta_instruction;

  json to_json() const {
    return json{{"user_prompt_intent", user_prompt_intent},
                {"metric", to_string(metric)},
                {"score", score},
                {"observation", observation},
                {"root_cause", root_cause},
                {"p_new", p_new},
                {"meta_instruction", meta_instruction}};
  }
};

struct CritiqueLoopConfig {
  bool enabled = false;  // the ablation shows critique degrades alignment
  int max_iterations = 2;
  int accept_threshold = 7;
  bool rescore_guard = true;  // keep a regenerated video only if it scores strictly better
  double temperature = 0.2;

  void validate() const {
    if (max_iterations < 1) throw ValidationError("critique max_iterations must be >= 1");
    if (accept_threshold < 0 || accept_threshold > 10)
      throw ValidationError("critique accept_threshold must be in [0, 10]");
    if (temperature < 0.0) throw ValidationError("critique temperature must be >= 0");
  }

  json to_json() const {
    return json{{"enabled", enabled},
                {"max_iterations", max_iterations},
                {"accept_threshold", accept_threshold},
                {"rescore_guard", rescore_guard},
                {"temperature", temperature}};
  }

  static CritiqueLoopConfig from_json(const json& j) {
    CritiqueLoopConfig c;
    c.enabled = j.value("enabled", c.enabled);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.accept_threshold = j.value("accept_threshold", c.accept_threshold);
    c.rescore_guard = j.value("rescore_guard", c.rescore_guard);
    c.temperature = j.value("temperature", c.temperature);
    return c;
  }
};

/// Renders the dual-prompt analysis protocol with the UPI and DPO in place.
inline RenderedPrompt render_critique_prompt(const TemplateSet& templates, const std::string& upi,
                                             const std::string& dpo) {
  if (upi.empty() || dpo.empty())
    throw PreconditionViolation("critique prompt needs non-empty UPI and DPO");
  return RenderedPrompt{
      templates.critique_system.text,
      render_template(templates.critique_user.text,
                      {{"USER_PROMPT_INTENT", upi}, {"DESCRIPTION_PROMPT_OLD", dpo}})};
}

namespace detail {

inline std::string strip_code_fences(const std::string& raw) {
  std::string s = trim_copy(raw);
  if (s.rfind("```", 0) == 0) {
    std::size_t body = s.find('\n');
    if (body != std::string::npos) {
      std::size_t close = s.rfind("```");
      if (close > body) s = s.substr(body + 1, close - body - 1);
    }
  }
  return trim_copy(s);
}

inline const json& require_key(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw CritiqueSchemaError(std::string("missing field: ") + key);
  return j.at(key);
}

inline int parse_score(const json& j) {
  if (!j.is_number_integer()) throw CritiqueSchemaError("score must be an integer");
  int score = j.get<int>();
  if (score < 0 || score > 10)
    throw CritiqueSchemaError("score " + std::to_string(score) + " out of range [0, 10]");
  return score;
}

}  // namespace detail

/// Parses a critique completion. Accepts the strict output schema
/// ({"prompt_analysis", "prescription"}) and the transcript iteration shape
/// ({"description_prompt_old", "metrics", "prompt_new"}); optional code
/// fences are stripped first. Everything else is a CritiqueSchemaError.
inline CritiqueReport parse_critique(const std::string& raw) {
  const std::string body = detail::strip_code_fences(raw);
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw CritiqueSchemaError("not valid JSON");
  if (!j.is_object()) throw CritiqueSchemaError("top level must be a JSON object");

  CritiqueReport report;
  if (j.contains("prompt_analysis")) {
    const json& analysis = j.at("prompt_analysis");
    report.user_prompt_intent =
        analysis.is_object() ? analysis.value("user_prompt_intent", "") : "";
    const json& metrics = detail::require_key(analysis, "bottleneck_flaw_metrics");
    const json& metric = detail::require_key(metrics, "metric");
    if (!metric.is_string()) throw CritiqueSchemaError("metric must be a string");
    report.metric = critique_metric_from_string(metric.get<std::string>());
    report.score = detail::parse_score(detail::require_key(metrics, "score"));
    report.observation = metrics.value("observation", "");
    if (analysis.contains("diagnosis") && analysis["diagnosis"].is_object())
      report.root_cause = analysis["diagnosis"].value("root_cause", "");
    const json& prescription = detail::require_key(j, "prescription");
    const json& p_new = detail::require_key(prescription, "P_new");
    if (!p_new.is_string()) throw CritiqueSchemaError("P_new must be a string");
    report.p_new = p_new.get<std::string>();
    report.meta_instruction = prescription.value("meta_instruction", "");
  } else if (j.contains("metrics")) {
    const json& metrics = j.at("metrics");
    const json& metric = detail::require_key(metrics, "metric");
    if (!metric.is_string()) throw CritiqueSchemaError("metric must be a string");
    report.metric = critique_metric_from_string(metric.get<std::string>());
    report.score = detail::parse_score(detail::require_key(metrics, "score"));
    report.observation = metrics.value("observation", "");
    const json& p_new = detail::require_key(j, "prompt_new");
    if (!p_new.is_string()) throw CritiqueSchemaError("prompt_new must be a string");
    report.p_new = p_new.get<std::string>();
    report.user_prompt_intent = j.value("user_prompt", "");
  } else {
    throw CritiqueSchemaError("neither prompt_analysis nor metrics present");
  }

  if (trim_copy(report.p_new).empty()) throw CritiqueSchemaError("P_new is empty");
  return report;
}

struct CritiqueIteration {
  std::string description_prompt_old;
  CritiqueReport report;
  bool regenerated = false;
  bool kept_regenerated = false;
  double incumbent_total = 0.0;
  double regenerated_total = 0.0;  // meaningful only when regenerated

  json to_json() const {
    return json{{"description_prompt_old", description_prompt_old},
                {"report", report.to_json()},
                {"regenerated", regenerated},
                {"kept_regenerated", kept_regenerated},
                {"incumbent_total", incumbent_total},
                {"regenerated_total", regenerated_total}};
  }
};

struct CritiqueOutcome {
  VideoArtifact final_video;
  ScoreReport final_report;
  std::vector<CritiqueIteration> iterations;
  bool aborted = false;
  std::string abort_reason;

  /// The transcript shape used in run records:
  /// {"user_prompt": ..., "Iterations_k": {...}}.
  json transcript_json(const std::string& upi) const {
    json out{{"user_prompt", upi}};
    for (std::size_t i = 0; i < iterations.size(); ++i) {
      const CritiqueIteration& it = iterations[i];
      out["Iterations_" + std::to_string(i + 1)] =
          json{{"description_prompt_old", it.description_prompt_old},
               {"metrics",
                {{"metric", to_string(it.report.metric)},
                 {"score", it.report.score},
                 {"observation", it.report.observation}}},
               {"prompt_new", it.report.p_new}};
    }
    return out;
  }

  json to_json(const std::string& upi) const {
    json its = json::array();
    for (const auto& it : iterations) its.push_back(it.to_json());
    return json{{"final_video", final_video.to_json()},
                {"final_report", final_report.to_json()},
                {"iterations", its},
                {"aborted", aborted},
                {"abort_reason", abort_reason},
                {"transcript", transcript_json(upi)}};
  }
};

struct CritiqueDeps {
  const TemplateSet& templates;
  const QuestionBank& bank;
  std::optional<std::int64_t> seed;
  int max_tokens = 1024;
  std::string stage = "critique";
};

/// Runs at most max_iterations critique rounds on the selection winner.
/// Each round renders the dual-prompt protocol, parses the strict JSON, and
/// either stops (score >= accept_threshold) or regenerates with P_new. With
/// the rescore guard on, a regenerated video replaces the incumbent only
/// when its weighted total is strictly higher; turning the guard off
/// reproduces the unguarded regenerate-and-replace behavior. Schema or
/// client errors end the loop and keep the incumbent.
inline CritiqueOutcome critique_iterate(ClientSession& session, const CritiqueDeps& deps,
                                        const VideoArtifact& winner,
                                        const ScoreReport& winner_report, const std::string& upi,
                                        const std::string& dpo, const CritiqueLoopConfig& cfg) {
  if (!cfg.enabled) throw PreconditionViolation("critique loop invoked while disabled");
  cfg.validate();

  CritiqueOutcome outcome;
  outcome.final_video = winner;
  outcome.final_report = winner_report;
  std::string current_dpo = dpo;

  for (int iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
    RenderedPrompt prompt = render_critique_prompt(deps.templates, upi, current_dpo);
    ChatRequest req;
    req.system_prompt = prompt.system;
    req.user_message = prompt.user;
    req.temperature = cfg.temperature;
    req.seed = deps.seed ? std::optional<std::int64_t>(*deps.seed + iteration) : std::nullopt;
    req.max_tokens = deps.max_tokens;

    CritiqueIteration record;
    record.description_prompt_old = current_dpo;
    record.incumbent_total = outcome.final_report.weighted_total;
    try {
      record.report = parse_critique(session.complete(req, deps.stage));
    } catch (const BackendError& e) {
      outcome.aborted = true;
      outcome.abort_reason = e.what();
      break;
    }

    if (record.report.score >= cfg.accept_threshold) {
      outcome.iterations.push_back(std::move(record));
      break;
    }

    try {
      GenParams params;
      params.seed = deps.seed ? std::optional<std::int64_t>(*deps.seed + 0x1000 + iteration)
                              : std::optional<std::int64_t>(0x1000 + iteration);
      VideoArtifact regen = session.generate_video(record.report.p_new, params, deps.stage);
      ScoreReport regen_report = score_video(session, regen, upi, deps.bank,
                                             winner_report.candidate_index, deps.stage);
      record.regenerated = true;
      record.regenerated_total = regen_report.weighted_total;
      const bool adopt =
          !cfg.rescore_guard || regen_report.weighted_total > outcome.final_report.weighted_total;
      if (adopt) {
        outcome.final_video = regen;
        outcome.final_report = std::move(regen_report);
        record.kept_regenerated = true;
      }
    } catch (const BackendError& e) {
      outcome.aborted = true;
      outcome.abort_reason = e.what();
      outcome.iterations.push_back(std::move(record));
      break;
    }

    current_dpo = record.report.p_new;  // the next round critiques the new prompt
    outcome.iterations.push_back(std::move(record));
  }
  return outcome;
}

}  // namespace threer
