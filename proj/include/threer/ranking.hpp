#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "threer/clients.hpp"
#include "threer/question_bank.hpp"

namespace threer {

/// Per-question answers and the weighted total for one video candidate.
struct ScoreReport {
  int candidate_index = 0;
  std::vector<VqaAnswer> answers;
  double weighted_total = 0.0;
  std::string bank_id;
  std::vector<double> latencies_ms;

  /// Deterministic content for stage hashes: latencies excluded.
  json fingerprint_json() const {
    json ans = json::array();
    for (const auto& a : answers) ans.push_back(a.to_json());
    return json{{"candidate_index", candidate_index},
                {"answers", ans},
                {"weighted_total", weighted_total},
                {"bank_id", bank_id}};
  }

  json to_json() const {
    json j = fingerprint_json();
    j["latencies_ms"] = latencies_ms;
    return j;
  }

  static ScoreReport from_json(const json& j) {
    ScoreReport r;
    r.candidate_index = j.at("candidate_index").get<int>();
    for (const auto& a : j.at("answers")) r.answers.push_back(VqaAnswer::from_json(a));
    r.weighted_total = j.at("weighted_total").get<double>();
    r.bank_id = j.at("bank_id").get<std::string>();
    if (j.contains("latencies_ms")) r.latencies_ms = j["latencies_ms"].get<std::vector<double>>();
    return r;
  }
};

/// Fixed left-to-right fold over question index order, so the total does not
/// depend on answer completion order.
inline double weighted_total(const QuestionBank& bank, const std::vector<VqaAnswer>& answers) {
  double total = 0.0;
  for (std::size_t i = 0; i < answers.size(); ++i)
    total += bank.entry(i).weight * answers[i].score;
  return total;
}

/// Asks all 29 questions about one video and folds the weighted total.
/// Any client error aborts the whole report; no partial totals escape.
inline ScoreReport score_video(ClientSession& session, const VideoArtifact& video,
                               const std::string& prompt, const QuestionBank& bank,
                               int candidate_index = 0, const std::string& stage = "score") {
  ScoreReport report;
  report.candidate_index = candidate_index;
  report.bank_id = bank.bank_id();
  report.answers.reserve(QuestionBank::kQuestionCount);
  for (std::size_t i = 0; i < bank.entries().size(); ++i) {
    const std::string question = instantiate_question(bank.entry(i).question, prompt);
    auto start = std::chrono::steady_clock::now();
    VqaAnswer answer = session.answer_question(video, static_cast<int>(i), question, stage);
    report.latencies_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count());
    report.answers.push_back(answer);
  }
  report.weighted_total = weighted_total(bank, report.answers);
  return report;
}

struct SelectionResult {
  int winner_index = 0;
  std::vector<ScoreReport> reports;
  bool tie_broken = false;

  json to_json() const {
    json rs = json::array();
    for (const auto& r : reports) rs.push_back(r.to_json());
    return json{{"winner_index", winner_index}, {"reports", rs}, {"tie_broken", tie_broken}};
  }

  json fingerprint_json() const {
    json rs = json::array();
    for (const auto& r : reports) rs.push_back(r.fingerprint_json());
    return json{{"winner_index", winner_index}, {"reports", rs}, {"tie_broken", tie_broken}};
  }

  static SelectionResult from_json(const json& j) {
    SelectionResult s;
    s.winner_index = j.at("winner_index").get<int>();
    s.tie_broken = j.at("tie_broken").get<bool>();
    for (const auto& r : j.at("reports")) s.reports.push_back(ScoreReport::from_json(r));
    return s;
  }
};

/// Argmax over weighted totals. Ties resolve to the lowest candidate index
/// regardless of report order; indices travel with the reports.
inline SelectionResult select_best(std::vector<ScoreReport> reports) {
  if (reports.empty()) throw PreconditionViolation("select_best needs at least one report");
  for (const auto& r : reports)
    if (r.bank_id != reports.front().bank_id) throw MixedBanks();

  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const bool better = reports[i].weighted_total > reports[best].weighted_total ||
                        (reports[i].weighted_total == reports[best].weighted_total &&
                         reports[i].candidate_index < reports[best].candidate_index);
    if (better) best = i;
  }
  SelectionResult result;
  result.winner_index = reports[best].candidate_index;
  result.tie_broken = false;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i != best && reports[i].weighted_total == reports[best].weighted_total)
      result.tie_broken = true;
  }
  result.reports = std::move(reports);
  return result;
}

}  // namespace threer
