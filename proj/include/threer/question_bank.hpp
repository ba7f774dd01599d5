#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "threer/errors.hpp"
#include "threer/hash.hpp"
#include "threer/template_texts.hpp"

namespace threer {

struct QuestionEntry {
  std::string question;
  double weight = 0.0;
  bool prompt_dependent = false;  // template contains "[prompt]"
};

/// The 29 weighted VQA questions. Only five (question, weight) pairs are
/// public; the shipped default carries those verbatim plus 24 zero-weighted
/// placeholders, so totals computed against it match the published numbers.
class QuestionBank {
 public:
  static constexpr std::size_t kQuestionCount = 29;

  static QuestionBank load_string(const std::string& bytes) {
    json j = json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw ValidationError("question bank is not valid JSON");
    if (!j.is_array()) throw ValidationError("question bank must be a JSON array");
    if (j.size() != kQuestionCount) throw WrongEntryCount(j.size());

    QuestionBank bank;
    json canonical = json::array();
    for (std::size_t i = 0; i < j.size(); ++i) {
      const json& item = j[i];
      if (!item.is_object() || !item.contains("question") || !item.contains("weight"))
        throw ValidationError("question bank entry " + std::to_string(i) +
                              " must be {\"question\", \"weight\"}");
      for (const auto& [key, _] : item.items()) {
        if (key != "question" && key != "weight")
          throw ValidationError("question bank entry " + std::to_string(i) + " has unknown key: " + key);
      }
      QuestionEntry entry;
      entry.question = item["question"].get<std::string>();
      if (trim_copy(entry.question).empty())
        throw ValidationError("question bank entry " + std::to_string(i) + " has empty question");
      if (!item["weight"].is_number()) throw NonFiniteWeight(i);
      entry.weight = item["weight"].get<double>();
      if (!std::isfinite(entry.weight)) throw NonFiniteWeight(i);
      entry.prompt_dependent = entry.question.find("[prompt]") != std::string::npos;
      canonical.push_back(json{{"question", entry.question}, {"weight", entry.weight}});
      bank.entries_.push_back(std::move(entry));
    }
    bank.bank_id_ = hash_json(canonical);
    return bank;
  }

  static QuestionBank load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open question bank file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_string(bytes);
  }

  static const QuestionBank& default_bank() {
    static const QuestionBank bank = load_string(builtin::kDefaultQuestionBankJson);
    return bank;
  }

  const std::vector<QuestionEntry>& entries() const { return entries_; }
  const QuestionEntry& entry(std::size_t i) const { return entries_.at(i); }

  /// Hash of the canonicalized (question, weight) pairs; identifies the bank
  /// in every score report.
  const std::string& bank_id() const { return bank_id_; }

 private:
  std::vector<QuestionEntry> entries_;
  std::string bank_id_;
};

/// Replaces every "[prompt]" occurrence in a question template. Templates
/// without the placeholder pass through unchanged.
inline std::string instantiate_question(const std::string& question_template,
                                        const std::string& prompt) {
  if (prompt.empty()) throw PreconditionViolation("prompt must be non-empty");
  static const std::string kToken = "[prompt]";
  std::string out;
  out.reserve(question_template.size() + prompt.size());
  std::size_t pos = 0;
  while (true) {
    std::size_t hit = question_template.find(kToken, pos);
    if (hit == std::string::npos) {
      out.append(question_template, pos, std::string::npos);
      break;
    }
    out.append(question_template, pos, hit - pos);
    out += prompt;
    pos = hit + kToken.size();
  }
  return out;
}

}  // namespace threer
