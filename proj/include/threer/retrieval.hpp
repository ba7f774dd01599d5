#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <unordered_set>
#include <vector>

#include "threer/clients.hpp"
#include "threer/relation_db.hpp"

namespace threer {

struct RetrievalConfig {
  double tau = 0.5;
  int top_k = 3;
  int max_scenes = 8;

  void validate() const {
    if (tau < -1.0 || tau > 1.0) throw ValidationError("tau must be in [-1, 1]");
    if (top_k < 1) throw ValidationError("top_k must be >= 1");
    if (max_scenes < 1) throw ValidationError("max_scenes must be >= 1");
  }

  json to_json() const {
    return json{{"tau", tau}, {"top_k", top_k}, {"max_scenes", max_scenes}};
  }
};

struct RetrievedMatch {
  int scene_index = 0;
  double similarity = 0.0;
  std::vector<Modifier> selected_modifiers;

  json to_json() const {
    json mods = json::array();
    for (const auto& m : selected_modifiers) mods.push_back(m.to_json());
    return json{{"scene_index", scene_index},
                {"similarity", similarity},
                {"selected_modifiers", mods}};
  }

  static RetrievedMatch from_json(const json& j) {
    RetrievedMatch m;
    m.scene_index = j.at("scene_index").get<int>();
    m.similarity = j.at("similarity").get<double>();
    for (const auto& mj : j.at("selected_modifiers")) m.selected_modifiers.push_back(Modifier::from_json(mj));
    return m;
  }
};

/// Scenes whose similarity to the intent strictly exceeds tau, ordered by
/// (similarity descending, scene_index ascending).
struct RetrievedContext {
  std::vector<RetrievedMatch> matches;
  EmbeddingVector intent_embedding;

  json to_json() const {
    json ms = json::array();
    for (const auto& m : matches) ms.push_back(m.to_json());
    return json{{"matches", ms}, {"intent_embedding", intent_embedding.to_json()}};
  }

  static RetrievedContext from_json(const json& j) {
    RetrievedContext ctx{{}, EmbeddingVector::from_json(j.at("intent_embedding"))};
    for (const auto& mj : j.at("matches")) ctx.matches.push_back(RetrievedMatch::from_json(mj));
    return ctx;
  }
};

/// Eq.-1 style thresholded scan with per-scene top-k modifier selection.
/// Scenes lacking a precomputed embedding are embedded through the session
/// (and land in its cache). Ties on similarity break toward the lower index.
inline RetrievedContext retrieve(const std::string& intent, const RelationDatabase& db,
                                 const RetrievalConfig& cfg, ClientSession& session,
                                 const std::string& stage = "") {
  cfg.validate();
  if (trim_copy(intent).empty()) throw PreconditionViolation("intent must be non-empty");
  if (db.size() == 0) throw PreconditionViolation("relation database is empty");

  EmbeddingVector intent_vec = session.embed(intent, stage);

  std::vector<RetrievedMatch> matches;
  for (std::size_t i = 0; i < db.size(); ++i) {
    const SceneEntry& scene = db.scene(i);
    const EmbeddingVector scene_vec =
        scene.embedding ? *scene.embedding : session.embed(scene.scene_text, stage);
    double sim = cosine_similarity(intent_vec, scene_vec);
    if (!(sim > cfg.tau)) continue;  // strict inequality: tau = 1.0 matches nothing

    RetrievedMatch m;
    m.scene_index = static_cast<int>(i);
    m.similarity = sim;
    for (ModifierCategory cat : {ModifierCategory::kSubject, ModifierCategory::kAction,
                                 ModifierCategory::kEnvironment}) {
      const auto& list = scene.by_category(cat);
      const std::size_t take = std::min<std::size_t>(list.size(), static_cast<std::size_t>(cfg.top_k));
      for (std::size_t k = 0; k < take; ++k) m.selected_modifiers.push_back(list[k]);
    }
    matches.push_back(std::move(m));
  }

  std::sort(matches.begin(), matches.end(), [](const RetrievedMatch& a, const RetrievedMatch& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.scene_index < b.scene_index;
  });
  if (matches.size() > static_cast<std::size_t>(cfg.max_scenes))
    matches.resize(static_cast<std::size_t>(cfg.max_scenes));

  return RetrievedContext{std::move(matches), std::move(intent_vec)};
}

inline std::string ascii_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Concatenates selected modifiers in match order and drops case-insensitive
/// duplicate texts, keeping the first occurrence. This is the merge queue.
inline std::vector<Modifier> flatten_modifiers(const RetrievedContext& ctx) {
  std::vector<Modifier> out;
  std::unordered_set<std::string> seen;
  for (const auto& match : ctx.matches) {
    for (const auto& mod : match.selected_modifiers) {
      if (seen.insert(ascii_lower(mod.text)).second) out.push_back(mod);
    }
  }
  return out;
}

}  // namespace threer
