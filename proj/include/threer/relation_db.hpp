#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "threer/embedding.hpp"
#include "threer/errors.hpp"

namespace threer {

enum class ModifierCategory { kSubject, kAction, kEnvironment };

inline const char* to_string(ModifierCategory c) {
  switch (c) {
    case ModifierCategory::kSubject: return "subject";
    case ModifierCategory::kAction: return "action";
    case ModifierCategory::kEnvironment: return "environment";
  }
  return "unknown";
}

inline ModifierCategory modifier_category_from_string(const std::string& s) {
  if (s == "subject") return ModifierCategory::kSubject;
  if (s == "action") return ModifierCategory::kAction;
  if (s == "environment") return ModifierCategory::kEnvironment;
  throw ValidationError("unknown modifier category: " + s);
}

/// One descriptive fragment attached to a scene (text is always trimmed and
/// non-empty).
struct Modifier {
  std::string text;
  ModifierCategory category;

  json to_json() const { return json{{"text", text}, {"category", to_string(category)}}; }

  static Modifier from_json(const json& j) {
    return make_modifier(j.at("text").get<std::string>(),
                         modifier_category_from_string(j.at("category").get<std::string>()));
  }

  static Modifier make_modifier(const std::string& text, ModifierCategory category) {
    std::string trimmed = trim_copy(text);
    if (trimmed.empty()) throw ValidationError("modifier text is empty");
    return Modifier{trimmed, category};
  }
};

/// A retrieval corpus entry: scene text plus its categorized modifier lists.
/// Category lists may be empty but their union never is.
struct SceneEntry {
  std::string scene_text;
  std::vector<Modifier> subjects;
  std::vector<Modifier> actions;
  std::vector<Modifier> environments;
  std::optional<EmbeddingVector> embedding;

  const std::vector<Modifier>& by_category(ModifierCategory c) const {
    switch (c) {
      case ModifierCategory::kSubject: return subjects;
      case ModifierCategory::kAction: return actions;
      case ModifierCategory::kEnvironment: return environments;
    }
    return subjects;
  }

  std::size_t modifier_count() const {
    return subjects.size() + actions.size() + environments.size();
  }
};

/// Immutable after load; safe to share across threads.
class RelationDatabase {
 public:
  /// Parses the JSON-Lines format: one object per line with keys
  /// {"scene", "subjects", "actions", "environments", "embedding"?}.
  /// Unknown keys are rejected. Blank lines are skipped. When
  /// `expected_dim` is given, precomputed embeddings must match it.
  static RelationDatabase load(std::istream& in, std::optional<std::size_t> expected_dim = {}) {
    RelationDatabase db;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim_copy(line).empty()) continue;
      db.scenes_.push_back(parse_line(line, line_no, expected_dim));
    }
    if (db.scenes_.empty()) throw EmptyDatabase();
    db.content_hash_ = hash_json(db.to_content_json());
    return db;
  }

  static RelationDatabase load_string(const std::string& text,
                                      std::optional<std::size_t> expected_dim = {}) {
    std::istringstream in(text);
    return load(in, expected_dim);
  }

  static RelationDatabase load_file(const std::string& path,
                                    std::optional<std::size_t> expected_dim = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open relation database file: " + path);
    return load(in, expected_dim);
  }

  std::size_t size() const { return scenes_.size(); }
  const SceneEntry& scene(std::size_t i) const { return scenes_.at(i); }
  const std::vector<SceneEntry>& scenes() const { return scenes_; }

  /// Hash over scene content (embeddings excluded): the identity of the
  /// corpus for run keys, stable whether or not embeddings were precomputed.
  const std::string& content_hash() const { return content_hash_; }

 private:
  static SceneEntry parse_line(const std::string& line, std::size_t line_no,
                               std::optional<std::size_t> expected_dim) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedRecord(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw MalformedRecord(line_no, "record is not a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (key != "scene" && key != "subjects" && key != "actions" && key != "environments" &&
          key != "embedding") {
        throw MalformedRecord(line_no, "unknown key: " + key);
      }
    }
    if (!j.contains("scene") || !j["scene"].is_string())
      throw MalformedRecord(line_no, "missing string field: scene");

    SceneEntry entry;
    entry.scene_text = trim_copy(j["scene"].get<std::string>());
    if (entry.scene_text.empty()) throw MalformedRecord(line_no, "empty scene_text");

    entry.subjects = parse_modifiers(j, "subjects", ModifierCategory::kSubject, line_no);
    entry.actions = parse_modifiers(j, "actions", ModifierCategory::kAction, line_no);
    entry.environments = parse_modifiers(j, "environments", ModifierCategory::kEnvironment, line_no);
    if (entry.modifier_count() == 0)
      throw MalformedRecord(line_no, "scene carries no modifiers in any category");

    if (j.contains("embedding")) {
      try {
        entry.embedding = EmbeddingVector::from_json(j["embedding"]);
      } catch (const ValidationError& e) {
        throw MalformedRecord(line_no, e.what());
      }
      if (expected_dim && entry.embedding->dim() != *expected_dim) {
        throw MalformedRecord(line_no, "embedding dimension " +
                                           std::to_string(entry.embedding->dim()) +
                                           " does not match backend dimension " +
                                           std::to_string(*expected_dim));
      }
    }
    return entry;
  }

  static std::vector<Modifier> parse_modifiers(const json& j, const char* key,
                                               ModifierCategory category, std::size_t line_no) {
    std::vector<Modifier> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) throw MalformedRecord(line_no, std::string(key) + " must be an array");
    for (const auto& item : j[key]) {
      if (!item.is_string())
        throw MalformedRecord(line_no, std::string(key) + " must contain only strings");
      std::string text = trim_copy(item.get<std::string>());
      if (text.empty())
        throw MalformedRecord(line_no, std::string("empty modifier text in ") + key);
      out.push_back(Modifier{text, category});
    }
    return out;
  }

  json to_content_json() const {
    json arr = json::array();
    for (const auto& s : scenes_) {
      json mods = json::array();
      for (const auto& list : {&s.subjects, &s.actions, &s.environments})
        for (const auto& m : *list) mods.push_back(m.to_json());
      arr.push_back(json{{"scene", s.scene_text}, {"modifiers", mods}});
    }
    return arr;
  }

  std::vector<SceneEntry> scenes_;
  std::string content_hash_;
};

}  // namespace threer
