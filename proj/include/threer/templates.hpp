#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>

#include "threer/errors.hpp"
#include "threer/hash.hpp"
#include "threer/template_texts.hpp"

namespace threer {

struct PromptTemplate {
  std::string name;
  std::string text;
  std::string sha256;

  static PromptTemplate make(std::string name, std::string text) {
    std::string hash = sha256_hex(text);
    return PromptTemplate{std::move(name), std::move(text), std::move(hash)};
  }
};

struct RenderedPrompt {
  std::string system;
  std::string user;
};

/// Replaces every `{key}` token. Inputs that themselves contain one of the
/// tokens are rejected, so a clean render is guaranteed placeholder-free.
inline std::string render_template(const std::string& text,
                                   const std::map<std::string, std::string>& subs) {
  for (const auto& [key, value] : subs) {
    const std::string token = "{" + key + "}";
    if (value.find(token) != std::string::npos)
      throw PreconditionViolation("substitution value contains template token " + token);
  }
  std::string out = text;
  for (const auto& [key, value] : subs) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = out.find(token, pos)) != std::string::npos) {
      out.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  for (const auto& [key, _] : subs) {
    if (out.find("{" + key + "}") != std::string::npos)
      throw Error("template render left a placeholder behind: {" + key + "}");
  }
  return out;
}

/// The six prompt templates the pipeline speaks. The built-in set is
/// byte-identical to the files under templates/<version>/ (tests enforce
/// this); load_dir swaps in an alternative set.
struct TemplateSet {
  std::string version;
  PromptTemplate merge_system;
  PromptTemplate merge_user;
  PromptTemplate refine_system;
  PromptTemplate refine_user;
  PromptTemplate critique_system;
  PromptTemplate critique_user;

  static const TemplateSet& builtin() {
    static const TemplateSet set = [] {
      TemplateSet s;
      s.version = builtin::kTemplateVersion;
      s.merge_system = PromptTemplate::make("merge_system", builtin::kMergeSystemTemplate);
      s.merge_user = PromptTemplate::make("merge_user", builtin::kMergeUserTemplate);
      s.refine_system = PromptTemplate::make("refine_system", builtin::kRefineSystemTemplate);
      s.refine_user = PromptTemplate::make("refine_user", builtin::kRefineUserTemplate);
      s.critique_system = PromptTemplate::make("critique_system", builtin::kCritiqueSystemTemplate);
      s.critique_user = PromptTemplate::make("critique_user", builtin::kCritiqueUserTemplate);
      return s;
    }();
    return set;
  }

  static TemplateSet load_dir(const std::filesystem::path& dir) {
    TemplateSet s;
    s.version = dir.filename().string();
    s.merge_system = load_one(dir, "merge_system");
    s.merge_user = load_one(dir, "merge_user");
    s.refine_system = load_one(dir, "refine_system");
    s.refine_user = load_one(dir, "refine_user");
    s.critique_system = load_one(dir, "critique_system");
    s.critique_user = load_one(dir, "critique_user");
    return s;
  }

  /// Hashes of the active templates; these enter every run record and the
  /// stage-cache keys.
  json hashes() const {
    return json{{"version", version},
                {"merge_system", merge_system.sha256},
                {"merge_user", merge_user.sha256},
                {"refine_system", refine_system.sha256},
                {"refine_user", refine_user.sha256},
                {"critique_system", critique_system.sha256},
                {"critique_user", critique_user.sha256}};
  }

 private:
  static PromptTemplate load_one(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::path p = dir / (name + ".txt");
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot open template file: " + p.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.empty()) throw ValidationError("template file is empty: " + p.string());
    return PromptTemplate::make(name, std::move(text));
  }
};

}  // namespace threer
