#pragma once

#include <string>
#include <vector>

#include "threer/hash.hpp"

namespace threer {

/// One completed pipeline stage. `source` says how the output came to be:
/// "executed" (backends ran), "cache" (stage cache hit), or "restored"
/// (reused from a partial run record during resume). `payload` is the full
/// stage output; `output_hash` covers it with volatile fields stripped.
struct StageRecord {
  std::string name;
  std::string input_hash;
  std::string output_hash;
  double wall_ms = 0.0;
  std::string source = "executed";
  json calls = json::array();
  json payload;

  json to_json() const {
    return json{{"name", name},          {"input_hash", input_hash},
                {"output_hash", output_hash}, {"wall_ms", wall_ms},
                {"source", source},      {"calls", calls},
                {"payload", payload}};
  }

  static StageRecord from_json(const json& j) {
    StageRecord s;
    s.name = j.at("name").get<std::string>();
    s.input_hash = j.at("input_hash").get<std::string>();
    s.output_hash = j.at("output_hash").get<std::string>();
    s.wall_ms = j.value("wall_ms", 0.0);
    s.source = j.value("source", "executed");
    s.calls = j.value("calls", json::array());
    s.payload = j.at("payload");
    return s;
  }
};

/// Append-only ledger of one pipeline run: configuration identity, one entry
/// per completed stage, and the final artifact. Written back to disk after
/// every stage so an interrupted run can resume.
struct RunRecord {
  std::string schema_version = "1";
  std::string run_id;
  std::string created_at;
  std::string intent;
  json config;
  std::string config_hash;
  json config_provenance = json::object();
  std::string db_hash;
  std::string bank_id;
  json template_hashes;
  json backend_ids;
  bool resumed = false;
  std::vector<StageRecord> stages;
  json summary;     // winner index and totals; null until selection ran
  json final_info;  // final artifact metadata; null until the run completed

  bool complete() const { return !final_info.is_null(); }

  const StageRecord* find_stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }

  std::vector<std::string> stage_names() const {
    std::vector<std::string> names;
    names.reserve(stages.size());
    for (const auto& s : stages) names.push_back(s.name);
    return names;
  }

  json to_json() const {
    json stage_arr = json::array();
    for (const auto& s : stages) stage_arr.push_back(s.to_json());
    return json{{"schema_version", schema_version},
                {"run_id", run_id},
                {"created_at", created_at},
                {"intent", intent},
                {"config", config},
                {"config_hash", config_hash},
                {"config_provenance", config_provenance},
                {"db_hash", db_hash},
                {"bank_id", bank_id},
                {"template_hashes", template_hashes},
                {"backend_ids", backend_ids},
                {"resumed", resumed},
                {"stages", stage_arr},
                {"summary", summary},
                {"final", final_info}};
  }

  static RunRecord from_json(const json& j) {
    RunRecord r;
    r.schema_version = j.value("schema_version", "1");
    r.run_id = j.at("run_id").get<std::string>();
    r.created_at = j.value("created_at", "");
    r.intent = j.at("intent").get<std::string>();
    r.config = j.at("config");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config_provenance = j.value("config_provenance", json::object());
    r.db_hash = j.at("db_hash").get<std::string>();
    r.bank_id = j.at("bank_id").get<std::string>();
    r.template_hashes = j.at("template_hashes");
    r.backend_ids = j.at("backend_ids");
    r.resumed = j.value("resumed", false);
    for (const auto& s : j.at("stages")) r.stages.push_back(StageRecord::from_json(s));
    r.summary = j.value("summary", json());
    r.final_info = j.value("final", json());
    return r;
  }
};

}  // namespace threer
