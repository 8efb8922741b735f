#include "deid/serialize.hpp"

#include <algorithm>

namespace deid {

using nlohmann::json;

namespace {

[[noreturn]] void bad_settings(const std::string& msg) { throw Error(ErrorCode::InvalidSettings, msg); }

EntityType require_type(const std::string& label) {
  auto t = parse_entity_type(label);
  if (!t) bad_settings("unknown entity type '" + label + "'");
  return *t;
}

std::string_view remote_name_label(RemoteModelName n) {
  return n == RemoteModelName::ClinicalBert ? "clinicalbert" : "biobert";
}

}  // namespace

json span_to_json(const EntitySpan& span) {
  return json{{"start", span.start},
              {"end", span.end},
              {"type", type_label(span.etype)},
              {"source", source_label(span.source)},
              {"text", span.surface}};
}

EntitySpan span_from_json(const json& j) {
  EntitySpan s;
  try {
    s.start = j.at("start").get<std::size_t>();
    s.end = j.at("end").get<std::size_t>();
    auto t = parse_entity_type(j.at("type").get<std::string>());
    if (!t) throw Error(ErrorCode::UnknownCategory, "unknown entity type " + j.at("type").dump());
    s.etype = *t;
    if (j.contains("source")) {
      auto src = parse_span_source(j.at("source").get<std::string>());
      if (!src) throw Error(ErrorCode::InvalidArgument, "unknown span source " + j.at("source").dump());
      s.source = *src;
    }
    s.surface = j.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed span JSON: ") + e.what());
  }
  return s;
}

json spans_to_json(const std::vector<EntitySpan>& spans) {
  json arr = json::array();
  for (const auto& s : spans) arr.push_back(span_to_json(s));
  return arr;
}

std::vector<EntitySpan> spans_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "span list must be a JSON array");
  std::vector<EntitySpan> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(span_from_json(e));
  return out;
}

json settings_to_json(const DeidSettings& s) {
  json actions = json::object();
  for (const auto& [t, a] : s.actions) actions[std::string(type_label(t))] = action_label(a);

  json model;
  if (s.model.kind == ModelSettings::Kind::Stub) {
    model = {{"kind", "stub"}};
  } else {
    model = {{"kind", "remote"},
             {"name", remote_name_label(s.model.remote_name)},
             {"url", s.model.url},
             {"timeout_ms", s.model.timeout_ms}};
  }

  json dicts = json::object();
  for (const auto& [t, entries] : s.custom_dictionaries) dicts[std::string(type_label(t))] = entries;

  return json{{"actions", actions},
              {"model", model},
              {"custom_dictionaries", dicts},
              {"rng_seed", s.rng_seed},
              {"risk_threshold", s.risk_threshold},
              {"context_radius_words", s.context_radius_words}};
}

DeidSettings settings_from_json(const json& j) {
  if (!j.is_object()) bad_settings("settings must be a JSON object");
  static const std::vector<std::string> known = {"actions",  "model", "custom_dictionaries", "rng_seed",
                                                 "risk_threshold", "context_radius_words"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) bad_settings("unknown settings key '" + key + "'");
  }

  DeidSettings s;
  try {
    if (j.contains("actions")) {
      const auto& a = j.at("actions");
      if (!a.is_object()) bad_settings("actions must be an object");
      for (const auto& [label, value] : a.items()) {
        auto t = require_type(label);
        auto act = parse_action(value.get<std::string>());
        if (!act) bad_settings("unknown action " + value.dump() + " for " + label);
        s.actions[t] = *act;
      }
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      const auto kind = m.at("kind").get<std::string>();
      if (kind == "stub") {
        s.model.kind = ModelSettings::Kind::Stub;
      } else if (kind == "remote") {
        s.model.kind = ModelSettings::Kind::Remote;
        const auto name = m.value("name", std::string("clinicalbert"));
        if (name == "clinicalbert") {
          s.model.remote_name = RemoteModelName::ClinicalBert;
        } else if (name == "biobert") {
          s.model.remote_name = RemoteModelName::BioBert;
        } else {
          bad_settings("unsupported remote model '" + name + "' (expected clinicalbert or biobert)");
        }
        s.model.url = m.value("url", std::string());
        s.model.timeout_ms = m.value("timeout_ms", 30000);
      } else {
        bad_settings("unknown model kind '" + kind + "'");
      }
    }
    if (j.contains("custom_dictionaries")) {
      const auto& d = j.at("custom_dictionaries");
      if (!d.is_object()) bad_settings("custom_dictionaries must be an object");
      for (const auto& [label, entries] : d.items()) {
        s.custom_dictionaries[require_type(label)] = entries.get<std::vector<std::string>>();
      }
    }
    if (j.contains("rng_seed")) {
      const auto& seed = j.at("rng_seed");
      if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
        bad_settings("rng_seed must be a non-negative integer");
      }
      s.rng_seed = seed.get<std::uint64_t>();
    }
    if (j.contains("risk_threshold")) {
      if (!j.at("risk_threshold").is_number()) bad_settings("risk_threshold must be a number");
      s.risk_threshold = j.at("risk_threshold").get<double>();
    }
    if (j.contains("context_radius_words")) {
      if (!j.at("context_radius_words").is_number_integer()) bad_settings("context_radius_words must be an integer");
      s.context_radius_words = j.at("context_radius_words").get<int>();
    }
  } catch (const json::exception& e) {
    bad_settings(std::string("malformed settings: ") + e.what());
  }
  s.validate();
  return s;
}

json masked_to_json(const MaskedDocument& m) {
  json map = json::array();
  for (const auto& e : m.span_map) {
    json entry{{"original", span_to_json(e.original)},
               {"masked", {{"start", e.masked_start}, {"end", e.masked_end}}},
               {"action", action_label(e.action)},
               {"replacement", e.replacement}};
    if (e.fallback) entry["fallback"] = true;
    map.push_back(std::move(entry));
  }
  json repl = json::array();
  for (const auto& [key, value] : m.replacement_map) {
    repl.push_back({{"type", type_label(key.first)}, {"text", key.second}, {"replacement", value}});
  }
  return json{{"doc_id", m.doc_id},
              {"seed", m.seed},
              {"masked_text", m.masked_text},
              {"span_map", map},
              {"replacement_map", repl}};
}

MaskedDocument masked_from_json(const json& j) {
  MaskedDocument m;
  try {
    m.doc_id = j.at("doc_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.masked_text = j.at("masked_text").get<std::string>();
    for (const auto& e : j.at("span_map")) {
      MaskedSpan ms;
      ms.original = span_from_json(e.at("original"));
      ms.masked_start = e.at("masked").at("start").get<std::size_t>();
      ms.masked_end = e.at("masked").at("end").get<std::size_t>();
      auto act = parse_action(e.at("action").get<std::string>());
      if (!act) throw Error(ErrorCode::InvalidArgument, "unknown action in span map");
      ms.action = *act;
      ms.replacement = e.at("replacement").get<std::string>();
      ms.fallback = e.value("fallback", false);
      m.span_map.push_back(std::move(ms));
    }
    for (const auto& e : j.at("replacement_map")) {
      auto t = parse_entity_type(e.at("type").get<std::string>());
      if (!t) throw Error(ErrorCode::UnknownCategory, "unknown type in replacement map");
      m.replacement_map[{*t, e.at("text").get<std::string>()}] = e.at("replacement").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed masked document JSON: ") + e.what());
  }
  return m;
}

std::string dump_pretty(const json& j) { return j.dump(2) + "\n"; }

}  // namespace deid
