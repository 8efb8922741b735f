#include "deid/service.hpp"

#include "deid/serialize.hpp"

#include <httplib.h>

#include <algorithm>

namespace deid {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<EntitySpan> apply_directives(const std::vector<EntitySpan>& merged, const RemovalDirectives& d) {
  if (d.empty()) return merged;
  std::map<std::pair<std::string, EntityType>, std::size_t> seen;
  std::vector<EntitySpan> out;
  for (const auto& s : merged) {
    const auto k = seen[{s.surface, s.etype}]++;
    if (d.one.count({s.surface, s.etype, k})) continue;
    if (d.all.count({normalize_surface(s.surface), s.etype})) continue;
    out.push_back(s);
  }
  return out;
}

struct Service::Session {
  std::mutex mutex;
  std::string id;
  std::optional<DeidSettings> settings;
  std::vector<Document> documents;
  std::vector<FileError> upload_errors;
  std::map<EntityType, std::vector<std::string>> manual;
  std::map<std::string, RemovalDirectives> directives;
  std::map<std::string, std::vector<EntitySpan>> merged;  // before suppression
  std::optional<BatchResult> result;
};

Service::Service(Resources resources, ServiceConfig config)
    : resources_(std::move(resources)), config_(std::move(config)) {
  if (config_.page_size == 0) throw Error(ErrorCode::InvalidArgument, "page size must be positive");
}

Service::~Service() = default;

Service::Session& Service::session(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  auto& slot = sessions_[id];
  if (!slot) {
    slot = std::make_unique<Session>();
    slot->id = id;
    const auto path = config_.store_dir / id / "settings.json";
    if (fs::exists(path)) {
      try {
        slot->settings = settings_from_json(json::parse(read_file(path)));
      } catch (const std::exception&) {
        // A corrupt file is treated as "no settings saved".
      }
    }
  }
  return *slot;
}

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const HttpError& e) {
  send_json(res, e.status, {{"error", e.code}, {"message", e.message}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSettings:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownCategory:
      return 400;
    case ErrorCode::EndpointUnreachable:
    case ErrorCode::MalformedResponse:
    case ErrorCode::SequenceTooLong:
      return 502;
    case ErrorCode::InvalidUtf8:
    case ErrorCode::XmlMalformed:
    case ErrorCode::MissingTextElement:
    case ErrorCode::MultipleTextElements:
      return 422;
    default:
      return 500;
  }
}

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '-' || c == '_'; });
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw HttpError{400, "InvalidJson", e.what()};
  }
}

json letter_json(const DocumentResult& r) {
  auto j = document_result_json(r);
  j["file_name"] = r.document.file_name();
  j["original_text"] = r.document.text();
  j["masked_text"] = r.masked.masked_text;
  return j;
}

const DocumentResult* find_result(const BatchResult& batch, const std::string& doc_id) {
  for (const auto& d : batch.documents) {
    if (d.document.id() == doc_id) return &d;
  }
  return nullptr;
}

json errors_json(const std::vector<FileError>& errors) {
  json arr = json::array();
  for (const auto& e : errors) arr.push_back({{"file", e.file_name}, {"message", e.message}});
  return arr;
}

}  // namespace

void Service::register_routes(httplib::Server& server) {
  // Wraps a handler with session lookup and error mapping.
  auto route = [this](auto body) {
    return [this, body](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto id = req.get_header_value(kSessionHeader);
        if (!valid_session_id(id)) {
          throw HttpError{400, "MissingSession", std::string("a valid ") + kSessionHeader + " header is required"};
        }
        auto& s = session(id);
        std::lock_guard lock(s.mutex);
        body(s, req, res);
      } catch (const HttpError& e) {
        send_error(res, e);
      } catch (const Error& e) {
        send_error(res, {status_for(e.code()), std::string(error_code_name(e.code())), e.what()});
      } catch (const std::exception& e) {
        send_error(res, {500, "Internal", e.what()});
      }
    };
  };

  auto rerun = [this](Session& s) {
    std::mutex merged_mutex;
    std::map<std::string, std::vector<EntitySpan>> merged;
    const auto& directives = s.directives;
    SpanEdit edit = [&](const Document& doc, std::vector<EntitySpan> spans) {
      {
        std::lock_guard lock(merged_mutex);
        merged[doc.id()] = spans;
      }
      auto it = directives.find(doc.id());
      return it == directives.end() ? spans : apply_directives(spans, it->second);
    };
    auto result = run_batch(s.documents, *s.settings, resources_, config_.pipeline, s.manual, edit);
    result.errors.insert(result.errors.begin(), s.upload_errors.begin(), s.upload_errors.end());
    s.merged = std::move(merged);
    s.result = std::move(result);
  };

  auto require_settings = [](Session& s) {
    if (!s.settings) throw HttpError{409, "NoSettings", "save settings with PUT /settings first"};
  };

  auto page_json = [this](const BatchResult& batch, std::size_t cursor) {
    json results = json::array();
    const auto end = std::min(batch.documents.size(), cursor + config_.page_size);
    for (auto i = cursor; i < end; ++i) results.push_back(letter_json(batch.documents[i]));
    json j{{"results", results},
           {"errors", errors_json(batch.errors)},
           {"total", batch.documents.size()},
           {"cursor", cursor},
           {"next_cursor", end < batch.documents.size() ? json(end) : json(nullptr)}};
    if (batch.risk) j["risk"] = risk_to_json(*batch.risk);
    return j;
  };

  server.Put("/settings", route([this](Session& s, const httplib::Request& req, httplib::Response& res) {
               auto settings = settings_from_json(parse_body(req));
               write_file(config_.store_dir / s.id / "settings.json", dump_pretty(settings_to_json(settings)));
               s.settings = std::move(settings);
               send_json(res, 200, settings_to_json(*s.settings));
             }));

  server.Get("/settings", route([](Session& s, const httplib::Request&, httplib::Response& res) {
               if (!s.settings) throw HttpError{404, "NoSettings", "no settings saved for this session"};
               send_json(res, 200, settings_to_json(*s.settings));
             }));

  server.Post("/letters", route([=, this](Session& s, const httplib::Request& req, httplib::Response& res) {
                require_settings(s);
                const auto body = parse_body(req);
                if (!body.contains("filename") || !body.contains("content")) {
                  throw HttpError{400, "InvalidBody", "expected {\"filename\", \"content\"}"};
                }
                auto doc = parse_letter(body.at("filename").get<std::string>(), body.at("content").get<std::string>());
                s.documents = {std::move(doc)};
                s.upload_errors.clear();
                s.directives.clear();
                rerun(s);
                send_json(res, 200, letter_json(s.result->documents.front()));
              }));

  server.Post("/batch", route([=, this](Session& s, const httplib::Request& req, httplib::Response& res) {
                require_settings(s);
                const auto body = parse_body(req);
                if (!body.contains("files") || !body.at("files").is_array()) {
                  throw HttpError{400, "InvalidBody", "expected {\"files\": [{\"filename\", \"content\"}]}"};
                }
                s.documents.clear();
                s.upload_errors.clear();
                s.directives.clear();
                for (const auto& f : body.at("files")) {
                  const auto name = f.value("filename", std::string());
                  try {
                    s.documents.push_back(parse_letter(name, f.at("content").get<std::string>()));
                  } catch (const Error& e) {
                    s.upload_errors.push_back({name, e.what()});
                  } catch (const json::exception& e) {
                    s.upload_errors.push_back({name, e.what()});
                  }
                }
                rerun(s);
                send_json(res, 200, page_json(*s.result, 0));
              }));

  server.Get("/batch", route([=, this](Session& s, const httplib::Request& req, httplib::Response& res) {
               if (!s.result) throw HttpError{404, "NoResults", "nothing has been processed in this session"};
               std::size_t cursor = 0;
               if (req.has_param("cursor")) {
                 try {
                   cursor = std::stoul(req.get_param_value("cursor"));
                 } catch (const std::exception&) {
                   throw HttpError{400, "InvalidCursor", "cursor must be a non-negative integer"};
                 }
               }
               if (cursor > s.result->documents.size()) throw HttpError{400, "InvalidCursor", "cursor out of range"};
               send_json(res, 200, page_json(*s.result, cursor));
             }));

  server.Post("/entities/mark", route([=, this](Session& s, const httplib::Request& req, httplib::Response& res) {
                require_settings(s);
                const auto body = parse_body(req);
                const auto doc_id = body.value("doc_id", std::string());
                const Document* doc = nullptr;
                for (const auto& d : s.documents) {
                  if (d.id() == doc_id) doc = &d;
                }
                if (!doc) throw HttpError{404, "UnknownDocument", "no document '" + doc_id + "' in this session"};
                const auto etype = parse_entity_type(body.value("type", std::string()));
                if (!etype) throw HttpError{400, "UnknownType", "unknown entity type"};
                std::string surface = body.value("surface", std::string());
                if (surface.empty() && body.contains("start") && body.contains("end")) {
                  const auto start = body.at("start").get<std::size_t>();
                  const auto end = body.at("end").get<std::size_t>();
                  if (start >= end || end > doc->length()) throw HttpError{400, "EmptySelection", "invalid selection"};
                  surface = doc->substr(start, end);
                }
                const auto trimmed = normalize_surface(surface);
                if (trimmed.empty()) throw HttpError{400, "EmptySelection", "nothing selected"};

                auto& words = s.manual[*etype];
                if (std::find(words.begin(), words.end(), surface) == words.end()) words.push_back(surface);
                for (auto& [id, d] : s.directives) {
                  d.all.erase({trimmed, *etype});
                  for (auto it = d.one.begin(); it != d.one.end();) {
                    if (std::get<1>(*it) == *etype && normalize_surface(std::get<0>(*it)) == trimmed) {
                      it = d.one.erase(it);
                    } else {
                      ++it;
                    }
                  }
                }
                rerun(s);
                send_json(res, 200, letter_json(*find_result(*s.result, doc_id)));
              }));

  server.Post("/entities/remove", route([=, this](Session& s, const httplib::Request& req, httplib::Response& res) {
                require_settings(s);
                if (!s.result) throw HttpError{404, "NoResults", "nothing has been processed in this session"};
                const auto body = parse_body(req);
                const auto doc_id = body.value("doc_id", std::string());
                const auto* current = find_result(*s.result, doc_id);
                if (!current) throw HttpError{404, "UnknownDocument", "no document '" + doc_id + "' in this session"};
                const auto start = body.value("start", std::size_t{0});
                const auto end = body.value("end", std::size_t{0});
                std::optional<EntityType> etype;
                if (body.contains("type")) etype = parse_entity_type(body.at("type").get<std::string>());
                const auto scope = body.value("scope", std::string("one"));
                if (scope != "one" && scope != "all") throw HttpError{400, "InvalidScope", "scope must be one or all"};

                const auto& spans = current->spans;
                auto hit = std::find_if(spans.begin(), spans.end(), [&](const EntitySpan& sp) {
                  return sp.start == start && sp.end == end && (!etype || sp.etype == *etype);
                });
                if (hit == spans.end()) throw HttpError{404, "UnknownSpan", "no recognized span at that position"};

                auto& d = s.directives[doc_id];
                if (scope == "all") {
                  d.all.insert({normalize_surface(hit->surface), hit->etype});
                } else {
                  std::size_t k = 0;
                  for (const auto& m : s.merged[doc_id]) {
                    if (m.start == hit->start && m.end == hit->end && m.etype == hit->etype) break;
                    if (m.surface == hit->surface && m.etype == hit->etype) ++k;
                  }
                  d.one.insert({hit->surface, hit->etype, k});
                }
                rerun(s);
                send_json(res, 200, letter_json(*find_result(*s.result, doc_id)));
              }));

  server.Get(R"(/results/([^/]+)/download)", route([](Session& s, const httplib::Request& req, httplib::Response& res) {
               const auto* r = s.result ? find_result(*s.result, req.matches[1].str()) : nullptr;
               if (!r) throw HttpError{404, "UnknownDocument", "no result for that document"};
               res.status = 200;
               res.set_header("Content-Disposition", "attachment; filename=\"" + r->document.id() + ".txt\"");
               res.set_content(r->masked.masked_text, "text/plain; charset=utf-8");
             }));

  server.Get(R"(/results/([^/]+))", route([](Session& s, const httplib::Request& req, httplib::Response& res) {
               const auto* r = s.result ? find_result(*s.result, req.matches[1].str()) : nullptr;
               if (!r) throw HttpError{404, "UnknownDocument", "no result for that document"};
               send_json(res, 200, letter_json(*r));
             }));

  server.Get("/risk", route([](Session& s, const httplib::Request&, httplib::Response& res) {
               if (!s.result) throw HttpError{404, "NoResults", "nothing has been processed in this session"};
               if (!s.result->risk) {
                 // 204 carries no body; the explanation travels in a header.
                 res.status = 204;
                 res.set_header("X-Deid-Note", "risk assessment applies only when replacement is requested");
                 return;
               }
               send_json(res, 200, risk_to_json(*s.result->risk));
             }));
}

}  // namespace deid
