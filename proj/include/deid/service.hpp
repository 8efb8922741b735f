/**
 * @file service.hpp
 * @brief HTTP/JSON front-end: sessions, settings, letters, batches, entity
 *        editing, downloads and risk.
 *
 * Every request names its session in the X-Session-Id header. Within one
 * session pipeline runs are serialized; sessions run concurrently.
 */
#pragma once

#include "deid/pipeline.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <tuple>

namespace httplib {
class Server;
}

namespace deid {

inline constexpr const char* kSessionHeader = "X-Session-Id";

struct ServiceConfig {
  /// Settings are persisted under store_dir/<session>/settings.json.
  std::filesystem::path store_dir;
  std::size_t page_size = 25;
  PipelineOptions pipeline;
};

/// Post-merge suppression for one document.
struct RemovalDirectives {
  /// (surface, type, occurrence index among merged spans with that exact
  /// surface and type, in text order)
  std::set<std::tuple<std::string, EntityType, std::size_t>> one;
  /// (normalized surface, type)
  std::set<std::pair<std::string, EntityType>> all;

  bool empty() const { return one.empty() && all.empty(); }
};

/// Applies directives to merged spans. Exposed for testing.
std::vector<EntitySpan> apply_directives(const std::vector<EntitySpan>& merged, const RemovalDirectives& d);

class Service {
public:
  Service(Resources resources, ServiceConfig config);
  ~Service();

  void register_routes(httplib::Server& server);

private:
  struct Session;
  Session& session(const std::string& id);

  Resources resources_;
  ServiceConfig config_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
};

}  // namespace deid
