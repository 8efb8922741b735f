// deid-server: HTTP front-end. Flags override the DEID_* environment.

#include "deid/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <iostream>

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"De-identification service"};
  std::string bind = env_or("DEID_BIND", "127.0.0.1");
  int port = std::atoi(env_or("DEID_PORT", "8080").c_str());
  std::string store = env_or("DEID_STORE_DIR", "deid-store");
  std::string data_dir = deid::default_data_dir().string();
  std::string model_url = env_or("DEID_MODEL_URL", "");
  std::string embed_url = env_or("DEID_EMBED_URL", "");
  std::size_t page_size = 25;
  bool compat = false;
  app.add_option("--bind", bind, "Bind address");
  app.add_option("--port", port, "Port")->check(CLI::Range(0, 65535));
  app.add_option("--store", store, "Directory for persisted settings");
  app.add_option("--data-dir", data_dir, "Lexicon and surrogate directory");
  app.add_option("--model-url", model_url, "Remote model endpoint");
  app.add_option("--embed-url", embed_url, "Context embedding endpoint for risk; default is the hashing embedder");
  app.add_option("--page-size", page_size, "Batch results per page")->check(CLI::PositiveNumber);
  app.add_flag("--compat", compat, "Month-name fragmenting rules and duplicate-only merge");
  CLI11_PARSE(app, argc, argv);

  try {
    deid::ServiceConfig config;
    config.store_dir = store;
    config.page_size = page_size;
    config.pipeline.compat = compat;
    config.pipeline.model_url = model_url;
    config.pipeline.embed_url = embed_url;
    deid::Service service(deid::Resources::load(data_dir), config);
    httplib::Server server;
    service.register_routes(server);
    std::cerr << "listening on " << bind << ":" << port << "\n";
    if (!server.listen(bind, port)) {
      std::cerr << "deid-server: cannot bind " << bind << ":" << port << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "deid-server: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
