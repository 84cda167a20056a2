#ifndef POPBO_SERVICE_HPP
#define POPBO_SERVICE_HPP

#include "popbo/session.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace httplib {
class Server;
}

namespace popbo {

struct ServiceOptions {
  std::optional<std::filesystem::path> checkpoint_dir;  // no persistence when empty
  Execution exec = Execution::Parallel;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// Session store behind the /v1 protocol:
///   POST /v1/sessions                   {config}      -> {session_id}
///   GET  /v1/sessions/{id}/duel                       -> {t, x, x_prime, labels}
///   POST /v1/sessions/{id}/preference   {pref: 0|1}   -> {t, report: {t_star, x, radius}}
///   GET  /v1/sessions/{id}/report                     -> {t_star, x, radius, max_mle_point}
///   GET  /v1/sessions/{id}/trace                      -> trace JSON
/// Errors answer {"error": message} with 400 (bad input), 404 (unknown session
/// or route), 409 (no pending duel, or another write in progress) or 500.
/// Mutations of one session are exclusive and rejected, not queued, when
/// another is running; reads are served from the last published snapshot.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options = {});
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  ServiceResponse handle(const std::string& method, const std::string& path, const std::string& body);

  /// Loads every <id>.json in the checkpoint directory; returns the count.
  std::size_t load_checkpoints();

  /// Routes all /v1 requests of `server` to handle().
  void mount(httplib::Server& server);

  std::size_t session_count() const;

 private:
  struct Entry;

  ServiceResponse create(const std::string& body);
  ServiceResponse duel(Entry& e);
  ServiceResponse preference(Entry& e, const std::string& body);
  ServiceResponse report(const Entry& e) const;
  ServiceResponse trace(const Entry& e) const;

  std::shared_ptr<Entry> find(const std::string& id) const;
  std::string fresh_id();
  void publish(Entry& e);
  void persist(const Entry& e) const;

  ServiceOptions options_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t counter_ = 0;
};

/// Blocks serving the protocol on host:port until the process is stopped.
void serve(SessionService& service, const std::string& host, int port);

}  // namespace popbo

#endif
