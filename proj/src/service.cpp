#include "popbo/service.hpp"

#include <httplib.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

namespace popbo {

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ServiceResponse error(int status, const std::string& message) { return {status, {{"error", message}}}; }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

nlohmann::json labels_json(const PopBoConfig& c) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& l : c.labels) out.push_back({{"name", l.name}, {"unit", l.unit}});
  return out;
}

nlohmann::json parse_body(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("body is not valid JSON: ") + e.what());
  }
}

}  // namespace

struct SessionService::Entry {
  std::string id;
  std::string created;
  std::string updated;
  std::mutex write;  // try_lock only
  Session session;

  mutable std::mutex snap_mutex;
  std::shared_ptr<const nlohmann::json> snapshot;  // {"duel", "report", "trace", "t"}

  Entry(std::string id_, Session s) : id(std::move(id_)), session(std::move(s)) {}

  std::shared_ptr<const nlohmann::json> snap() const {
    std::lock_guard lock(snap_mutex);
    return snapshot;
  }
};

SessionService::SessionService(ServiceOptions options) : options_(std::move(options)) {
  if (options_.checkpoint_dir) std::filesystem::create_directories(*options_.checkpoint_dir);
}

SessionService::~SessionService() = default;

std::size_t SessionService::session_count() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::string SessionService::fresh_id() {
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  std::unique_lock lock(map_mutex_);
  for (;;) {
    std::ostringstream os;
    os << std::hex << gen() << '-' << ++counter_;
    if (!sessions_.count(os.str())) return os.str();
  }
}

void SessionService::publish(Entry& e) {
  const Session& s = e.session;
  nlohmann::json snap;
  snap["t"] = s.step();
  if (s.pending()) {
    snap["duel"] = {{"t", s.step() + 1},
                    {"x", point_to_json(s.pending()->x)},
                    {"x_prime", point_to_json(s.pending()->x_prime)},
                    {"labels", labels_json(s.config())}};
  } else {
    snap["duel"] = nullptr;
  }
  nlohmann::json report{{"t_star", nullptr}, {"x", nullptr}, {"radius", nullptr}};
  if (s.step() > 0) {
    const ReportedSolution r = s.report_t_star();
    report = {{"t_star", r.t_star}, {"x", point_to_json(r.x)}, {"radius", r.radius}};
  }
  report["max_mle_point"] = point_to_json(s.report_max_mle());
  snap["report"] = std::move(report);
  snap["trace"] = s.trace_json();
  snap["trace"]["session_id"] = e.id;
  snap["trace"]["seed"] = s.config().seed;
  snap["trace"]["labels"] = labels_json(s.config());
  e.updated = utc_now();
  std::lock_guard lock(e.snap_mutex);
  e.snapshot = std::make_shared<const nlohmann::json>(std::move(snap));
}

void SessionService::persist(const Entry& e) const {
  if (!options_.checkpoint_dir) return;
  const auto final_path = *options_.checkpoint_dir / (e.id + ".json");
  const auto tmp = *options_.checkpoint_dir / (e.id + ".json.tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw NumericalError("cannot write checkpoint " + tmp.string());
    os << nlohmann::json{{"session_id", e.id},
                         {"created", e.created},
                         {"updated", e.updated},
                         {"checkpoint", e.session.checkpoint()}}
              .dump()
       << '\n';
  }
  std::filesystem::rename(tmp, final_path);
}

std::size_t SessionService::load_checkpoints() {
  if (!options_.checkpoint_dir) return 0;
  std::size_t loaded = 0;
  for (const auto& item : std::filesystem::directory_iterator(*options_.checkpoint_dir)) {
    if (item.path().extension() != ".json") continue;
    std::ifstream is(item.path());
    const nlohmann::json doc = nlohmann::json::parse(is);
    const std::string id = doc.at("session_id").get<std::string>();
    auto entry = std::make_shared<Entry>(id, Session::restore(doc.at("checkpoint"), options_.exec));
    entry->created = doc.value("created", utc_now());
    publish(*entry);
    std::unique_lock lock(map_mutex_);
    sessions_[id] = std::move(entry);
    ++loaded;
  }
  return loaded;
}

ServiceResponse SessionService::create(const std::string& body) {
  const nlohmann::json doc = parse_body(body);
  const nlohmann::json& cfg = doc.contains("config") ? doc.at("config") : doc;
  PopBoConfig config = cfg.get<PopBoConfig>();
  const std::string id = fresh_id();
  auto entry = std::make_shared<Entry>(id, Session(std::move(config), options_.exec));
  entry->created = utc_now();
  publish(*entry);
  persist(*entry);
  {
    std::unique_lock lock(map_mutex_);
    sessions_[id] = entry;
  }
  return {201, {{"session_id", id}}};
}

ServiceResponse SessionService::duel(Entry& e) {
  if (auto snap = e.snap(); !(*snap)["duel"].is_null()) return {200, (*snap)["duel"]};
  std::unique_lock lock(e.write, std::try_to_lock);
  if (!lock.owns_lock()) return error(409, "another request is updating this session");
  if (!e.session.pending()) {
    e.session.next_query();
    publish(e);
    persist(e);
  }
  return {200, (*e.snap())["duel"]};
}

ServiceResponse SessionService::preference(Entry& e, const std::string& body) {
  const nlohmann::json doc = parse_body(body);
  if (!doc.is_object() || !doc.contains("pref") || !doc.at("pref").is_number_integer())
    throw InputError("body must be {\"pref\": 0|1}");
  const int pref = doc.at("pref").get<int>();
  if (pref != 0 && pref != 1) throw InputError("pref must be 0 or 1");
  std::unique_lock lock(e.write, std::try_to_lock);
  if (!lock.owns_lock()) return error(409, "another request is updating this session");
  if (!e.session.pending()) return error(409, "no pending duel to answer");
  e.session.observe(pref);
  publish(e);
  persist(e);
  const auto snap = e.snap();
  const auto& rep = (*snap)["report"];
  return {200, {{"t", e.session.step()}, {"report", {{"t_star", rep["t_star"]}, {"x", rep["x"]}, {"radius", rep["radius"]}}}}};
}

ServiceResponse SessionService::report(const Entry& e) const { return {200, (*e.snap())["report"]}; }

ServiceResponse SessionService::trace(const Entry& e) const { return {200, (*e.snap())["trace"]}; }

ServiceResponse SessionService::handle(const std::string& method, const std::string& path, const std::string& body) {
  const auto parts = split_path(path);
  try {
    if (parts.size() < 2 || parts[0] != "v1" || parts[1] != "sessions") return error(404, "no such route");
    if (parts.size() == 2) {
      if (method != "POST") return error(405, "use POST to create a session");
      return create(body);
    }
    if (parts.size() != 4) return error(404, "no such route");
    const auto entry = find(parts[2]);
    if (!entry) return error(404, "unknown session " + parts[2]);
    const std::string& what = parts[3];
    if (what == "duel" && method == "GET") return duel(*entry);
    if (what == "preference" && method == "POST") return preference(*entry, body);
    if (what == "report" && method == "GET") return report(*entry);
    if (what == "trace" && method == "GET") return trace(*entry);
    return error(404, "no such route");
  } catch (const InputError& e) {
    return error(400, e.what());
  } catch (const ProtocolError& e) {
    return error(409, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

void SessionService::mount(httplib::Server& server) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const ServiceResponse r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(R"(/v1/.*)", forward);
  server.Post(R"(/v1/.*)", forward);
}

void serve(SessionService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port)) throw InputError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace popbo
