#include "crowdforge/review.hpp"

#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "crowdforge/clip_model.hpp"
#include "crowdforge/errors.hpp"
#include "crowdforge/foreground.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crowdforge {

ReviewService::ReviewService(ReviewOptions opts)
    : opts_(std::move(opts)),
      log_(opts_.log_path.empty() ? decision_log_path(opts_.manifest_path) : opts_.log_path),
      server_(std::make_unique<httplib::Server>()) {
  if (opts_.dataset_root.empty()) opts_.dataset_root = opts_.manifest_path.parent_path();
  if (!fs::exists(opts_.manifest_path)) throw IoError("manifest not found: " + opts_.manifest_path.string());
  // httplib's default also sets SO_REUSEPORT, which would let a second
  // service silently share the port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  {
    std::lock_guard lock(mutex_);
    refresh_locked();
  }
  install_routes();
}

ReviewService::~ReviewService() { stop(); }

void ReviewService::refresh_locked() const {
  const auto mtime = fs::last_write_time(opts_.manifest_path);
  if (mtime == manifest_mtime_) return;
  DatasetManifest m = read_manifest(opts_.manifest_path);
  apply_decisions(m, fold_decisions(log_.replay()));
  manifest_ = std::move(m);
  manifest_mtime_ = mtime;
}

int ReviewService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound <= 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void ReviewService::run() { server_->listen_after_bind(); }

void ReviewService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

bool ReviewService::has_clip(const std::string& clip_id) const {
  std::lock_guard lock(mutex_);
  refresh_locked();
  return manifest_.find(clip_id) != nullptr;
}

DatasetManifest ReviewService::snapshot() const {
  std::lock_guard lock(mutex_);
  refresh_locked();
  return manifest_;
}

ReviewDecision ReviewService::decide(const std::string& clip_id, const json& body) {
  ReviewDecision d = decision_from_json(body);
  if (!d.clip_id.empty() && d.clip_id != clip_id) {
    throw ValidationError("body clip_id '" + d.clip_id + "' does not match the URL");
  }
  d.clip_id = clip_id;
  d.timestamp = utc_timestamp();
  d.validate();

  std::lock_guard lock(mutex_);
  refresh_locked();
  if (!manifest_.find(clip_id)) throw ValidationError("unknown clip '" + clip_id + "'");
  log_.append(d);
  apply_decisions(manifest_, {{clip_id, d}});
  write_manifest(manifest_, opts_.manifest_path);
  manifest_mtime_ = fs::last_write_time(opts_.manifest_path);
  return d;
}

namespace {

json clip_summary(const ManifestEntry& e) {
  json j{{"clip_id", e.clip_id},
         {"role", to_string(e.role)},
         {"split", e.split},
         {"status", to_string(e.review.status)},
         {"frame_count", e.source.length()},
         {"width", e.width},
         {"height", e.height}};
  if (e.crowd_bin) {
    j["crowd_bin"] = *e.crowd_bin;
    j["crowd_bin_label"] = bin_label(*e.crowd_bin);
  } else {
    j["crowd_bin"] = nullptr;
  }
  j["crowd_percent"] = e.crowd_percent ? json(*e.crowd_percent) : json(nullptr);
  if (e.shadow) j["shadow_params"] = shadow_to_json(*e.shadow);
  return j;
}

std::vector<std::string> layers_of(ClipRole role) {
  switch (role) {
    case ClipRole::composite: return {"input", "mask", "gt"};
    case ClipRole::foreground: return {"input", "mask"};
    case ClipRole::background: return {"input"};
  }
  return {};
}

}  // namespace

json ReviewService::list_clips(const std::optional<int>& bin, const std::optional<ReviewStatus>& status,
                               const std::optional<std::string>& split, const std::optional<ClipRole>& role) const {
  std::lock_guard lock(mutex_);
  refresh_locked();
  json clips = json::array();
  for (const auto& e : manifest_.entries) {
    if (role && e.role != *role) continue;
    if (bin && e.crowd_bin != bin) continue;
    if (status && e.review.status != *status) continue;
    if (split && e.split != *split) continue;
    clips.push_back(clip_summary(e));
  }
  return json{{"count", clips.size()}, {"clips", clips}};
}

json ReviewService::clip_metadata(const std::string& clip_id) const {
  std::lock_guard lock(mutex_);
  refresh_locked();
  const ManifestEntry* e = manifest_.find(clip_id);
  if (!e) throw ValidationError("unknown clip '" + clip_id + "'");
  json j = entry_to_json(*e);
  j["frame_count"] = e->source.length();
  j["layers"] = layers_of(e->role);
  if (e->crowd_bin) j["crowd_bin_label"] = bin_label(*e->crowd_bin);
  return j;
}

fs::path ReviewService::frame_path(const std::string& clip_id, int index, const std::string& layer) const {
  std::lock_guard lock(mutex_);
  refresh_locked();
  const ManifestEntry* e = manifest_.find(clip_id);
  if (!e || index < 0 || index >= e->source.length()) return {};
  fs::path dir;
  int file_index = index;
  if (e->role == ClipRole::composite) {
    auto it = e->paths.find(layer);
    if (it == e->paths.end()) return {};
    dir = opts_.dataset_root / it->second;
  } else {
    const char* key = layer == "input" ? "frames" : (layer == "mask" && e->role == ClipRole::foreground ? "masks" : "");
    auto it = e->paths.find(key);
    auto root = manifest_.roots.find(e->role == ClipRole::background ? "background" : "foreground");
    if (it == e->paths.end() || root == manifest_.roots.end()) return {};
    dir = fs::path(root->second) / it->second;
    file_index = e->source.start_frame + index;
  }
  const auto files = list_frame_files(dir);
  if (file_index >= static_cast<int>(files.size())) return {};
  return files[static_cast<std::size_t>(file_index)];
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, json{{"error", message}}, status);
}

std::optional<std::string> param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  std::string v = req.get_param_value(key);
  if (v.empty()) return std::nullopt;
  return v;
}

}  // namespace

void ReviewService::install_routes() {
  auto& srv = *server_;

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const ValidationError& e) {
      send_error(res, 422, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Get("/clips", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<int> bin;
    std::optional<ReviewStatus> status;
    std::optional<ClipRole> role = ClipRole::composite;
    try {
      if (auto v = param(req, "bin")) {
        std::size_t used = 0;
        bin = std::stoi(*v, &used);
        if (used != v->size() || *bin < 0 || *bin >= kCrowdBinCount) throw ValidationError("bin must be 0..4");
      }
      if (auto v = param(req, "status")) status = parse_review_status(*v);
      if (auto v = param(req, "role")) role = *v == "all" ? std::nullopt : std::optional(parse_role(*v));
    } catch (const std::exception& e) {
      return send_error(res, 400, std::string("bad query: ") + e.what());
    }
    send_json(res, list_clips(bin, status, param(req, "split"), role));
  });

  srv.Get(R"(/clips/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!has_clip(id)) return send_error(res, 404, "unknown clip '" + id + "'");
    send_json(res, clip_metadata(id));
  });

  srv.Get(R"(/clips/([^/]+)/frames/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const std::string layer = param(req, "layer").value_or("input");
    if (layer != "input" && layer != "mask" && layer != "gt") {
      return send_error(res, 400, "layer must be input, mask or gt");
    }
    if (!has_clip(id)) return send_error(res, 404, "unknown clip '" + id + "'");
    int index = -1;
    try {
      index = std::stoi(req.matches[2]);
    } catch (const std::exception&) {
    }
    const fs::path path = frame_path(id, index, layer);
    if (path.empty()) return send_error(res, 404, "no frame " + std::string(req.matches[2]) + " in layer " + layer);
    std::ifstream in(path, std::ios::binary);
    if (!in) return send_error(res, 404, "frame file missing: " + path.filename().string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    res.set_content(std::move(bytes), "image/png");
  });

  srv.Post(R"(/clips/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!has_clip(id)) return send_error(res, 404, "unknown clip '" + id + "'");
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, std::string("body is not JSON: ") + e.what());
    }
    send_json(res, decision_to_json(decide(id, body)));
  });

  srv.Get("/export", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, export_curated(snapshot()).to_json());
  });

  if (!opts_.static_dir.empty()) {
    if (!srv.set_mount_point("/", opts_.static_dir.string())) {
      throw IoError("static UI directory not found: " + opts_.static_dir.string());
    }
  }
}

}  // namespace crowdforge
