#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "crowdforge/decisions.hpp"
#include "crowdforge/manifest.hpp"

namespace httplib {
class Server;
}

namespace crowdforge {

struct ReviewOptions {
  std::filesystem::path manifest_path;
  // Root that composite paths are relative to; empty: the manifest's directory.
  std::filesystem::path dataset_root;
  // Empty: decision_log_path(manifest_path).
  std::filesystem::path log_path;
  // Optional directory of static UI files mounted at /.
  std::filesystem::path static_dir;
};

// Endpoint contract (all bodies JSON except frame images):
//   GET  /clips?bin=&status=&split=&role=   role defaults to composite
//   GET  /clips/{id}
//   GET  /clips/{id}/frames/{i}?layer=input|mask|gt   raw stored PNG
//   POST /clips/{id}/decision   {"verdict", "reasons", "note"}
//   GET  /export
// Errors: 400 malformed request, 404 unknown clip or frame, 422 invariant
// violation. Error bodies are {"error": message}.
class ReviewService {
 public:
  explicit ReviewService(ReviewOptions opts);
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  // Binds host:port (port 0 picks a free port) and returns the bound port.
  // Throws IoError when the port is unavailable.
  int bind(const std::string& host, int port);
  // Serves until stop() is called. Call bind() first.
  void run();
  void stop();

  // Validates, appends to the log, then rewrites the manifest with every
  // logged verdict folded in. Throws ValidationError for unknown clips and
  // invariant violations.
  ReviewDecision decide(const std::string& clip_id, const nlohmann::json& body);

  bool has_clip(const std::string& clip_id) const;
  DatasetManifest snapshot() const;
  nlohmann::json list_clips(const std::optional<int>& bin, const std::optional<ReviewStatus>& status,
                            const std::optional<std::string>& split, const std::optional<ClipRole>& role) const;
  nlohmann::json clip_metadata(const std::string& clip_id) const;
  // Path of frame i of the given layer, or empty when out of range.
  std::filesystem::path frame_path(const std::string& clip_id, int index, const std::string& layer) const;

 private:
  void install_routes();
  // Reloads the manifest when another process replaced it. Caller holds mutex_.
  void refresh_locked() const;

  ReviewOptions opts_;
  DecisionLog log_;
  mutable std::mutex mutex_;
  mutable DatasetManifest manifest_;
  mutable std::filesystem::file_time_type manifest_mtime_ = std::filesystem::file_time_type::min();
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace crowdforge
