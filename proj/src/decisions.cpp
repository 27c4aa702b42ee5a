#include "crowdforge/decisions.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "crowdforge/errors.hpp"
#include "crowdforge/foreground.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crowdforge {

void ReviewDecision::validate() const {
  if (clip_id.empty()) throw ValidationError("decision without clip_id");
  if (verdict == ReviewStatus::pending) throw ValidationError("verdict must be accepted or rejected");
  if (verdict == ReviewStatus::rejected && reasons.empty()) {
    throw ValidationError("a rejection needs at least one reason tag");
  }
  for (const auto& r : reasons) {
    if (!is_review_reason(r)) throw ValidationError("unknown reason tag '" + r + "'");
  }
}

json decision_to_json(const ReviewDecision& d) {
  return json{{"clip_id", d.clip_id},
              {"verdict", to_string(d.verdict)},
              {"reasons", d.reasons},
              {"note", d.note},
              {"timestamp", d.timestamp}};
}

ReviewDecision decision_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("decision must be a JSON object");
  ReviewDecision d;
  try {
    d.clip_id = j.value("clip_id", std::string{});
    d.verdict = parse_review_status(j.at("verdict").get<std::string>());
    d.reasons = j.value("reasons", std::vector<std::string>{});
    d.note = j.value("note", std::string{});
    d.timestamp = j.value("timestamp", std::string{});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed decision: ") + e.what());
  }
  return d;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

DecisionLog::DecisionLog(fs::path path) : path_(std::move(path)) {}

void DecisionLog::append(const ReviewDecision& decision) {
  decision.validate();
  const std::string line = decision_to_json(decision).dump() + "\n";
  std::FILE* f = std::fopen(path_.c_str(), "ab");
  if (!f) throw IoError("cannot open decision log " + path_.string());
  const bool ok =
      std::fwrite(line.data(), 1, line.size(), f) == line.size() && std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw IoError("failed to append to decision log " + path_.string());
}

std::vector<ReviewDecision> DecisionLog::replay() const {
  std::vector<ReviewDecision> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const bool last = in.peek() == std::char_traits<char>::eof();
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      if (last) break;  // torn final write
      throw FormatError(path_.string() + ":" + std::to_string(lineno) + ": unparseable decision");
    }
    auto d = decision_from_json(j);
    d.validate();
    out.push_back(std::move(d));
  }
  return out;
}

fs::path decision_log_path(const fs::path& manifest_path) {
  fs::path p = manifest_path;
  p += ".decisions.jsonl";
  return p;
}

std::map<std::string, ReviewDecision> fold_decisions(const std::vector<ReviewDecision>& log) {
  std::map<std::string, ReviewDecision> folded;
  for (const auto& d : log) folded[d.clip_id] = d;
  return folded;
}

std::vector<std::string> apply_decisions(DatasetManifest& manifest,
                                         const std::map<std::string, ReviewDecision>& folded) {
  std::vector<std::string> unknown;
  for (const auto& [id, d] : folded) {
    ManifestEntry* e = manifest.find(id);
    if (!e) {
      unknown.push_back(id);
      continue;
    }
    e->review.status = d.verdict;
    e->review.reasons = d.reasons;
    e->review.note = d.note;
    e->review.decided_at = d.timestamp;
  }
  return unknown;
}

json CuratedExport::to_json() const {
  return json{{"splits", groups}, {"accepted", accepted}, {"pending", pending}, {"rejected", rejected}};
}

CuratedExport export_curated(const DatasetManifest& manifest) {
  CuratedExport ex;
  for (const auto& e : manifest.entries) {
    if (e.role != ClipRole::composite) continue;
    switch (e.review.status) {
      case ReviewStatus::pending: ++ex.pending; break;
      case ReviewStatus::rejected: ++ex.rejected; break;
      case ReviewStatus::accepted: {
        ++ex.accepted;
        const std::string bin = e.crowd_bin ? bin_label(*e.crowd_bin) : "unbinned";
        ex.groups[e.split][bin].push_back(e.clip_id);
        break;
      }
    }
  }
  for (auto& [split, bins] : ex.groups) {
    for (auto& [bin, ids] : bins) std::sort(ids.begin(), ids.end());
  }
  return ex;
}

}  // namespace crowdforge
