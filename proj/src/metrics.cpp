#include "crowdforge/metrics.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "crowdforge/filters.hpp"
#include "crowdforge/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crowdforge {
namespace {

void require_aligned(const FrameSequence& a, const FrameSequence& b, const char* what) {
  if (a.frames.size() != b.frames.size()) {
    throw ShapeError(std::string(what) + ": frame counts differ (" + std::to_string(a.frames.size()) + " vs " +
                     std::to_string(b.frames.size()) + ")");
  }
  if (a.frames.empty()) throw EmptyInputError(std::string(what) + ": empty clips");
  for (std::size_t t = 0; t < a.frames.size(); ++t) require_same_shape(a.frames[t], b.frames[t], what);
}

}  // namespace

double psnr_from_sse(std::uint64_t sum, std::uint64_t count) {
  if (count == 0) throw UndefinedMetricError("psnr: no samples");
  if (sum == 0) return std::numeric_limits<double>::infinity();
  const double mse = static_cast<double>(sum) / static_cast<double>(count);
  return 10.0 * std::log10(kPsnrPeak * kPsnrPeak / mse);
}

double psnr(const FrameSequence& a, const FrameSequence& b) {
  require_aligned(a, b, "psnr");
  std::uint64_t sum = 0, count = 0;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    const auto e = kernels::parallel::squared_error(a.frames[t], b.frames[t]);
    sum += e.sum;
    count += e.count;
  }
  return psnr_from_sse(sum, count);
}

double in_mask_psnr(const FrameSequence& a, const FrameSequence& b, const std::vector<Mask>& mask) {
  require_aligned(a, b, "in_mask_psnr");
  if (mask.size() != a.frames.size()) throw ShapeError("in_mask_psnr: mask clip length differs");
  std::uint64_t sum = 0, count = 0;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    const auto e = kernels::parallel::squared_error_masked(a.frames[t], b.frames[t], mask[t]);
    sum += e.sum;
    count += e.count;
  }
  if (count == 0) throw UndefinedMetricError("in_mask_psnr: mask is empty across the clip");
  return psnr_from_sse(sum, count);
}

double clip_ssim(const FrameSequence& a, const FrameSequence& b) {
  require_aligned(a, b, "ssim");
  double total = 0.0;
  for (std::size_t t = 0; t < a.frames.size(); ++t) total += ssim(a.frames[t], b.frames[t]);
  return total / static_cast<double>(a.frames.size());
}

bool ClipScore::psnr_infinite() const noexcept { return std::isinf(psnr_db); }

// --- external scorer --------------------------------------------------------

ScorerResult parse_scorer_output(const std::string& output, const std::vector<ScorerRequest>& requests) {
  std::set<std::string> expected;
  for (const auto& r : requests) expected.insert(r.clip_id);

  ScorerResult result;
  std::istringstream in(output);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ProtocolError("scorer output line " + std::to_string(line_no) + " is malformed: '" + line + "'");
    }
    const std::string id = line.substr(0, tab);
    const std::string value = line.substr(tab + 1);
    double score = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), score);
    if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(score)) {
      throw ProtocolError("scorer output line " + std::to_string(line_no) + " has a bad score: '" + line + "'");
    }
    if (!expected.contains(id)) {
      throw ProtocolError("scorer output line " + std::to_string(line_no) + " names unknown clip '" + id + "'");
    }
    if (!result.scores.emplace(id, score).second) {
      throw ProtocolError("scorer output line " + std::to_string(line_no) + " repeats clip '" + id + "'");
    }
  }
  for (const auto& r : requests) {
    if (!result.scores.contains(r.clip_id)) result.missing.push_back(r.clip_id);
  }
  return result;
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "crowdforge-scorer-XXXXXX").string();
    if (!::mkdtemp(templ.data())) throw IoError("cannot create temporary directory");
    path = templ;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

ScorerResult run_external_scorer(const std::string& command, const std::vector<ScorerRequest>& requests) {
  for (const auto& r : requests) {
    for (const std::string& field : {r.clip_id, r.pred_dir.string(), r.gt_dir.string()}) {
      if (field.find_first_of("\t\n\r") != std::string::npos) {
        throw ProtocolError("scorer request field contains a tab or newline: '" + field + "'");
      }
    }
  }
  TempDir tmp;
  const fs::path request_file = tmp.path / "requests.tsv";
  const fs::path stderr_file = tmp.path / "stderr.txt";
  {
    std::ofstream out(request_file);
    for (const auto& r : requests) out << r.clip_id << '\t' << r.pred_dir.string() << '\t' << r.gt_dir.string() << '\n';
    if (!out) throw IoError("cannot write scorer requests");
  }
  const std::string shell =
      "(" + command + ") < " + shell_quote(request_file.string()) + " 2> " + shell_quote(stderr_file.string());
  std::FILE* pipe = ::popen(shell.c_str(), "r");
  if (!pipe) throw ScorerError("cannot start scorer: " + command, -1, {});
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
  const int status = ::pclose(pipe);
  const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (exit_code != 0) {
    std::ifstream err(stderr_file);
    std::stringstream diag;
    diag << err.rdbuf();
    throw ScorerError("scorer '" + command + "' exited with status " + std::to_string(exit_code), exit_code,
                      diag.str());
  }
  return parse_scorer_output(output, requests);
}

// --- reporting --------------------------------------------------------------

namespace {

struct Acc {
  double sum = 0.0;
  int count = 0;
  int infinite = 0;

  void add(double v) {
    if (std::isinf(v)) {
      ++infinite;
      return;
    }
    sum += v;
    ++count;
  }
  MetricCell cell() const {
    MetricCell c;
    c.count = count;
    c.infinite = infinite;
    if (count > 0) c.mean = sum / count;
    return c;
  }
};

std::vector<std::string> metric_names(const std::vector<ClipScore>& scores) {
  std::vector<std::string> names{kMetricPsnr};
  bool in_mask = false;
  std::set<std::string> perceptual;
  for (const auto& s : scores) {
    in_mask = in_mask || s.in_mask_psnr_db.has_value();
    for (const auto& [k, v] : s.perceptual) perceptual.insert(k);
  }
  if (in_mask) names.push_back(kMetricInMaskPsnr);
  names.push_back(kMetricSsim);
  names.insert(names.end(), perceptual.begin(), perceptual.end());
  return names;
}

std::optional<double> metric_value(const ClipScore& s, const std::string& metric) {
  if (metric == kMetricPsnr) return s.psnr_db;
  if (metric == kMetricInMaskPsnr) return s.in_mask_psnr_db;
  if (metric == kMetricSsim) return s.ssim;
  auto it = s.perceptual.find(metric);
  if (it == s.perceptual.end()) return std::nullopt;
  return it->second;
}

json cell_json(const MetricCell& c) {
  json j;
  j["mean"] = c.mean ? json(*c.mean) : json(nullptr);
  j["count"] = c.count;
  j["infinite"] = c.infinite;
  return j;
}

std::string format_cell(const MetricCell& c, const std::string& metric) {
  if (!c.mean) return "n/a";
  char buf[32];
  const bool db = metric == kMetricPsnr || metric == kMetricInMaskPsnr;
  std::snprintf(buf, sizeof buf, db ? "%.2f" : "%.3f", *c.mean);
  std::string s = buf;
  if (c.infinite > 0) s += "*";
  return s;
}

}  // namespace

const MetricRow* ReportTable::find(const std::string& method, const std::string& metric) const {
  for (const auto& r : rows) {
    if (r.method == method && r.metric == metric) return &r;
  }
  return nullptr;
}

ReportTable build_report(const std::vector<std::pair<std::string, std::vector<ClipScore>>>& methods) {
  std::size_t total = 0;
  for (const auto& [name, scores] : methods) total += scores.size();
  if (total == 0) throw EmptyInputError("build_report: no scores");

  ReportTable table;
  for (int b = 0; b < kCrowdBinCount; ++b) table.columns.push_back(bin_label(b));
  table.columns.emplace_back("Average");

  for (const auto& [method, scores] : methods) {
    for (const auto& s : scores) {
      if (!s.crowd_bin || *s.crowd_bin < 0 || *s.crowd_bin >= kCrowdBinCount) {
        throw ValidationError("build_report: clip '" + s.clip_id + "' has no valid crowd bin");
      }
    }
    table.clip_count = std::max(table.clip_count, static_cast<int>(scores.size()));
    for (const std::string& metric : metric_names(scores)) {
      std::array<Acc, kCrowdBinCount> bins{};
      Acc overall;
      std::map<std::string, Acc> per_scene;
      for (const auto& s : scores) {
        const auto v = metric_value(s, metric);
        if (!v) continue;
        bins[static_cast<std::size_t>(*s.crowd_bin)].add(*v);
        overall.add(*v);
        if (!s.scene.empty()) per_scene[s.scene].add(*v);
      }
      MetricRow row;
      row.method = method;
      row.metric = metric;
      for (int b = 0; b < kCrowdBinCount; ++b) row.bins[static_cast<std::size_t>(b)] = bins[static_cast<std::size_t>(b)].cell();
      row.average = overall.cell();
      table.rows.push_back(std::move(row));
      for (const auto& [scene, acc] : per_scene) table.scenes[method][scene][metric] = acc.cell();
    }
  }
  return table;
}

ReportTable build_report(const std::vector<ClipScore>& scores, const std::string& method) {
  return build_report(std::vector<std::pair<std::string, std::vector<ClipScore>>>{{method, scores}});
}

std::string ReportTable::render_text() const {
  // Table layout: one line per method, one column group per Crowd% range.
  std::vector<std::string> methods;
  std::vector<std::string> metrics;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
  }
  constexpr int kCell = 11;
  std::size_t name_width = 8;
  for (const auto& m : methods) name_width = std::max(name_width, m.size() + 1);
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };

  std::ostringstream out;
  out << pad("Crowd%", name_width);
  for (const auto& col : columns) out << "| " << pad(col, metrics.size() * kCell - 1);
  out << '\n' << pad("", name_width);
  for (std::size_t g = 0; g < columns.size(); ++g) {
    out << "| ";
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      out << pad(metrics[m], m + 1 == metrics.size() ? kCell - 1 : kCell);
    }
  }
  out << '\n';
  for (const auto& method : methods) {
    out << pad(method, name_width);
    for (std::size_t g = 0; g < columns.size(); ++g) {
      out << "| ";
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        const MetricRow* row = find(method, metrics[m]);
        std::string text = "n/a";
        if (row) text = format_cell(g < kCrowdBinCount ? row->bins[g] : row->average, metrics[m]);
        out << pad(text, m + 1 == metrics.size() ? kCell - 1 : kCell);
      }
    }
    out << '\n';
  }
  bool any_inf = false;
  for (const auto& r : rows) any_inf = any_inf || r.average.infinite > 0;
  if (any_inf) out << "* mean excludes clips with infinite PSNR (identical to ground truth)\n";
  return out.str();
}

json ReportTable::to_json() const {
  json j;
  j["columns"] = columns;
  j["clip_count"] = clip_count;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json row;
    row["method"] = r.method;
    row["metric"] = r.metric;
    row["bins"] = json::array();
    for (const auto& c : r.bins) row["bins"].push_back(cell_json(c));
    row["average"] = cell_json(r.average);
    j["rows"].push_back(std::move(row));
  }
  j["scenes"] = json::object();
  for (const auto& [method, scenes] : this->scenes) {
    for (const auto& [scene, metrics] : scenes) {
      for (const auto& [metric, cell] : metrics) j["scenes"][method][scene][metric] = cell_json(cell);
    }
  }
  return j;
}

}  // namespace crowdforge
