#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "crowdforge/decisions.hpp"
#include "crowdforge/errors.hpp"
#include "crowdforge/pipeline.hpp"
#include "crowdforge/review.hpp"
#include "crowdforge/toy_corpus.hpp"
#include "support/generators.hpp"

using namespace crowdforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

// A composed toy dataset plus a running service on an ephemeral port.
class ReviewFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = generate_toy_corpus(dir_ / "corpus");
    cfg_ = toy_config(corpus_, dir_ / "ds");
    for (const char* s : {kStageIngest, kStageFilterBg, kStageSelectFg, kStageCompose}) run_stage(s, cfg_);
    manifest_path_ = cfg_.paths.manifest_path();
    pristine_ = read_manifest(manifest_path_);
    fs::create_directories(dir_ / "ui");
    std::ofstream(dir_ / "ui" / "index.html") << "<html>review</html>";
    start();
  }
  void TearDown() override { stop(); }

  void start() {
    service_ = std::make_unique<ReviewService>(ReviewOptions{manifest_path_, {}, {}, dir_ / "ui"});
    port_ = service_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_->run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_connection_timeout(5);
  }
  void stop() {
    if (!service_) return;
    service_->stop();
    thread_.join();
    client_.reset();
    service_.reset();
  }

  int post(const std::string& id, const std::string& body, json* out = nullptr) {
    auto r = client_->Post("/clips/" + id + "/decision", body, "application/json");
    if (!r) return -1;
    if (out) *out = json::parse(r->body);
    return r->status;
  }

  json get_json(const std::string& path, int expect = 200) {
    auto r = client_->Get(path);
    EXPECT_TRUE(r);
    if (!r) return {};
    EXPECT_EQ(r->status, expect) << path << " " << r->body;
    return json::parse(r->body);
  }

  testutil::TempDir dir_;
  ToyCorpus corpus_;
  PipelineConfig cfg_;
  fs::path manifest_path_;
  DatasetManifest pristine_;
  std::unique_ptr<ReviewService> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

const std::string kAccept = R"({"verdict":"accepted"})";
const std::string kReject = R"({"verdict":"rejected","reasons":["floating_humans"],"note":"feet detached"})";

}  // namespace

TEST_F(ReviewFixture, ListsAndFilters) {
  EXPECT_EQ(get_json("/clips")["count"], 5);
  EXPECT_EQ(get_json("/clips?role=all")["count"], 15);
  EXPECT_EQ(get_json("/clips?role=background")["count"], 5);
  const json bin2 = get_json("/clips?bin=2");
  ASSERT_EQ(bin2["count"], 1);
  EXPECT_EQ(bin2["clips"][0]["crowd_bin_label"], "20-30%");
  EXPECT_TRUE(bin2["clips"][0].contains("shadow_params"));
  EXPECT_EQ(get_json("/clips?status=pending")["count"], 5);
  EXPECT_EQ(get_json("/clips?split=test")["count"], 0);
  get_json("/clips?bin=7", 400);
  get_json("/clips?bin=two", 400);
  get_json("/clips?status=maybe", 400);
  get_json("/clips?role=villain", 400);
}

TEST_F(ReviewFixture, ClipMetadataAndFrames) {
  const json meta = get_json("/clips/comp_fg1_c000");
  EXPECT_EQ(meta["clip_id"], "comp_fg1_c000");
  EXPECT_EQ(meta["frame_count"], 16);
  EXPECT_EQ(meta["layers"], json({"input", "mask", "gt"}));
  get_json("/clips/nope", 404);

  const auto* e = pristine_.find("comp_fg1_c000");
  for (const char* layer : {"input", "mask", "gt"}) {
    auto r = client_->Get(std::string("/clips/comp_fg1_c000/frames/3?layer=") + layer);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(r->body, slurp(list_frame_files(cfg_.paths.output_root / e->paths.at(layer))[3])) << layer;
  }
  EXPECT_EQ(client_->Get("/clips/comp_fg1_c000/frames/16")->status, 404);
  EXPECT_EQ(client_->Get("/clips/comp_fg1_c000/frames/0?layer=depth")->status, 400);
  EXPECT_EQ(client_->Get("/clips/ghost/frames/0")->status, 404);

  // Source clips resolve through the corpus roots.
  auto r = client_->Get("/clips/bg0_c000/frames/2");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, slurp(corpus_.background_root / "bg0" / "frames" / frame_file_name(2)));
  EXPECT_EQ(client_->Get("/clips/bg0_c000/frames/2?layer=gt")->status, 404);
}

TEST_F(ReviewFixture, DecisionValidation) {
  json out;
  EXPECT_EQ(post("comp_fg0_c000", kAccept, &out), 200);
  EXPECT_EQ(out["verdict"], "accepted");
  EXPECT_FALSE(out["timestamp"].get<std::string>().empty());
  EXPECT_EQ(post("comp_fg0_c000", R"({"verdict":"rejected"})", &out), 422);
  EXPECT_TRUE(out.contains("error"));
  EXPECT_EQ(post("comp_fg0_c000", R"({"verdict":"rejected","reasons":["bad_vibes"]})"), 422);
  EXPECT_EQ(post("comp_fg0_c000", R"({"verdict":"pending"})"), 422);
  EXPECT_EQ(post("comp_fg0_c000", R"({"verdict":"accepted","clip_id":"comp_fg1_c000"})"), 422);
  EXPECT_EQ(post("comp_fg0_c000", "{not json"), 400);
  EXPECT_EQ(post("nope", kAccept), 404);
  // Only the one valid decision reached the log.
  EXPECT_EQ(line_count(decision_log_path(manifest_path_)), 1u);
}

TEST_F(ReviewFixture, ExportGroupsAcceptedComposites) {
  ASSERT_EQ(post("comp_fg0_c000", kAccept), 200);
  ASSERT_EQ(post("comp_fg3_c000", kAccept), 200);
  ASSERT_EQ(post("comp_fg2_c000", kReject), 200);
  ASSERT_EQ(post("bg0_c000", kAccept), 200);  // source clips never appear in the export
  const json ex = get_json("/export");
  EXPECT_EQ(ex["accepted"], 2);
  EXPECT_EQ(ex["rejected"], 1);
  EXPECT_EQ(ex["pending"], 2);
  EXPECT_EQ(ex["splits"]["train"]["0-10%"], json({"comp_fg0_c000"}));
  EXPECT_EQ(ex["splits"]["train"]["30-40%"], json({"comp_fg3_c000"}));
  EXPECT_FALSE(ex["splits"]["train"].contains("20-30%"));

  // Latest decision wins.
  ASSERT_EQ(post("comp_fg2_c000", kAccept), 200);
  EXPECT_EQ(get_json("/export")["accepted"], 3);
  EXPECT_EQ(get_json("/clips?status=rejected")["count"], 0);
}

TEST_F(ReviewFixture, ManifestPersistsAndReplayReconstructs) {
  ASSERT_EQ(post("comp_fg1_c000", kReject), 200);
  ASSERT_EQ(post("comp_fg4_c000", kAccept), 200);
  const auto on_disk = read_manifest(manifest_path_);
  EXPECT_EQ(on_disk.find("comp_fg1_c000")->review.status, ReviewStatus::rejected);
  EXPECT_EQ(on_disk.find("comp_fg1_c000")->review.reasons, std::vector<std::string>{"floating_humans"});
  EXPECT_EQ(on_disk.find("comp_fg1_c000")->review.note, "feet detached");

  // Folding the log into the pre-review manifest reproduces the service state.
  DatasetManifest rebuilt = pristine_;
  const auto unknown = apply_decisions(rebuilt, fold_decisions(DecisionLog(decision_log_path(manifest_path_)).replay()));
  EXPECT_TRUE(unknown.empty());
  EXPECT_EQ(rebuilt.entries, on_disk.entries);

  // A restarted service sees the same state.
  stop();
  start();
  EXPECT_EQ(get_json("/clips?status=accepted")["count"], 1);
  EXPECT_EQ(get_json("/clips/comp_fg1_c000")["review"]["status"], "rejected");
}

TEST_F(ReviewFixture, TornTrailingLineIsIgnored) {
  ASSERT_EQ(post("comp_fg0_c000", kAccept), 200);
  const fs::path log = decision_log_path(manifest_path_);
  std::ofstream(log, std::ios::app) << R"({"clip_id":"comp_fg1_c000","verd)";
  const auto replayed = DecisionLog(log).replay();
  ASSERT_EQ(replayed.size(), 1u);
  EXPECT_EQ(replayed[0].clip_id, "comp_fg0_c000");
}

TEST_F(ReviewFixture, ExternalManifestRewriteIsPickedUp) {
  auto m = read_manifest(manifest_path_);
  m.find("comp_fg0_c000")->review = {ReviewStatus::accepted, {}, "", "2026-01-01T00:00:00Z"};
  // Ensure a distinct mtime even on coarse-grained filesystems.
  write_manifest(m, manifest_path_);
  fs::last_write_time(manifest_path_, fs::file_time_type::clock::now() + std::chrono::seconds(5));
  EXPECT_EQ(get_json("/clips?status=accepted")["count"], 1);
}

TEST_F(ReviewFixture, ConcurrentDecisionsAreAllLogged) {
  const std::vector<std::string> ids{"comp_fg0_c000", "comp_fg1_c000", "comp_fg2_c000", "comp_fg3_c000",
                                     "comp_fg4_c000"};
  constexpr int kThreads = 4;
  constexpr int kPerThread = 20;
  std::vector<std::thread> workers;
  std::atomic<int> ok{0};
  for (int t = 0; t < kThreads; ++t) {
    workers.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port_);
      for (int i = 0; i < kPerThread; ++i) {
        const std::string& id = ids[static_cast<std::size_t>((t + i) % 5)];
        auto r = c.Post("/clips/" + id + "/decision", (i % 2) ? kAccept : kReject, "application/json");
        if (r && r->status == 200) ++ok;
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(ok.load(), kThreads * kPerThread);
  const fs::path log = decision_log_path(manifest_path_);
  EXPECT_EQ(line_count(log), static_cast<std::size_t>(kThreads * kPerThread));

  // Manifest state equals the last logged decision per clip.
  const auto folded = fold_decisions(DecisionLog(log).replay());
  const auto m = read_manifest(manifest_path_);
  for (const auto& id : ids) {
    ASSERT_TRUE(folded.contains(id));
    EXPECT_EQ(m.find(id)->review.status, folded.at(id).verdict) << id;
  }
}

TEST_F(ReviewFixture, ServesStaticUi) {
  auto r = client_->Get("/index.html");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "<html>review</html>");
}

TEST(ReviewService, DirectApi) {
  testutil::TempDir dir;
  const auto corpus = generate_toy_corpus(dir / "corpus");
  const auto cfg = toy_config(corpus, dir / "ds");
  for (const char* s : {kStageIngest, kStageFilterBg, kStageSelectFg, kStageCompose}) run_stage(s, cfg);
  ReviewService svc({cfg.paths.manifest_path()});
  EXPECT_TRUE(svc.has_clip("comp_fg0_c000"));
  EXPECT_THROW(svc.decide("ghost", json{{"verdict", "accepted"}}), ValidationError);
  EXPECT_THROW(svc.decide("comp_fg0_c000", json{{"verdict", 3}}), ValidationError);
  const auto d = svc.decide("comp_fg0_c000", json{{"verdict", "rejected"}, {"reasons", {"subtitles_or_overlays"}}});
  EXPECT_EQ(d.verdict, ReviewStatus::rejected);
  EXPECT_EQ(svc.snapshot().find("comp_fg0_c000")->review.status, ReviewStatus::rejected);
  EXPECT_TRUE(svc.frame_path("comp_fg0_c000", -1, "gt").empty());
  EXPECT_FALSE(svc.frame_path("comp_fg0_c000", 0, "gt").empty());

  // A second service on a taken port fails cleanly.
  const int port = svc.bind("127.0.0.1", 0);
  ReviewService other({cfg.paths.manifest_path()});
  EXPECT_THROW(other.bind("127.0.0.1", port), IoError);
}
