// Stand-in for an external perceptual scorer. Reads request lines
// (clip_id \t pred_dir \t gt_dir) on stdin and answers clip_id \t score.
// Fault-injection flags exercise the caller's protocol checks.

#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "crowdforge/seeding.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stub perceptual scorer"};
  std::optional<double> value;
  std::vector<std::string> omit, duplicate, unknown;
  bool garbage = false;
  int exit_code = 0;
  app.add_option("--value", value, "Score for every clip (default: derived from the clip id)");
  app.add_option("--omit", omit, "Clip ids to leave unanswered");
  app.add_option("--duplicate", duplicate, "Clip ids to answer twice");
  app.add_option("--unknown", unknown, "Extra ids that were never requested");
  app.add_flag("--garbage", garbage, "Emit a line without a tab");
  app.add_option("--exit", exit_code, "Exit status after answering");
  CLI11_PARSE(app, argc, argv);

  const std::set<std::string> skip(omit.begin(), omit.end());
  const std::set<std::string> twice(duplicate.begin(), duplicate.end());
  std::string line;
  while (std::getline(std::cin, line)) {
    const std::string id = line.substr(0, line.find('\t'));
    if (id.empty() || skip.count(id)) continue;
    const double score = value.value_or(static_cast<double>(crowdforge::fnv1a64(id) % 1000) / 1000.0);
    const int copies = twice.count(id) ? 2 : 1;
    for (int i = 0; i < copies; ++i) std::printf("%s\t%.6f\n", id.c_str(), score);
  }
  for (const auto& id : unknown) std::printf("%s\t0.5\n", id.c_str());
  if (garbage) std::printf("this line has no tab\n");
  if (exit_code != 0) std::fprintf(stderr, "stub scorer: failing on request\n");
  return exit_code;
}
