// Writes the synthetic toy corpus plus a matching pipeline config.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "crowdforge/toy_corpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate the crowdforge toy corpus"};
  std::string root;
  int frames = 16;
  std::uint64_t seed = 7;
  app.add_option("root", root, "Output directory")->required();
  app.add_option("--frames", frames, "Frames per video")->check(CLI::Range(2, 10000));
  app.add_option("--seed", seed, "Corpus seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto corpus = crowdforge::generate_toy_corpus(root, {frames, seed});
    auto cfg = crowdforge::toy_config(corpus, std::filesystem::path(root) / "dataset", frames);
    cfg.paths.background_root = "backgrounds";
    cfg.paths.foreground_root = "foregrounds";
    cfg.paths.output_root = "dataset";
    std::ofstream(std::filesystem::path(root) / "config.json") << crowdforge::config_to_json(cfg).dump(2) << "\n";
    std::cout << "wrote " << corpus.backgrounds.size() << " backgrounds, " << corpus.foregrounds.size()
              << " foregrounds and config.json to " << root << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
