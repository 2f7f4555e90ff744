#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace looptune::cli {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct TuneOptions {
  fs::path space;
  fs::path eval_spec;
  fs::path out;
  std::size_t max_evals = 100;
  std::string learner = "RF";
  double kappa = 1.96;
  std::optional<std::uint64_t> seed;
  std::optional<double> timeout_minutes;
  std::string evaluator = "subprocess";
  std::size_t batch_size = 512;
  std::optional<std::size_t> n_init;
  bool resume = false;
  bool quiet = false;
};

struct MctreeOptions {
  fs::path source;
  fs::path loops;
  fs::path out;
  fs::path eval_spec;
  std::vector<std::string> command;  // compile command words
  std::string run = "{binary}";
  std::optional<double> timeout_seconds;
  bool keep = false;
  std::vector<int> tile_choices;  // empty: the eval spec's list, else the default
  std::size_t budget = 200;
  std::size_t max_depth = 4;
  std::size_t max_band = 3;
  std::uint64_t seed = 1234;
  std::string metric = "stdout_last_number";
  std::string metric_pattern;
  std::vector<std::string> env;  // KEY=VALUE
  int repeats = 1;
  bool quiet = false;
};

struct AnalyzeOptions {
  std::vector<fs::path> run_dirs;
  fs::path plot;
  int rerun_repeats = 0;
};

struct SpaceOptions {
  std::string action;  // validate | count | sample
  fs::path file;
  std::size_t count = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_tune(const TuneOptions& options, Streams io);
int cmd_mctree(const MctreeOptions& options, Streams io);
int cmd_analyze(const AnalyzeOptions& options, Streams io);
int cmd_space(const SpaceOptions& options, Streams io);

void write_json_file(const fs::path& path, const nlohmann::ordered_json& doc);
nlohmann::json read_json_file(const fs::path& path);
// Prints `doc` as the final stdout line.
void emit(Streams io, const nlohmann::ordered_json& doc);

}  // namespace looptune::cli
