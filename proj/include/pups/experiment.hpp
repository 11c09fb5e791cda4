#pragma once

#include "pups/decoder.hpp"
#include "pups/rd.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace pups {

// One decoder configuration of the experiment grid. The grid mirrors the
// reference layout: legacy non-separable baselines, separable kernels with
// and without the pre-filter branch, and extended per-level filter banks.
struct ExperimentConfig {
  std::string name;
  bool legacy = false;
  int n_l = 1;
  int k_l = 4;
  int n_h = 0;
  int k_h = 5;
};

// legacy4, legacy8, exp1a, exp1b, exp2a, exp2b, exp3a, exp3b.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

constexpr double kPaperLambdas[5] = {0.0001, 0.0004, 0.0010, 0.0040, 0.0200};

struct ExperimentRunSpec {
  std::vector<std::string> images;
  std::vector<double> lambdas{std::begin(kPaperLambdas), std::end(kPaperLambdas)};
  int iterations = 2000;
  std::uint64_t seed = 0;
  int levels = 7;
  std::vector<int> hidden{8};
  std::string anchor = "legacy4";
  std::string config = "exp3b";
  int jobs = 0;  // 0 -> hardware concurrency
};

struct JobResult {
  std::string config;
  std::string image;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double bpp = 0.0;
  double psnr_db = 0.0;
  double j = 0.0;
  double d_mse = 0.0;
  double rate_bpp = 0.0;
  bool failed = false;
  std::string error;
};

struct BdRow {
  std::string config;
  std::string image;  // image name or "mean"
  bool valid = false;
  double bd_percent = 0.0;
  std::string note;  // e.g. "insufficient points"
};

struct ExperimentResult {
  std::vector<JobResult> rows;  // sorted by (config, image, lambda)
  std::vector<BdRow> bd_rows;   // test config vs anchor, per image plus mean
  bool partial = false;
};

// Trains every (config, image, lambda) job, in parallel over independent
// jobs; per-job seeds derive from the base seed so results do not depend on
// scheduling.
ExperimentResult run_experiment(const ExperimentRunSpec& spec);

void write_experiment_csv(const ExperimentResult& result, std::ostream& out);

// Builds a DecoderModel for one configuration.
DecoderModel make_config_model(const ExperimentConfig& config, int width, int height, int levels,
                               const std::vector<int>& hidden, std::uint64_t seed);

}  // namespace pups
