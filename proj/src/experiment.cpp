#include "pups/experiment.hpp"

#include "pups/bitstream.hpp"
#include "pups/image.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <thread>

namespace pups {

ExperimentConfig preset(const std::string& name) {
  static const std::map<std::string, ExperimentConfig> kPresets = {
      {"legacy4", {"legacy4", true, 1, 4, 0, 0}},
      {"legacy8", {"legacy8", true, 1, 8, 0, 0}},
      {"exp1a", {"exp1a", false, 1, 4, 0, 0}},
      {"exp1b", {"exp1b", false, 1, 8, 0, 0}},
      {"exp2a", {"exp2a", false, 1, 4, 1, 5}},
      {"exp2b", {"exp2b", false, 1, 8, 1, 5}},
      {"exp3a", {"exp3a", false, 6, 8, 6, 5}},
      {"exp3b", {"exp3b", false, 6, 8, 6, 7}},
  };
  const auto it = kPresets.find(name);
  require(it != kPresets.end(), ErrorCode::kInvalidArgument, "unknown preset: " + name);
  return it->second;
}

std::vector<std::string> preset_names() {
  return {"legacy4", "legacy8", "exp1a", "exp1b", "exp2a", "exp2b", "exp3a", "exp3b"};
}

DecoderModel make_config_model(const ExperimentConfig& config, int width, int height, int levels,
                               const std::vector<int>& hidden, std::uint64_t seed) {
  if (config.legacy) {
    return make_legacy_model(width, height, levels, config.k_l, hidden, seed);
  }
  const int n_l = std::min(config.n_l, levels);
  const int n_h = std::min(config.n_h, levels);
  return make_decoder_model(width, height, levels, n_l, config.k_l, n_h, config.k_h, hidden, seed);
}

namespace {

JobResult run_job(const ExperimentConfig& config, const std::string& image_path,
                  const RgbImage& image, double lambda, int iterations, int levels,
                  const std::vector<int>& hidden, std::uint64_t seed) {
  JobResult row;
  row.config = config.name;
  row.image = image_path;
  row.lambda = lambda;
  row.seed = seed;
  try {
    DecoderModel model = make_config_model(config, image.width(), image.height(), levels, hidden, seed);
    TrainConfig tc;
    tc.lambda = lambda;
    tc.iterations = iterations;
    tc.seed = seed;
    TrainResult trained = train(std::move(model), image, tc);
    BitstreamReport report;
    serialize_bitstream(trained.model, &report);  // quantizes parameters in place
    const RgbImage recon = decode_forward(trained.model, true);
    const LossBreakdown final_loss = loss(trained.model, image, lambda, LatentMode::kRound);
    row.bpp = report.bpp;
    row.psnr_db = psnr(recon, image);
    row.j = final_loss.j;
    row.d_mse = final_loss.d_mse;
    row.rate_bpp = final_loss.rate_bpp;
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

BdRow bd_row_for(const std::string& config, const std::string& image, const RdCurve& anchor,
                 const RdCurve& test) {
  BdRow row;
  row.config = config;
  row.image = image;
  if (anchor.size() < 4 || test.size() < 4) {
    row.note = "insufficient points";
    return row;
  }
  try {
    row.bd_percent = bd_rate_percent(anchor, test);
    row.valid = true;
  } catch (const Error& e) {
    row.note = e.what();
  }
  return row;
}

RdCurve curve_from_rows(const std::vector<JobResult>& rows, const std::string& config,
                        const std::string& image) {
  RdCurve curve;
  for (const JobResult& row : rows) {
    if (row.failed || row.config != config || row.image != image) continue;
    curve.push_back({row.bpp, row.psnr_db});
  }
  std::sort(curve.begin(), curve.end(), [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  return curve;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentRunSpec& spec) {
  require(!spec.images.empty(), ErrorCode::kInvalidArgument, "experiment needs at least one image");
  require(!spec.lambdas.empty(), ErrorCode::kInvalidArgument, "experiment needs at least one lambda");
  const ExperimentConfig anchor = preset(spec.anchor);
  const ExperimentConfig config = preset(spec.config);
  require(anchor.name != config.name, ErrorCode::kInvalidArgument,
          "anchor and test configuration must differ");

  std::vector<RgbImage> images;
  images.reserve(spec.images.size());
  for (const std::string& path : spec.images) images.push_back(read_ppm(path));

  struct Job {
    const ExperimentConfig* config;
    int image_index;
    double lambda;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  const ExperimentConfig* configs[2] = {&anchor, &config};
  for (int c = 0; c < 2; ++c) {
    for (size_t i = 0; i < images.size(); ++i) {
      for (size_t l = 0; l < spec.lambdas.size(); ++l) {
        std::uint64_t state = spec.seed ^ (0x9e3779b9ull * (c + 1));
        splitmix64(state);
        state ^= 0x1000003ull * (i + 1) + 0x100000001b3ull * (l + 1);
        jobs.push_back({configs[c], static_cast<int>(i), spec.lambdas[l], splitmix64(state)});
      }
    }
  }

  std::vector<JobResult> rows(jobs.size());
  const int workers = std::max(1, spec.jobs > 0 ? spec.jobs
                                                : static_cast<int>(std::thread::hardware_concurrency()));
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) break;
      const Job& job = jobs[idx];
      rows[idx] = run_job(*job.config, spec.images[job.image_index], images[job.image_index],
                          job.lambda, spec.iterations, spec.levels, spec.hidden, job.seed);
    }
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  ExperimentResult result;
  result.rows = std::move(rows);
  std::sort(result.rows.begin(), result.rows.end(), [](const JobResult& a, const JobResult& b) {
    if (a.config != b.config) return a.config < b.config;
    if (a.image != b.image) return a.image < b.image;
    return a.lambda < b.lambda;
  });
  for (const JobResult& row : result.rows) {
    if (row.failed) result.partial = true;
  }

  double bd_sum = 0.0;
  int bd_count = 0;
  for (const std::string& image : spec.images) {
    const RdCurve anchor_curve = curve_from_rows(result.rows, anchor.name, image);
    const RdCurve test_curve = curve_from_rows(result.rows, config.name, image);
    BdRow row = bd_row_for(config.name, image, anchor_curve, test_curve);
    if (row.valid) {
      bd_sum += row.bd_percent;
      ++bd_count;
    }
    result.bd_rows.push_back(std::move(row));
  }
  BdRow mean;
  mean.config = config.name;
  mean.image = "mean";
  if (bd_count > 0) {
    mean.valid = true;
    mean.bd_percent = bd_sum / bd_count;
  } else {
    mean.note = "no valid per-image BD-rate";
  }
  result.bd_rows.push_back(std::move(mean));
  return result;
}

void write_experiment_csv(const ExperimentResult& result, std::ostream& out) {
  out << "kind,config,image,lambda,seed,bpp,psnr_db,j,d_mse,rate_bpp,status\n";
  char line[512];
  for (const JobResult& row : result.rows) {
    if (row.failed) {
      std::snprintf(line, sizeof(line), "point,%s,%s,%.6g,%llu,,,,,,failed: %s\n", row.config.c_str(),
                    row.image.c_str(), row.lambda, static_cast<unsigned long long>(row.seed),
                    row.error.c_str());
    } else {
      std::snprintf(line, sizeof(line), "point,%s,%s,%.6g,%llu,%.8g,%.4f,%.10g,%.10g,%.8g,ok\n",
                    row.config.c_str(), row.image.c_str(), row.lambda,
                    static_cast<unsigned long long>(row.seed), row.bpp, row.psnr_db, row.j, row.d_mse,
                    row.rate_bpp);
    }
    out << line;
  }
  for (const BdRow& row : result.bd_rows) {
    if (row.valid) {
      std::snprintf(line, sizeof(line), "bdrate,%s,%s,,,,,,,,%.6f%%\n", row.config.c_str(),
                    row.image.c_str(), row.bd_percent);
    } else {
      std::snprintf(line, sizeof(line), "bdrate,%s,%s,,,,,,,,%s\n", row.config.c_str(),
                    row.image.c_str(), row.note.c_str());
    }
    out << line;
  }
  out << (result.partial ? "summary,,,,,,,,,,partial\n" : "summary,,,,,,,,,,complete\n");
}

}  // namespace pups
