// pups: overfitted pyramidal-upsampling image codec and analysis CLI.

#include "pups/bitstream.hpp"
#include "pups/decoder.hpp"
#include "pups/experiment.hpp"
#include "pups/image.hpp"
#include "pups/kernels.hpp"
#include "pups/rd.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using json = nlohmann::ordered_json;

namespace {

int exit_code_for(const pups::Error& e) {
  switch (e.code()) {
    case pups::ErrorCode::kInvalidArgument:
      return 1;
    case pups::ErrorCode::kIoError:
    case pups::ErrorCode::kMalformedHeader:
    case pups::ErrorCode::kTruncatedPayload:
    case pups::ErrorCode::kUnsupportedMaxval:
    case pups::ErrorCode::kCorruptBitstream:
    case pups::ErrorCode::kVersionMismatch:
      return 2;
    default:
      return 3;
  }
}

struct EncodeOptions {
  std::string input, output, report_path, trace_path;
  double lambda = 0.001;
  int levels = 7;
  int k_l = 4, k_h = 5, n_l = 1, n_h = 0;
  int iterations = 2000;
  std::uint64_t seed = 0;
  bool legacy = false;
  std::vector<int> hidden{8};
};

int cmd_encode(const EncodeOptions& opt) {
  const pups::RgbImage image = pups::read_ppm(opt.input);
  pups::DecoderModel model;
  if (opt.legacy) {
    model = pups::make_legacy_model(image.width(), image.height(), opt.levels, opt.k_l, opt.hidden,
                                    opt.seed);
  } else {
    model = pups::make_decoder_model(image.width(), image.height(), opt.levels, opt.n_l, opt.k_l,
                                     opt.n_h, opt.k_h, opt.hidden, opt.seed);
  }

  pups::TrainConfig tc;
  tc.lambda = opt.lambda;
  tc.iterations = opt.iterations;
  tc.seed = opt.seed;
  pups::TrainResult trained = pups::train(std::move(model), image, tc);

  const pups::BitstreamReport report = pups::write_bitstream(trained.model, opt.output);
  const pups::RgbImage recon = pups::decode_forward(trained.model, true);
  const pups::LossBreakdown final_loss = pups::loss(trained.model, image, opt.lambda,
                                                    pups::LatentMode::kRound);

  const double macs_formula = opt.legacy ? pups::macs_nonseparable(opt.k_l)
                                         : pups::macs_separable(opt.k_l);
  const double macs_empirical =
      opt.legacy ? pups::count_macs_legacy(image.width(), image.height(), opt.levels, opt.k_l)
                 : pups::count_macs(image.width(), image.height(), opt.levels,
                                    trained.model.upsampler);

  json j;
  j["input"] = opt.input;
  j["output"] = opt.output;
  j["width"] = image.width();
  j["height"] = image.height();
  j["config"] = {{"legacy", opt.legacy}, {"levels", opt.levels},  {"n_l", opt.legacy ? 0 : opt.n_l},
                 {"k_l", opt.k_l},       {"n_h", opt.legacy ? 0 : opt.n_h},
                 {"k_h", opt.k_h},       {"lambda", opt.lambda},  {"iterations", opt.iterations},
                 {"seed", opt.seed}};
  j["j_initial"] = trained.trace.front().j;
  j["j"] = final_loss.j;
  j["d_mse"] = final_loss.d_mse;
  j["psnr_db"] = pups::psnr(recon, image);
  j["rate_bpp_latents"] = final_loss.rate_bpp;
  j["bpp"] = report.bpp;
  j["bytes"] = {{"total", report.total_bytes},
                {"header", report.header_bytes},
                {"parameters", report.param_bytes},
                {"latents", report.latent_bytes}};
  j["macs_per_pixel"] = {{"formula", macs_formula}, {"empirical", macs_empirical}};
  j["kernel_parameters"] = pups::kernel_parameter_count(trained.model);
  // Filter taps and network weights are excluded from the training objective;
  // their cost enters only through the serialized parameter bytes above.
  j["parameter_rate_in_objective"] = false;

  const std::string text = j.dump(2);
  std::cout << text << "\n";
  if (!opt.report_path.empty()) {
    std::ofstream f(opt.report_path);
    pups::require(f.good(), pups::ErrorCode::kIoError, "cannot write " + opt.report_path);
    f << text << "\n";
  }
  if (!opt.trace_path.empty()) {
    std::ofstream f(opt.trace_path);
    pups::require(f.good(), pups::ErrorCode::kIoError, "cannot write " + opt.trace_path);
    pups::write_trace_csv(trained.trace, f);
  }
  return 0;
}

int cmd_decode(const std::string& input, const std::string& output) {
  pups::DecoderModel model = pups::read_bitstream(input);
  pups::write_ppm(pups::decode_forward(model, true), output);
  return 0;
}

pups::SymmetricKernel1D parse_kernel_spec(const std::string& spec) {
  if (spec == "bilinear4") return pups::bilinear_init(4);
  if (spec == "bicubic8") return pups::bicubic_init(8);
  if (spec.rfind("dirac", 0) == 0) {
    const int k = std::atoi(spec.c_str() + 5);
    return pups::dirac_kernel(k);
  }
  if (spec.rfind("taps=", 0) == 0) {
    std::vector<double> taps;
    std::stringstream ss(spec.substr(5));
    std::string item;
    while (std::getline(ss, item, ',')) taps.push_back(std::stod(item));
    const int k = static_cast<int>(taps.size());
    pups::require(k >= 1, pups::ErrorCode::kInvalidArgument, "empty tap list");
    Eigen::VectorXd half(pups::half_tap_count(k));
    for (int i = 0; i < half.size(); ++i) {
      pups::require(taps[i] == taps[k - 1 - i], pups::ErrorCode::kInvalidArgument,
                    "tap list must be symmetric");
      half[i] = taps[i];
    }
    return pups::make_symmetric_kernel(k, std::move(half));
  }
  pups::fail(pups::ErrorCode::kInvalidArgument, "unknown kernel spec: " + spec);
}

int cmd_analyze_freq(const std::string& kernel_spec, const std::string& bitstream,
                     const std::string& branch, int index, int grid, const std::string& out_path) {
  pups::SymmetricKernel1D kernel;
  if (!bitstream.empty()) {
    pups::DecoderModel model = pups::read_bitstream(bitstream);
    pups::require(model.kind == pups::UpsamplerKind::kSeparable, pups::ErrorCode::kInvalidArgument,
                  "legacy bitstreams carry no separable kernels");
    const auto& bank = branch == "h" ? model.upsampler.h_kernels : model.upsampler.l_kernels;
    pups::require(index >= 0 && index < static_cast<int>(bank.size()),
                  pups::ErrorCode::kInvalidArgument, "kernel index out of range");
    kernel = bank[index];
  } else {
    kernel = parse_kernel_spec(kernel_spec);
  }

  const pups::FrequencyResponse response = pups::frequency_response(kernel, grid);
  if (out_path.empty() || out_path == "-") {
    pups::write_frequency_csv(response, std::cout);
  } else {
    std::ofstream f(out_path);
    pups::require(f.good(), pups::ErrorCode::kIoError, "cannot write " + out_path);
    pups::write_frequency_csv(response, f);
  }

  const Eigen::VectorXd taps = materialize(kernel);
  json j;
  j["taps"] = std::vector<double>(taps.data(), taps.data() + kernel.length);
  j["cutoff_3db"] = pups::cutoff_frequency(kernel, -3.0);
  j["cutoff_6db"] = pups::cutoff_frequency(kernel, -6.0);
  std::cerr << j.dump(2) << "\n";
  return 0;
}

int cmd_analyze_macs(const std::vector<int>& ks, const std::string& out_path) {
  std::ostringstream table;
  table << "k,macs_nonseparable,macs_separable\n";
  for (int k : ks) {
    table << k << "," << pups::macs_nonseparable(k) << "," << pups::macs_separable(k) << "\n";
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << table.str();
  } else {
    std::ofstream f(out_path);
    pups::require(f.good(), pups::ErrorCode::kIoError, "cannot write " + out_path);
    f << table.str();
  }
  return 0;
}

pups::RdCurve read_curve_csv(const std::string& path) {
  std::ifstream f(path);
  pups::require(f.good(), pups::ErrorCode::kIoError, "cannot open " + path);
  pups::RdCurve curve;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    double bpp, db;
    if (std::sscanf(line.c_str(), "%lf,%lf", &bpp, &db) == 2) curve.push_back({bpp, db});
  }
  return curve;
}

int cmd_bdrate(const std::string& anchor_path, const std::string& test_path) {
  const pups::RdCurve anchor = read_curve_csv(anchor_path);
  const pups::RdCurve test = read_curve_csv(test_path);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", pups::bd_rate_percent(anchor, test));
  std::cout << buf << "\n";
  return 0;
}

int cmd_experiment(const pups::ExperimentRunSpec& spec, const std::string& out_path) {
  const pups::ExperimentResult result = pups::run_experiment(spec);
  if (out_path.empty() || out_path == "-") {
    pups::write_experiment_csv(result, std::cout);
  } else {
    std::ofstream f(out_path);
    pups::require(f.good(), pups::ErrorCode::kIoError, "cannot write " + out_path);
    pups::write_experiment_csv(result, f);
  }
  for (const pups::BdRow& row : result.bd_rows) {
    if (row.image == "mean") {
      if (row.valid) {
        std::cout << "bd-rate(" << row.config << " vs anchor) mean: " << row.bd_percent << "%\n";
      } else {
        std::cout << "bd-rate(" << row.config << " vs anchor) mean: " << row.note << "\n";
      }
    }
  }
  return result.partial ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"overfitted pyramidal-upsampling image codec"};
  app.require_subcommand(1);

  EncodeOptions enc;
  CLI::App* encode = app.add_subcommand("encode", "train a decoder on one image and write a bitstream");
  encode->set_config("--config", "", "key=value configuration file");
  encode->add_option("--input", enc.input, "input PPM (P6)")->required();
  encode->add_option("--output", enc.output, "output bitstream path")->required();
  encode->add_option("--lambda", enc.lambda, "rate weight");
  encode->add_option("--levels", enc.levels, "pyramid levels");
  encode->add_option("--kl", enc.k_l, "upsampler kernel length (4 or 8)");
  encode->add_option("--kh", enc.k_h, "pre-filter kernel length (odd)");
  encode->add_option("--nl", enc.n_l, "number of upsampler kernels");
  encode->add_option("--nh", enc.n_h, "number of pre-filters (0 disables the branch)");
  encode->add_option("--iters", enc.iterations, "training iterations");
  encode->add_option("--seed", enc.seed, "training seed");
  encode->add_option("--hidden", enc.hidden, "synthesis hidden widths");
  encode->add_flag("--legacy", enc.legacy, "non-separable baseline upsampler");
  encode->add_option("--report", enc.report_path, "also write the JSON report here");
  encode->add_option("--trace", enc.trace_path, "write the RD training trace CSV here");

  std::string dec_input, dec_output;
  CLI::App* decode = app.add_subcommand("decode", "decode a bitstream to a PPM image");
  decode->add_option("--input", dec_input, "input bitstream")->required();
  decode->add_option("--output", dec_output, "output PPM path")->required();

  CLI::App* analyze = app.add_subcommand("analyze", "kernel analysis tools");
  analyze->require_subcommand(1);
  std::string freq_kernel = "bilinear4", freq_bitstream, freq_branch = "l", freq_out;
  int freq_index = 0, freq_grid = 64;
  CLI::App* freq = analyze->add_subcommand("freq", "frequency response CSV and cutoffs");
  freq->add_option("--kernel", freq_kernel, "bilinear4 | bicubic8 | dirac<K> | taps=a,b,...");
  freq->add_option("--bitstream", freq_bitstream, "read the kernel from a bitstream");
  freq->add_option("--branch", freq_branch, "l or h (with --bitstream)");
  freq->add_option("--index", freq_index, "kernel index (with --bitstream)");
  freq->add_option("--grid", freq_grid, "grid size per axis");
  freq->add_option("--out", freq_out, "CSV path (default stdout)");
  std::vector<int> macs_ks{4, 8};
  std::string macs_out;
  CLI::App* macs = analyze->add_subcommand("macs", "MAC-per-pixel table");
  macs->add_option("--k", macs_ks, "kernel sizes");
  macs->add_option("--out", macs_out, "CSV path (default stdout)");

  std::string bd_anchor, bd_test;
  CLI::App* bdrate = app.add_subcommand("bdrate", "BD-rate between two bpp,psnr CSV curves");
  bdrate->add_option("--anchor", bd_anchor, "anchor curve CSV")->required();
  bdrate->add_option("--test", bd_test, "test curve CSV")->required();

  pups::ExperimentRunSpec spec;
  std::string exp_out;
  CLI::App* experiment = app.add_subcommand("experiment", "train a configuration grid and report BD-rate");
  experiment->set_config("--config", "", "key=value configuration file");
  experiment->add_option("--images", spec.images, "input PPM images")->required();
  experiment->add_option("--lambdas", spec.lambdas, "rate weights");
  experiment->add_option("--iters", spec.iterations, "training iterations per job");
  experiment->add_option("--seed", spec.seed, "base seed");
  experiment->add_option("--levels", spec.levels, "pyramid levels");
  experiment->add_option("--hidden", spec.hidden, "synthesis hidden widths");
  experiment->add_option("--anchor", spec.anchor, "anchor preset");
  experiment->add_option("--preset", spec.config, "test preset");
  experiment->add_option("--jobs", spec.jobs, "parallel jobs (0 = hardware)");
  experiment->add_option("--out", exp_out, "results CSV path (default stdout)");

  try {
    app.parse(argc, argv);
    if (*encode) return cmd_encode(enc);
    if (*decode) return cmd_decode(dec_input, dec_output);
    if (*freq) return cmd_analyze_freq(freq_kernel, freq_bitstream, freq_branch, freq_index,
                                       freq_grid, freq_out);
    if (*macs) return cmd_analyze_macs(macs_ks, macs_out);
    if (*bdrate) return cmd_bdrate(bd_anchor, bd_test);
    if (*experiment) return cmd_experiment(spec, exp_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const pups::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
