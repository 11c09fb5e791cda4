// End-to-end checks of the command-line surface: flags, exit codes, report
// fields, and byte-stable outputs.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pups/bitstream.hpp"
#include "pups/image.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using json = nlohmann::json;

namespace {

const char* kCli = PUPS_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args) {
  const std::string out_path = "/tmp/pups_cli_out.txt";
  const std::string cmd = std::string(kCli) + " " + args + " > " + out_path + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  return r;
}

std::string test_image_path() {
  static std::string path = [] {
    const std::string p = "/tmp/pups_cli_input.ppm";
    pups::RgbImage img = pups::make_image(16, 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        img.r(y, x) = (x + y) / 30.0;
        img.g(y, x) = x / 15.0;
        img.b(y, x) = ((x * y) % 7) / 7.0;
      }
    }
    pups::write_ppm(img, p);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with status 1") {
  CHECK(run("encode --output /tmp/x.pups").exit_code == 1);
  CHECK(run("nonsense").exit_code == 1);
  CHECK(run("").exit_code == 1);
}

TEST_CASE("missing input file exits with status 2") {
  CHECK(run("encode --input /tmp/no_such_file.ppm --output /tmp/x.pups --iters 1").exit_code == 2);
  CHECK(run("decode --input /tmp/no_such_file.pups --output /tmp/x.ppm").exit_code == 2);
}

TEST_CASE("encode/decode round trip through the CLI") {
  const std::string img = test_image_path();
  const RunResult enc = run("encode --input " + img +
                            " --output /tmp/pups_cli.pups --iters 60 --lambda 0.004 --seed 5"
                            " --levels 4 --nh 1 --report /tmp/pups_cli_report.json");
  REQUIRE(enc.exit_code == 0);
  const json report = json::parse(enc.out);
  CHECK(report["width"] == 16);
  CHECK(report["bpp"].get<double>() > 0.0);
  CHECK(report["kernel_parameters"] == 2 + 3);  // one K=4 kernel + one K=5 pre-filter
  CHECK(report["macs_per_pixel"]["formula"] == 23.0);
  CHECK(json::parse(slurp("/tmp/pups_cli_report.json")) == report);

  REQUIRE(run("decode --input /tmp/pups_cli.pups --output /tmp/pups_cli_a.ppm").exit_code == 0);
  REQUIRE(run("decode --input /tmp/pups_cli.pups --output /tmp/pups_cli_b.ppm").exit_code == 0);
  CHECK(slurp("/tmp/pups_cli_a.ppm") == slurp("/tmp/pups_cli_b.ppm"));  // deterministic decode

  // The decoder's PPM must be byte-identical to one written from an
  // in-process decode of the same stream (psnr of the two recons = cap).
  pups::DecoderModel model = pups::read_bitstream("/tmp/pups_cli.pups");
  const pups::RgbImage recon = pups::decode_forward(model, true);
  pups::write_ppm(recon, "/tmp/pups_cli_ref.ppm");
  CHECK(slurp("/tmp/pups_cli_a.ppm") == slurp("/tmp/pups_cli_ref.ppm"));
  // The written file differs from the float reconstruction only by 8-bit
  // quantization.
  CHECK(pups::psnr(pups::read_ppm("/tmp/pups_cli_a.ppm"), recon) > 50.0);
}

TEST_CASE("lambda 0 still spends bits on latents") {
  const std::string img = test_image_path();
  const RunResult enc = run("encode --input " + img +
                            " --output /tmp/pups_cli0.pups --iters 40 --lambda 0 --seed 5 --levels 3");
  REQUIRE(enc.exit_code == 0);
  const json report = json::parse(enc.out);
  CHECK(report["rate_bpp_latents"].get<double>() > 0.0);
  CHECK(report["bytes"]["latents"].get<int>() > 0);
  CHECK(report["kernel_parameters"] == 2);  // default: one K=4 kernel, no pre-filter
}

TEST_CASE("legacy and proposed runs share the iteration-0 objective") {
  const std::string img = test_image_path();
  const RunResult legacy = run("encode --input " + img +
                               " --output /tmp/pups_leg.pups --iters 0 --lambda 0.004 --seed 9"
                               " --levels 4 --legacy --kl 4");
  const RunResult proposed = run("encode --input " + img +
                                 " --output /tmp/pups_prop.pups --iters 0 --lambda 0.004 --seed 9"
                                 " --levels 4 --kl 4 --nl 1 --nh 1");
  REQUIRE(legacy.exit_code == 0);
  REQUIRE(proposed.exit_code == 0);
  const json a = json::parse(legacy.out);
  const json b = json::parse(proposed.out);
  CHECK(a["j_initial"].get<double>() == b["j_initial"].get<double>());
  CHECK(a["kernel_parameters"] == 16);
  CHECK(b["kernel_parameters"] == 2 + 3);
}

TEST_CASE("corrupt bitstreams fail cleanly") {
  const std::string img = test_image_path();
  REQUIRE(run("encode --input " + img + " --output /tmp/pups_corrupt.pups --iters 5 --levels 3")
              .exit_code == 0);
  std::string bytes = slurp("/tmp/pups_corrupt.pups");
  bytes[0] = 'X';
  std::ofstream("/tmp/pups_corrupt.pups", std::ios::binary) << bytes;
  CHECK(run("decode --input /tmp/pups_corrupt.pups --output /tmp/x.ppm").exit_code == 2);
}

TEST_CASE("analyze macs prints the closed-form table") {
  const RunResult r = run("analyze macs");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("4,30,23") != std::string::npos);
  CHECK(r.out.find("8,121,45") != std::string::npos);
}

TEST_CASE("analyze freq emits a byte-stable CSV with zero attenuation for dirac") {
  const RunResult a = run("analyze freq --kernel dirac5 --grid 9");
  const RunResult b = run("analyze freq --kernel dirac5 --grid 9");
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
  std::istringstream in(a.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "f1,f2,mag_db");
  while (std::getline(in, line)) {
    CHECK(line.substr(line.rfind(',') + 1) == "0.000000");
  }
  CHECK(run("analyze freq --kernel taps=1,2,3").exit_code == 1);  // not symmetric
}

TEST_CASE("bdrate subcommand reproduces the constant-offset value") {
  std::ofstream("/tmp/pups_anchor.csv") << "bpp,psnr\n0.1,30\n0.3,33\n0.6,36\n1.0,39\n";
  std::ofstream("/tmp/pups_test.csv") << "bpp,psnr\n0.11,30\n0.33,33\n0.66,36\n1.1,39\n";
  const RunResult r = run("bdrate --anchor /tmp/pups_anchor.csv --test /tmp/pups_test.csv");
  REQUIRE(r.exit_code == 0);
  CHECK(std::abs(std::stod(r.out) - 10.0) < 1e-6);

  std::ofstream("/tmp/pups_far.csv") << "bpp,psnr\n0.1,80\n0.3,83\n0.6,86\n1.0,89\n";
  CHECK(run("bdrate --anchor /tmp/pups_anchor.csv --test /tmp/pups_far.csv").exit_code == 3);
}

TEST_CASE("options load from a key=value config file") {
  const std::string img = test_image_path();
  std::ofstream("/tmp/pups_cli.cfg") << "iters=15\nlambda=0.004\nseed=2\nlevels=3\n";
  const RunResult r = run("encode --config /tmp/pups_cli.cfg --input " + img +
                          " --output /tmp/pups_cfg.pups");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["config"]["iterations"] == 15);
  CHECK(report["config"]["lambda"] == 0.004);
  CHECK(report["config"]["seed"] == 2);
}

TEST_CASE("analyze freq reads kernels back out of a bitstream") {
  const std::string img = test_image_path();
  REQUIRE(run("encode --input " + img +
              " --output /tmp/pups_freq.pups --iters 5 --levels 3 --nh 1 --kh 5")
              .exit_code == 0);
  CHECK(run("analyze freq --bitstream /tmp/pups_freq.pups --branch h --index 0 --grid 5")
            .exit_code == 0);
  CHECK(run("analyze freq --bitstream /tmp/pups_freq.pups --branch l --index 7 --grid 5")
            .exit_code == 1);  // index out of range
}

TEST_CASE("experiment subcommand writes a deterministic results table") {
  const std::string img = test_image_path();
  const std::string cmd = "experiment --images " + img +
                          " --lambdas 0.001 0.02 --iters 10 --seed 4 --levels 3"
                          " --preset exp2a --out /tmp/pups_exp.csv --jobs 2";
  REQUIRE(run(cmd).exit_code == 0);
  const std::string first = slurp("/tmp/pups_exp.csv");
  REQUIRE(run(cmd).exit_code == 0);
  CHECK(slurp("/tmp/pups_exp.csv") == first);  // byte-stable across runs
  CHECK(first.find("point,exp2a") != std::string::npos);
  CHECK(first.find("point,legacy4") != std::string::npos);
  CHECK(first.find("insufficient points") != std::string::npos);  // 2 lambdas < 4 points
}
