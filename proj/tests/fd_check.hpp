// Finite-difference verification of the decoder gradients, shared by the
// unit tests and the acceptance suite. Framework-free: returns the worst
// offenders instead of asserting.
#pragma once

#include "oracles.hpp"
#include "pups/decoder.hpp"

#include <string>
#include <vector>

namespace fd_check {

struct Param {
  std::string name;
  double* value;
  double grad;
};

inline std::vector<Param> enumerate_parameters(pups::DecoderModel& model,
                                                const pups::ModelGradients& grads) {
  using pups::Plane;
  std::vector<Param> list;
  auto add = [&](const std::string& name, double* v, double g) { list.push_back({name, v, g}); };
  for (size_t n = 0; n < model.pyramid.levels.size(); ++n) {
    Plane& level = model.pyramid.levels[n];
    for (Eigen::Index i = 0; i < level.size(); ++i) {
      add("latent" + std::to_string(n) + "/" + std::to_string(i), level.data() + i,
          grads.pyramid[n].data()[i]);
    }
  }
  if (model.kind == pups::UpsamplerKind::kSeparable) {
    for (size_t k = 0; k < model.upsampler.l_kernels.size(); ++k) {
      for (Eigen::Index i = 0; i < model.upsampler.l_kernels[k].half_taps.size(); ++i) {
        add("l" + std::to_string(k) + "/" + std::to_string(i),
            model.upsampler.l_kernels[k].half_taps.data() + i, grads.l_half_taps[k][i]);
      }
    }
    for (size_t k = 0; k < model.upsampler.h_kernels.size(); ++k) {
      for (Eigen::Index i = 0; i < model.upsampler.h_kernels[k].half_taps.size(); ++i) {
        add("h" + std::to_string(k) + "/" + std::to_string(i),
            model.upsampler.h_kernels[k].half_taps.data() + i, grads.h_half_taps[k][i]);
      }
    }
  } else {
    for (Eigen::Index i = 0; i < model.legacy_kernel.taps.size(); ++i) {
      add("legacy/" + std::to_string(i), model.legacy_kernel.taps.data() + i,
          grads.legacy_taps.data()[i]);
    }
  }
  for (size_t l = 0; l < model.synthesis.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < model.synthesis.weights[l].size(); ++i) {
      add("w" + std::to_string(l) + "/" + std::to_string(i), model.synthesis.weights[l].data() + i,
          grads.weights[l].data()[i]);
    }
    for (Eigen::Index i = 0; i < model.synthesis.biases[l].size(); ++i) {
      add("b" + std::to_string(l) + "/" + std::to_string(i), model.synthesis.biases[l].data() + i,
          grads.biases[l][i]);
    }
  }
  for (Eigen::Index n = 0; n < model.rate.log_scale.size(); ++n) {
    add("log_scale/" + std::to_string(n), model.rate.log_scale.data() + n, grads.log_scale[n]);
  }
  return list;
}

struct Report {
  int checked = 0;
  std::vector<std::string> failures;
  double worst_rel = 0.0;

  bool ok() const { return failures.empty(); }
};

// Central differences (h=1e-4) against the reverse-mode gradients; a
// parameter fails if |fd - grad| exceeds max(abs_floor, rel_tol*max(|fd|,|grad|)).
inline Report run(pups::DecoderModel model, const pups::RgbImage& target, double lambda,
                  pups::LatentMode mode, const pups::LatentPyramid* noise, double rel_tol = 1e-3,
                  double abs_floor = 1e-8) {
  Report report;
  const pups::ModelGradients grads =
      pups::backward(model, target, lambda, mode, noise, pups::TrainMask{});
  std::vector<Param> params = enumerate_parameters(model, grads);
  auto eval = [&]() { return pups::loss(model, target, lambda, mode, noise).j; };
  for (const Param& p : params) {
    const double fd = oracles::central_difference(eval, p.value, 1e-4);
    const double scale = std::max(std::abs(fd), std::abs(p.grad));
    const double err = std::abs(fd - p.grad);
    if (scale > 0.0) report.worst_rel = std::max(report.worst_rel, err / std::max(scale, abs_floor));
    if (err > std::max(abs_floor, rel_tol * scale)) {
      report.failures.push_back(p.name + ": fd=" + std::to_string(fd) +
                                " grad=" + std::to_string(p.grad));
    }
    ++report.checked;
  }
  return report;
}

}  // namespace fd_check
