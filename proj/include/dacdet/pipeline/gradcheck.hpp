#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacdet/detnet/model.hpp"
#include "dacdet/losses/losses.hpp"

namespace dacdet::pipeline {

struct GradCheckConfig {
  int image_size = 16;
  int batch = 2;
  uint64_t seed = 1;
  double fd_step = 1e-6;
  double tolerance = 1e-6;
  losses::DacConfig dac;
  detnet::ModelConfig model = detnet::ModelConfig::tiny();
};

/// Max relative error of one loss component over one parameter tensor.
struct ParamError {
  std::string param;
  double max_rel_error = 0;
};

struct ComponentCheck {
  std::string component;  // l_cls, l_loc, l_obj, l_dac, total
  double max_rel_error = 0;
  std::string worst_param;
  std::vector<ParamError> per_param;
  std::vector<std::string> failing_params;
};

struct GradCheckReport {
  std::vector<ComponentCheck> components;
  int64_t n_parameters = 0;
  double tolerance = 0;
  double seconds = 0;
  bool passed = false;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Compares reverse-mode gradients of every loss component against central
/// finite differences in f64 on random images and boxes. The relative error
/// of one entry is |g_a - g_fd| / max(1, |g_a|, |g_fd|).
GradCheckReport grad_check(const GradCheckConfig& cfg = {});

}  // namespace dacdet::pipeline
