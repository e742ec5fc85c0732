#include "dacdet/pipeline/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dacdet/ad/ops.hpp"
#include "dacdet/common/rng.hpp"
#include "dacdet/pipeline/trainer.hpp"

namespace dacdet::pipeline {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 5> kComponents{"l_cls", "l_loc", "l_obj", "l_dac", "total"};

std::array<ad::Tensor<double>, 5> component_tensors(const losses::LossTerms<double>& t) {
  return {t.l_cls, t.l_loc, t.l_obj, t.l_dac, t.total};
}

Image random_image(int size, Rng& rng) {
  Image img(3, size, size);
  for (float& p : img.pixels) p = static_cast<float>(uniform(rng, 0.0, 1.0));
  return img;
}

std::vector<Box> random_boxes(Rng& rng) {
  std::vector<Box> boxes;
  const int n = uniform_int(rng, 1, 3);
  for (int i = 0; i < n; ++i) {
    const double w = uniform(rng, 0.15, 0.6);
    const double h = uniform(rng, 0.15, 0.6);
    boxes.push_back(Box{uniform_int(rng, 0, kNumClasses - 1), uniform(rng, w / 2, 1 - w / 2),
                        uniform(rng, h / 2, 1 - h / 2), w, h});
  }
  return boxes;
}

}  // namespace

json GradCheckReport::to_json() const {
  json comps = json::array();
  for (const auto& c : components) {
    json per = json::object();
    for (const auto& p : c.per_param) per[p.param] = p.max_rel_error;
    comps.push_back(json{{"component", c.component},
                         {"max_rel_error", c.max_rel_error},
                         {"worst_param", c.worst_param},
                         {"failing_params", c.failing_params},
                         {"per_param", per}});
  }
  return json{{"passed", passed},     {"tolerance", tolerance}, {"n_parameters", n_parameters},
              {"seconds", seconds},   {"components", comps}};
}

std::string GradCheckReport::to_text() const {
  std::string s;
  char buf[256];
  for (const auto& c : components) {
    std::snprintf(buf, sizeof buf, "%-6s max_rel_error %.3e (worst: %s) %s\n", c.component.c_str(), c.max_rel_error,
                  c.worst_param.c_str(), c.failing_params.empty() ? "ok" : "FAIL");
    s += buf;
    for (const auto& f : c.failing_params) s += "    failing parameter: " + f + "\n";
  }
  std::snprintf(buf, sizeof buf, "%lld parameters, tolerance %.1e, %.1fs: %s\n", static_cast<long long>(n_parameters),
                tolerance, seconds, passed ? "PASS" : "FAIL");
  s += buf;
  return s;
}

GradCheckReport grad_check(const GradCheckConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.batch < 2 && cfg.dac.lambda != 0) throw std::invalid_argument("grad_check: batch must be >= 2");
  if (!(cfg.fd_step > 0) || !(cfg.tolerance > 0)) throw std::invalid_argument("grad_check: invalid step/tolerance");

  Rng rng(derive_seed(cfg.seed, 0x67726164));  // "grad"
  detnet::DetectorModel<double> model(cfg.model, derive_seed(cfg.seed, 0x6d6f646c));
  std::vector<augment::DetSample> det;
  std::vector<Image> x_h, x_l;
  for (int i = 0; i < cfg.batch; ++i) {
    det.push_back({random_image(cfg.image_size, rng), random_boxes(rng)});
    x_h.push_back(det.back().image);
    x_l.push_back(random_image(cfg.image_size, rng));
  }
  auto forward = [&] { return compute_loss_terms(model, det, x_h, x_l, cfg.dac); };

  auto& params = model.parameters();
  // Analytic gradients, one backward pass per component.
  std::vector<std::vector<std::vector<double>>> analytic(kComponents.size());
  for (std::size_t c = 0; c < kComponents.size(); ++c) {
    model.zero_grads();
    auto tensors = component_tensors(forward());
    ad::backward(tensors[c]);
    for (const auto& p : params) {
      auto g = p.grad();
      analytic[c].emplace_back(g.begin(), g.end());
    }
  }

  GradCheckReport report;
  report.tolerance = cfg.tolerance;
  report.n_parameters = model.parameter_count();
  report.components.resize(kComponents.size());
  for (std::size_t c = 0; c < kComponents.size(); ++c) report.components[c].component = kComponents[c];

  ad::NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto data = params[pi].mutable_data();
    std::array<double, 5> worst{};
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double orig = data[k];
      const double h = cfg.fd_step;
      auto eval_at = [&](double offset) {
        data[k] = orig + offset;
        const auto v = forward().values();
        return std::array<double, 5>{v.l_cls, v.l_loc, v.l_obj, v.l_dac, v.total};
      };
      const auto p1 = eval_at(h);
      const auto m1 = eval_at(-h);
      const auto p2 = eval_at(2 * h);
      const auto m2 = eval_at(-2 * h);
      data[k] = orig;
      for (std::size_t c = 0; c < kComponents.size(); ++c) {
        // Five-point central difference: truncation error O(h^4).
        const double fd = (8 * (p1[c] - m1[c]) - (p2[c] - m2[c])) / (12 * h);
        const double ga = analytic[c][pi][k];
        const double err = std::abs(ga - fd) / std::max({1.0, std::abs(ga), std::abs(fd)});
        worst[c] = std::max(worst[c], std::isfinite(err) ? err : INFINITY);
      }
    }
    for (std::size_t c = 0; c < kComponents.size(); ++c) {
      auto& comp = report.components[c];
      comp.per_param.push_back({params[pi].name(), worst[c]});
      if (worst[c] > comp.max_rel_error || comp.worst_param.empty()) {
        comp.max_rel_error = worst[c];
        comp.worst_param = params[pi].name();
      }
      if (!(worst[c] <= cfg.tolerance)) comp.failing_params.push_back(params[pi].name());
    }
  }
  report.passed = std::all_of(report.components.begin(), report.components.end(),
                              [](const ComponentCheck& c) { return c.failing_params.empty(); });
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace dacdet::pipeline
