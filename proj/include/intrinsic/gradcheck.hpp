#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "intrinsic/losses.hpp"

namespace intrinsic::gradcheck {

/// logit = b + sum_p w_p * S_p / mean(S): a smooth critic with a dense input
/// gradient, nonlinear through the mean.
class MeanNormalizedLinearCritic : public losses::ShadingCritic {
 public:
  MeanNormalizedLinearCritic(Image w, double b);
  losses::CriticOutput evaluate(const Image& shading, bool want_grad) const override;

 private:
  Image w_;
  double b_;
};

struct SuiteOptions {
  int seeds = 20;
  int width = 8;
  int height = 8;
  double tolerance = 1e-5;
  losses::GradCheckOptions fd{};
  /// Multiplies every analytic gradient; 1 checks the real gradients.
  double fault_scale = 1.0;
};

struct CaseResult {
  std::string loss_name;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Central-difference check of every loss, and of the discriminator's input
/// gradient, on random inputs for each seed; max error over seeds per loss.
std::vector<CaseResult> run_suite(const SuiteOptions& options = {});

/// [{loss_name, max_rel_err, pass}, ...]
std::string to_json(const std::vector<CaseResult>& results, int indent = 2);

}  // namespace intrinsic::gradcheck
