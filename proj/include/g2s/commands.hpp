#pragma once

#include <string>

#include "g2s/config.hpp"

namespace g2s {

// Subcommand entry points. Each returns a process exit status; hard errors
// raise g2s::Error and are rendered by the caller.
int cmd_preprocess(const CliConfig& cfg);
int cmd_train(const CliConfig& cfg);
int cmd_evaluate(const CliConfig& cfg);
int cmd_predict(const CliConfig& cfg);

struct GradcheckOptions {
  std::string decoder = "both";  // linear | lstm | both
  int hidden_dim = 8;
  int layers = 2;
  double dropout = 0.0;
  double tolerance = 1e-4;
  // Test hook: route an untracked copy of a parameter into the loss so the
  // analytic gradient is knowingly wrong and the check must fail.
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckOptions& options);

}  // namespace g2s
