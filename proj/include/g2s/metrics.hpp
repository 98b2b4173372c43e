#pragma once

#include <optional>
#include <string>
#include <vector>

namespace g2s {

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// Set-based F1 over unique, order-agnostic words. Special tokens are removed
// from the prediction side first, so an emitted <UNK> can never match.
// 0/0 ratios evaluate to 0.
F1Result f1_score(const std::vector<std::string>& pred_words,
                  const std::vector<std::string>& truth_words);

struct RunReport {
  std::vector<double> per_seed;
  double mean = 0.0;
  std::optional<double> stddev;  // unbiased, absent for a single run
};

RunReport aggregate_runs(const std::vector<double>& per_seed_scores);

struct Comparison {
  double t_stat = 0.0;
  double dof = 0.0;
  double p_value = 1.0;   // Welch two-sample t-test, two-sided
  double cohens_d = 0.0;  // pooled-standard-deviation effect size
};

Comparison compare_runs(const std::vector<double>& scores_a,
                        const std::vector<double>& scores_b);

// Survival helpers (stats.cpp).
double regularized_incomplete_beta(double a, double b, double x);
double student_t_two_sided_p(double t, double dof);

}  // namespace g2s
