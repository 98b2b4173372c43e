#include "g2s/metrics.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "g2s/common.hpp"
#include "g2s/vocab.hpp"

namespace g2s {

F1Result f1_score(const std::vector<std::string>& pred_words,
                  const std::vector<std::string>& truth_words) {
  std::set<std::string> pred;
  for (const auto& w : pred_words) {
    if (w == Vocabulary::kSosToken || w == Vocabulary::kUnkToken ||
        w == Vocabulary::kEosToken) {
      continue;
    }
    pred.insert(w);
  }
  const std::set<std::string> truth(truth_words.begin(), truth_words.end());

  F1Result r;
  for (const auto& w : pred) {
    if (truth.count(w)) {
      ++r.tp;
    } else {
      ++r.fp;
    }
  }
  for (const auto& w : truth) {
    if (!pred.count(w)) ++r.fn;
  }
  r.precision = r.tp + r.fp == 0 ? 0.0
                                 : static_cast<double>(r.tp) /
                                       static_cast<double>(r.tp + r.fp);
  r.recall = r.tp + r.fn == 0
                 ? 0.0
                 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.f1 = r.precision + r.recall == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

RunReport aggregate_runs(const std::vector<double>& per_seed_scores) {
  if (per_seed_scores.empty()) throw ContractError("aggregate_runs: no scores");
  RunReport report;
  report.per_seed = per_seed_scores;
  double sum = 0.0;
  for (double s : per_seed_scores) sum += s;
  const auto n = static_cast<double>(per_seed_scores.size());
  report.mean = sum / n;
  if (per_seed_scores.size() >= 2) {
    double sq = 0.0;
    for (double s : per_seed_scores) sq += (s - report.mean) * (s - report.mean);
    report.stddev = std::sqrt(sq / (n - 1.0));
  }
  return report;
}

namespace {

double unbiased_variance(const std::vector<double>& xs, double mean) {
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return sq / (static_cast<double>(xs.size()) - 1.0);
}

}  // namespace

Comparison compare_runs(const std::vector<double>& scores_a,
                        const std::vector<double>& scores_b) {
  if (scores_a.size() < 2 || scores_b.size() < 2) {
    throw ContractError("compare_runs: both samples need at least two scores");
  }
  const auto na = static_cast<double>(scores_a.size());
  const auto nb = static_cast<double>(scores_b.size());
  double ma = 0.0;
  double mb = 0.0;
  for (double x : scores_a) ma += x;
  for (double x : scores_b) mb += x;
  ma /= na;
  mb /= nb;
  const double va = unbiased_variance(scores_a, ma);
  const double vb = unbiased_variance(scores_b, mb);

  Comparison cmp;
  const double pooled_var = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
  if (pooled_var == 0.0) {
    // degenerate samples: identical constants
    if (ma == mb) {
      cmp.cohens_d = 0.0;
      cmp.p_value = 1.0;
      cmp.t_stat = 0.0;
      cmp.dof = na + nb - 2.0;
      return cmp;
    }
    cmp.cohens_d = ma > mb ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
    cmp.p_value = 0.0;
    cmp.t_stat = cmp.cohens_d;
    cmp.dof = na + nb - 2.0;
    return cmp;
  }
  cmp.cohens_d = (ma - mb) / std::sqrt(pooled_var);

  const double se_a = va / na;
  const double se_b = vb / nb;
  cmp.t_stat = (ma - mb) / std::sqrt(se_a + se_b);
  cmp.dof = (se_a + se_b) * (se_a + se_b) /
            (se_a * se_a / (na - 1.0) + se_b * se_b / (nb - 1.0));
  cmp.p_value = student_t_two_sided_p(cmp.t_stat, cmp.dof);
  return cmp;
}

}  // namespace g2s
