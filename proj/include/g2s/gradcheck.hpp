#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "g2s/autodiff.hpp"

namespace g2s::ad {

// f builds the scalar loss from the current parameter values. It is handed a
// tape when gradients should be recorded and nullptr for plain forward runs.
template <typename T>
using ScalarFn = std::function<Tensor<T>(Tape<T>*)>;

template <typename T>
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_entry = 0;
};

// Central-difference comparison against the tape gradient. Returns the
// maximum of |analytic - numeric| / max(|analytic|, |numeric|, floor).
// The function must be deterministic; two forward evaluations that disagree
// are rejected.
template <typename T>
double grad_check(const ScalarFn<T>& f, std::span<const std::pair<std::string, Tensor<T>>> params,
                  double step = 1e-5, double floor = 1e-6,
                  GradCheckReport<T>* report = nullptr) {
  if (step <= 0.0) throw ContractError("grad_check: step must be positive");
  const double probe1 = static_cast<double>(f(nullptr).item());
  const double probe2 = static_cast<double>(f(nullptr).item());
  if (probe1 != probe2) {
    throw ContractError("grad_check: function is not deterministic (forward passes disagree)");
  }

  for (const auto& [name, p] : params) {
    Tensor<T> t = p;
    t.zero_grad();
  }
  Tape<T> tape;
  Tensor<T> loss = f(&tape);
  std::vector<Tensor<T>> leaves;
  leaves.reserve(params.size());
  for (const auto& [name, p] : params) leaves.push_back(p);
  tape.backward(loss, leaves);

  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
  }

  double max_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T> p = params[pi].second;
    auto pv = p.values();
    for (std::size_t j = 0; j < pv.size(); ++j) {
      const T saved = pv[j];
      pv[j] = saved + static_cast<T>(step);
      const double fp = static_cast<double>(f(nullptr).item());
      pv[j] = saved - static_cast<T>(step);
      const double fm = static_cast<double>(f(nullptr).item());
      pv[j] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = static_cast<double>(analytic[pi][j]);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double err = std::abs(a - numeric) / denom;
      if (err > max_err) {
        max_err = err;
        if (report != nullptr) {
          report->worst_param = params[pi].first;
          report->worst_entry = j;
        }
      }
    }
  }
  if (report != nullptr) report->max_rel_err = max_err;
  return max_err;
}

// Same check, reporting the maximum relative error per named parameter.
template <typename T>
std::vector<std::pair<std::string, double>> grad_check_per_param(
    const ScalarFn<T>& f, std::span<const std::pair<std::string, Tensor<T>>> params,
    double step = 1e-5, double floor = 1e-6) {
  if (step <= 0.0) throw ContractError("grad_check: step must be positive");
  const double probe1 = static_cast<double>(f(nullptr).item());
  const double probe2 = static_cast<double>(f(nullptr).item());
  if (probe1 != probe2) {
    throw ContractError("grad_check: function is not deterministic (forward passes disagree)");
  }
  for (const auto& [name, p] : params) {
    Tensor<T> t = p;
    t.zero_grad();
  }
  Tape<T> tape;
  Tensor<T> loss = f(&tape);
  std::vector<Tensor<T>> leaves;
  for (const auto& [name, p] : params) leaves.push_back(p);
  tape.backward(loss, leaves);

  std::vector<std::pair<std::string, double>> out;
  out.reserve(params.size());
  for (const auto& [name, p] : params) {
    Tensor<T> t = p;
    const std::vector<T> analytic(t.grad().begin(), t.grad().end());
    auto pv = t.values();
    double worst = 0.0;
    for (std::size_t j = 0; j < pv.size(); ++j) {
      const T saved = pv[j];
      pv[j] = saved + static_cast<T>(step);
      const double fp = static_cast<double>(f(nullptr).item());
      pv[j] = saved - static_cast<T>(step);
      const double fm = static_cast<double>(f(nullptr).item());
      pv[j] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = static_cast<double>(analytic[j]);
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, err);
    }
    out.emplace_back(name, worst);
  }
  return out;
}

}  // namespace g2s::ad
