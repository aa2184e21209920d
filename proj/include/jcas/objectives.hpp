#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace jcas {

struct LossWeights {
  double w_s = 0.5;      // sensing emphasis in [0, 1]
  double alpha = 1.0;    // fairness exponent (multi-user only)
};

/// Ground truth for one batch of scenarios.
struct BatchLabels {
  std::vector<std::uint8_t> targets;   // t_i
  std::vector<double> thetas;          // true angle, meaningful where t_i = 1
  std::vector<int> n_wins;
  std::vector<double> sigma_ns2;
};

constexpr double kLlrClamp = 40.0;

/// Mean binary cross-entropy in bits over all (bit, symbol) slots, computed
/// stably from LLRs (ell = ln p0 - ln p1, clamped to +-kLlrClamp).
double loss_comm_bce(const std::vector<double>& llrs, const std::vector<std::uint8_t>& bits);

/// d(loss)/d(ell) for each slot of loss_comm_bce.
std::vector<double> loss_comm_bce_grad(const std::vector<double>& llrs,
                                       const std::vector<std::uint8_t>& bits);

/// Mean BCE in bits between target flags and detection probabilities.
double loss_detect_bce(const std::vector<double>& p_target, const std::vector<std::uint8_t>& t);

/// Squared angle error weighted by N_win/sigma_ns2 so each scenario's term
/// sits near 1 when the estimator attains its variance floor:
/// (1/N) sum 1[t_i] * (N_win_i / sigma_ns2_i) * (theta_i - theta_hat_i)^2.
double loss_angle_crb_normalized(const std::vector<double>& theta_hat, const BatchLabels& labels);

/// Plain indicator-masked squared error (the ablation variant).
double loss_angle_unmodified(const std::vector<double>& theta_hat, const BatchLabels& labels);

struct LossParts {
  double comm = 0.0;
  double detect = 0.0;
  double angle = 0.0;
};

/// L = (1 - w_s) L_comm + w_s L_detect + w_s L_angle.
double loss_total(const LossParts& parts, const LossWeights& w);

/// Alpha-fair utility over per-UE rates (bits/symbol):
/// alpha = 1: -sum log2(rate); otherwise -sum rate^(1-alpha)/(1-alpha).
/// Rates are floored at 1e-6 before the power/log.
double loss_alpha_fair(const std::vector<double>& per_ue_rates, double alpha);

/// d(loss)/d(rate) for each UE.
std::vector<double> loss_alpha_fair_grad(const std::vector<double>& per_ue_rates, double alpha);

/// Achievable-rate estimate log2(M) - sum_i meanBCE_i, clamped to [0, log2 M].
/// `llrs`/`bits` are slot-major groups of log2(M) per symbol.
double metric_bmi(const std::vector<double>& llrs, const std::vector<std::uint8_t>& bits,
                  std::size_t mod_order);

struct SensingMetrics {
  double p_d = 0.0;
  double p_f = 0.0;
  std::optional<double> rmse_rad;  // absent when no targets present
  std::optional<double> bias_rad;
};

SensingMetrics metric_sensing(const std::vector<std::uint8_t>& decisions,
                              const std::vector<std::uint8_t>& t,
                              const std::vector<double>& theta_hat,
                              const std::vector<double>& theta);

}  // namespace jcas
