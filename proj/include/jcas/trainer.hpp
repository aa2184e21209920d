#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "jcas/airlink.hpp"
#include "jcas/constellation.hpp"
#include "jcas/csv.hpp"
#include "jcas/mlp.hpp"
#include "jcas/objectives.hpp"

namespace jcas {

enum class ModMode { qam, psk, apsk, trained };
ModMode mod_mode_from_string(const std::string& s);
std::string mod_mode_to_string(ModMode m);

/// Phase budgets and sampling ranges for one training run. Defaults are
/// desk-scale (1/25 of the full-size budgets); the full budgets are plain
/// field assignments away.
struct TrainPlan {
  std::size_t pretrain_symbols = 1'000'000;
  std::size_t finetune_symbols = 2'000'000;
  std::size_t limit_windows = 10'000;  // noise-only windows per window length
  std::size_t batch_symbols = 10'000;
  double learning_rate = 1e-4;
  int n_win_min = 1;
  int n_win_max = 15;
  double snr_s_db_lo = -10.0;  // sensing SNR sampled log-uniform in dB
  double snr_s_db_hi = 10.0;
  double snr_c_db_lo = 5.0;  // communication SNR likewise
  double snr_c_db_hi = 30.0;
  double w_s = 0.5;
  double alpha_fair = 1.0;  // multi-user runs only
  bool angle_loss_modified = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainTraceRow {
  std::size_t step = 0;
  double comm = 0.0, detect = 0.0, angle = 0.0, total = 0.0;
};

struct TrainReport {
  std::string phase;
  std::vector<TrainTraceRow> trace;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::size_t symbols_consumed = 0;
  Table trace_table() const;
};

/// Detection offsets calibrated on noise-only windows. The trained score
/// conditions on both scalar inputs, so a single offset per window length
/// cannot hold the false alarm rate across noise levels; the table keeps one
/// offset per (N_win, log10 sigma_ns2) knot and interpolates linearly.
struct ThresholdTable {
  std::vector<double> knots_log_sigma2;    // ascending
  std::map<int, std::vector<double>> tau;  // n_win -> offset per knot

  bool empty() const { return tau.empty(); }
  double lookup(int n_win, double sigma_ns2, bool* calibrated = nullptr) const;
  bool operator==(const ThresholdTable&) const = default;
};

/// The five trainable blocks plus the fixed pieces they operate against.
struct JcasSystem {
  ScenarioConfig scenario;
  ModMode mode = ModMode::qam;
  double apsk_r2 = 1.0;
  double w_s = 0.5;

  Mlp beamformer;  // 4 -> {K,K,2K} -> 2K, power-normalized
  Mlp modulator;   // M -> {8M,8M,8M} -> 2, power-normalized over the alphabet
  Mlp detector;    // 2K^2+2 -> {2K,2K,K} -> 1, offset sigmoid
  Mlp angler;      // 2K^2+2 -> {8K,4K,4K,K} -> 1, (pi/2) tanh
  Mlp demapper;    // 3 -> {10M x 4} -> log2 M, linear LLR outputs

  Constellation classical;  // alphabet for the non-trained modes
  ThresholdTable thresholds;

  Constellation alphabet() const;  // trained mode runs the modulator
  PrecodingVector precoder() const;
  double threshold_for(int n_win, double sigma_ns2, bool* calibrated = nullptr) const;
  std::uint64_t param_hash_all() const;
};

JcasSystem make_system(const ScenarioConfig& cfg, ModMode mode, double apsk_r2, std::uint64_t seed);

/// Detection + angle (+ the beamformer feeding them) trained on the sensing
/// losses alone; demapper and modulator untouched.
TrainReport pretrain(JcasSystem& sys, const TrainPlan& plan);

/// Joint training of every active block with the full weighted loss.
TrainReport finetune(JcasSystem& sys, const TrainPlan& plan);

/// Calibrates the detection offsets on noise-only windows, one per
/// (N_win, noise-level knot); network parameters stay untouched.
ThresholdTable limit(JcasSystem& sys, const TrainPlan& plan);

constexpr int kCheckpointVersion = 1;
void save_checkpoint(const JcasSystem& sys, const std::string& path);
JcasSystem load_checkpoint(const std::string& path);

// ---- evaluation --------------------------------------------------------

enum class SweepAxis { snr_c, snr_s, n_win, w_s };
SweepAxis axis_from_string(const std::string& s);
std::string axis_to_string(SweepAxis a);

struct SweepOptions {
  double fixed_snr_s_db = -5.0;   // n_win axis
  int fixed_n_win = 1;            // snr_s axis
  double fixed_snr_c_db = 20.8;   // w_s axis operating point
  double fixed_snr_s_db_ws = 2.6;
  bool with_baselines = true;
  std::uint64_t seed = 99;
};

struct SensingEval {
  double p_d = 0, p_f = 0, rmse = 0, bias = 0;
  double p_d_hw = 0, p_f_hw = 0, rmse_hw = 0;
  double p_d_np = 0, p_f_np = 0, rmse_esprit = 0, crb_rmse = 0;
  double beta_s_db = 0;
  std::uint64_t draw_hash = 0;
};

/// Monte-Carlo sensing metrics at one (SNR_s, N_win) point; the classical
/// detector/estimator consume the identical draws.
SensingEval eval_sensing_point(const JcasSystem& sys, double snr_s_db, int n_win,
                               std::size_t trials, std::uint64_t seed, bool with_baselines);

struct CommEval {
  double ber = 0, bmi = 0, ber_hw = 0;
  double ber_mld = 0, bmi_mld = 0;
  double snr_plus_beta_db = 0;
  std::uint64_t draw_hash = 0;
};

/// Monte-Carlo BER/BMI at one SNR_c point, trained demapper vs the exact
/// demapper on the same draws.
CommEval eval_comm_point(const JcasSystem& sys, double snr_c_db, std::size_t symbols,
                         std::uint64_t seed, bool with_mld);

/// One row per grid value; columns depend on the axis (see header row).
Table sweep(const JcasSystem& sys, SweepAxis axis, const std::vector<double>& grid,
            std::size_t trials, const SweepOptions& opt);

/// Trade-off frontier across checkpoints trained at different w_s.
Table sweep_ws(const std::vector<JcasSystem>& systems, std::size_t trials,
               const SweepOptions& opt);

// ---- training internals exposed for gradient verification ---------------

struct PhaseSwitches {
  bool upd_beam = true, upd_mod = true, upd_detect = true, upd_angle = true, upd_demap = true;
  bool comm_loss = true, sens_loss = true;
};

struct GradBundle {
  MlpGrads beam, mod, detect, angle, demap;
};

/// Draws the windows for one training step; depends only on (plan, seed,
/// tags), never on network parameters.
std::vector<FrameBatch> draw_batch(const ScenarioConfig& cfg, const Constellation& alphabet,
                                   const TrainPlan& plan, std::uint64_t phase_tag,
                                   std::size_t step, std::size_t batch_symbols);

/// Full differentiable pipeline: forward pass, losses, and (optionally)
/// analytic parameter gradients of the total loss.
LossParts forward_backward(const JcasSystem& sys, const std::vector<FrameBatch>& windows,
                           const LossWeights& w, bool modified_angle_loss,
                           const PhaseSwitches& sw, GradBundle* grads);

}  // namespace jcas
