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
#include "jcas/trainer.hpp"

namespace jcas {

/// Multi-user downlink deployment: several single-antenna UEs at known
/// departure angles share the waveform with the sensing function.
struct MimoScenario {
  ScenarioConfig base;               // antennas, variances, sensing area, prior
  std::vector<double> ue_angles;     // one per UE, radians
  std::size_t mod_order = 4;         // QPSK per UE

  std::size_t n_ue() const { return ue_angles.size(); }
  void validate() const;
};

struct PrecodingMatrix {
  CMat v;  // K x N_ue, ||V||_F = 1
};

/// Y = V * X with X holding one row of symbols per UE.
CMat mimo_transmit(const PrecodingMatrix& v, const CMat& x);

/// Frobenius-normalized precoding matrix from the network outputs
/// (2K * N_ue reals read column-wise as (re, im) pairs).
PrecodingMatrix mimo_beamformer_head(const Mlp& net, const std::vector<double>& inputs,
                                     std::size_t k_antennas, std::size_t n_ue);

struct MimoCommOutput {
  CVec z;        // received samples of this UE
  CVec gamma;    // own-channel coefficients (r_u * alpha_n)
  CVec row;      // effective row a(theta_ue)^T V (CSI)
  std::vector<double> interference;  // per-sample interference variance
};

/// Per-UE downlink with inter-user interference;
/// z_n = a(theta_ue)^T Y[:,n] * alpha_n + noise_n.
MimoCommOutput mimo_comm_channel(const CMat& y, const PrecodingMatrix& v, std::size_t ue,
                                 double theta_ue, const CVec& alpha, const CVec& noise);

/// Trainable blocks of the multi-user extension. Sensing reuses the
/// single-user machinery on the shared transmit frame.
struct MimoSystem {
  MimoScenario scenario;
  double w_s = 0.7;
  double alpha_fair = 1.0;
  Mlp precoder;                 // 2 + N_ue inputs -> 2K*N_ue
  Mlp detector;
  Mlp angler;
  std::vector<Mlp> demappers;   // one per UE
  Constellation alphabet;      // QPSK
  ThresholdTable thresholds;

  PrecodingMatrix precoding() const;
  std::uint64_t param_hash_all() const;
};

MimoSystem make_mimo_system(const MimoScenario& sc, std::uint64_t seed);

/// One window of draws for every UE plus the shared sensing state.
struct MimoFrame {
  int n_win = 1;
  double theta = 0.0;
  bool target = false;
  double sigma_ns2 = 1.0;
  double sigma_nc2 = 1.0;
  std::vector<std::vector<int>> symbols;       // [ue][n]
  std::vector<std::vector<std::uint8_t>> bits; // [ue][bit*n]
  std::vector<CVec> alpha;                     // [ue][n] channel taps
  std::vector<CVec> noise_c;                   // [ue][n]
  CVec alpha_s;
  CMat noise_s;
};

MimoFrame make_mimo_frame(const MimoScenario& sc, const Constellation& alphabet, int n_win,
                          double sigma_ns2, double sigma_nc2, RngStream& rng);

struct MimoGradBundle {
  MlpGrads precoder, detect, angle;
  std::vector<MlpGrads> demappers;
};

/// Differentiable multi-user pipeline; the communication term is the
/// alpha-fair utility over per-UE rates.
LossParts mimo_forward_backward(const MimoSystem& sys, const std::vector<MimoFrame>& windows,
                                const LossWeights& w, bool modified_angle_loss,
                                MimoGradBundle* grads);

TrainReport mimo_pretrain(MimoSystem& sys, const TrainPlan& plan);
TrainReport mimo_finetune(MimoSystem& sys, const TrainPlan& plan);
ThresholdTable mimo_limit(MimoSystem& sys, const TrainPlan& plan);

void save_mimo_checkpoint(const MimoSystem& sys, const std::string& path);
MimoSystem load_mimo_checkpoint(const std::string& path);

struct MimoCommEval {
  std::vector<double> ber;  // per UE
  std::vector<double> bmi;
};

MimoCommEval eval_mimo_comm_point(const MimoSystem& sys, double snr_c_db, std::size_t symbols,
                                  std::uint64_t seed);

/// Columns (angle_deg, p_ue..., p_sum) on a 0.25 degree grid.
Table mimo_beam_table(const MimoSystem& sys);

}  // namespace jcas
