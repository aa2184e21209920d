#include "jcas/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "jcas/baselines.hpp"
#include "jcas/comm_rx.hpp"
#include "jcas/sensing_rx.hpp"
#include "jcas/special.hpp"
#include "pipeline_common.hpp"

namespace jcas {

namespace {

const double kLn2 = std::log(2.0);

// stream tags, one per consumer of randomness
constexpr std::uint64_t kTagInit = 0x01;
constexpr std::uint64_t kTagPretrain = 0x02;
constexpr std::uint64_t kTagFinetune = 0x03;
constexpr std::uint64_t kTagLimit = 0x04;

std::size_t ilog2(std::size_t m) {
  std::size_t c = 0;
  while ((std::size_t{1} << c) < m) ++c;
  return c;
}

CVec precoder_from_row(const RealMat& row) {
  const std::size_t k = row.cols / 2;
  CVec v(k);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    v[i] = {row(0, 2 * i), row(0, 2 * i + 1)};
    norm2 += std::norm(v[i]);
  }
  if (norm2 == 0.0) {
    // dead network output: fall back to the flat unit-power vector
    const double u = 1.0 / std::sqrt(static_cast<double>(k));
    for (auto& x : v) x = {u, 0.0};
  }
  return v;
}

}  // namespace

void TrainPlan::validate() const {
  if (batch_symbols < 1) throw std::invalid_argument("TrainPlan: batch_symbols must be >= 1");
  if (n_win_min < 1 || n_win_max < n_win_min)
    throw std::invalid_argument("TrainPlan: need 1 <= n_win_min <= n_win_max");
  if (w_s < 0.0 || w_s > 1.0) throw std::invalid_argument("TrainPlan: w_s must be in [0,1]");
  if (learning_rate <= 0.0) throw std::invalid_argument("TrainPlan: learning_rate must be positive");
  if (alpha_fair < 0.0) throw std::invalid_argument("TrainPlan: alpha_fair must be nonnegative");
  if (snr_s_db_hi < snr_s_db_lo || snr_c_db_hi < snr_c_db_lo)
    throw std::invalid_argument("TrainPlan: SNR sampling ranges must be ordered");
}

ModMode mod_mode_from_string(const std::string& s) {
  if (s == "qam") return ModMode::qam;
  if (s == "psk") return ModMode::psk;
  if (s == "apsk") return ModMode::apsk;
  if (s == "trained") return ModMode::trained;
  throw std::invalid_argument("unknown modulation mode: " + s);
}

std::string mod_mode_to_string(ModMode m) {
  switch (m) {
    case ModMode::qam: return "qam";
    case ModMode::psk: return "psk";
    case ModMode::apsk: return "apsk";
    case ModMode::trained: return "trained";
  }
  throw std::logic_error("mod_mode_to_string: bad enum");
}

Table TrainReport::trace_table() const {
  Table t;
  t.header = {"step", "loss_comm", "loss_detect", "loss_angle", "loss_total"};
  for (const auto& row : trace)
    t.rows.push_back({static_cast<double>(row.step), row.comm, row.detect, row.angle, row.total});
  t.add_meta("phase", phase);
  t.add_meta("seed", std::to_string(seed));
  return t;
}

Constellation JcasSystem::alphabet() const {
  if (mode != ModMode::trained) return classical;
  RealMat one_hot(modulator.input_dim(), modulator.input_dim());
  for (std::size_t i = 0; i < one_hot.rows; ++i) one_hot(i, i) = 1.0;
  Tape tape = mlp_forward(modulator, std::move(one_hot));
  std::vector<cplx> pts(tape.head_out.rows);
  for (std::size_t m = 0; m < pts.size(); ++m) pts[m] = {tape.head_out(m, 0), tape.head_out(m, 1)};
  Constellation c = constellation_from_points(std::move(pts));
  return c;
}

PrecodingVector JcasSystem::precoder() const {
  RealMat areas(1, 4);
  areas.a = {scenario.comm_area.lo, scenario.comm_area.hi, scenario.sens_area.lo,
             scenario.sens_area.hi};
  Tape tape = mlp_forward(beamformer, std::move(areas));
  return PrecodingVector{precoder_from_row(tape.head_out)};
}

double ThresholdTable::lookup(int n_win, double sigma_ns2, bool* calibrated) const {
  auto it = tau.find(n_win);
  if (it == tau.end() || knots_log_sigma2.empty()) {
    if (calibrated) *calibrated = false;
    return 0.0;
  }
  if (calibrated) *calibrated = true;
  const std::vector<double>& t = it->second;
  const double x = std::log10(sigma_ns2);
  if (x <= knots_log_sigma2.front()) return t.front();
  if (x >= knots_log_sigma2.back()) return t.back();
  std::size_t hi = 1;
  while (knots_log_sigma2[hi] < x) ++hi;
  const double x0 = knots_log_sigma2[hi - 1], x1 = knots_log_sigma2[hi];
  const double f = (x - x0) / (x1 - x0);
  return t[hi - 1] * (1.0 - f) + t[hi] * f;
}

double JcasSystem::threshold_for(int n_win, double sigma_ns2, bool* calibrated) const {
  return thresholds.lookup(n_win, sigma_ns2, calibrated);
}

std::uint64_t JcasSystem::param_hash_all() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const Mlp* net : {&beamformer, &modulator, &detector, &angler, &demapper}) {
    const std::uint64_t ph = net->param_hash();
    for (int i = 0; i < 8; ++i) {
      h ^= (ph >> (8 * i)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

JcasSystem make_system(const ScenarioConfig& cfg, ModMode mode, double apsk_r2,
                       std::uint64_t seed) {
  cfg.validate();
  const std::size_t k = cfg.k_antennas;
  const std::size_t m = cfg.mod_order;
  const std::size_t nbits = ilog2(m);

  JcasSystem sys;
  sys.scenario = cfg;
  sys.mode = mode;
  sys.apsk_r2 = apsk_r2;

  RngStream r_beam(seed, substream_id(kTagInit, 1));
  RngStream r_mod(seed, substream_id(kTagInit, 2));
  RngStream r_det(seed, substream_id(kTagInit, 3));
  RngStream r_ang(seed, substream_id(kTagInit, 4));
  RngStream r_dem(seed, substream_id(kTagInit, 5));

  sys.beamformer = mlp_init({4, k, k, 2 * k, 2 * k}, Head::power_normalized, r_beam);
  sys.modulator = mlp_init({m, 8 * m, 8 * m, 8 * m, 2}, Head::power_normalized, r_mod);
  sys.detector = mlp_init({2 * k * k + 2, 2 * k, 2 * k, k, 1}, Head::sigmoid_offset, r_det);
  sys.angler = mlp_init({2 * k * k + 2, 8 * k, 4 * k, 4 * k, k, 1}, Head::scaled_tanh, r_ang);
  sys.demapper = mlp_init({3, 10 * m, 10 * m, 10 * m, 10 * m, nbits}, Head::linear, r_dem);

  switch (mode) {
    case ModMode::qam: sys.classical = make_qam(m); break;
    case ModMode::psk: sys.classical = make_psk(m); break;
    case ModMode::apsk: sys.classical = make_apsk(ApskSpec{m, apsk_r2}); break;
    case ModMode::trained: sys.classical = make_qam(m); break;  // pre-training alphabet
  }
  return sys;
}

std::vector<FrameBatch> draw_batch(const ScenarioConfig& cfg, const Constellation& alphabet,
                                   const TrainPlan& plan, std::uint64_t phase_tag,
                                   std::size_t step, std::size_t batch_symbols) {
  std::vector<FrameBatch> windows;
  std::size_t symbols = 0;
  std::size_t idx = 0;
  while (symbols < batch_symbols) {
    RngStream rng(plan.seed, substream_id(phase_tag, step, idx++));
    const int span = plan.n_win_max - plan.n_win_min + 1;
    const int n_win = plan.n_win_min + static_cast<int>(rng.uniform_int(span));
    const double snr_s_db = rng.uniform(plan.snr_s_db_lo, plan.snr_s_db_hi);
    const double snr_c_db = rng.uniform(plan.snr_c_db_lo, plan.snr_c_db_hi);
    const double sigma_ns2 = cfg.sigma_s2 * std::pow(10.0, -snr_s_db / 10.0);
    const double sigma_nc2 = cfg.sigma_c2 * std::pow(10.0, -snr_c_db / 10.0);
    windows.push_back(make_frame(cfg, alphabet, n_win, sigma_ns2, sigma_nc2, rng));
    symbols += static_cast<std::size_t>(n_win);
  }
  return windows;
}

LossParts forward_backward(const JcasSystem& sys, const std::vector<FrameBatch>& windows,
                           const LossWeights& w, bool modified_angle_loss,
                           const PhaseSwitches& sw, GradBundle* grads) {
  const std::size_t k = sys.scenario.k_antennas;
  const std::size_t nbits = ilog2(sys.scenario.mod_order);
  const std::size_t n_windows = windows.size();
  const bool trained_mod = sys.mode == ModMode::trained;

  // ---- transmitter forward ----
  RealMat areas(1, 4);
  areas.a = {sys.scenario.comm_area.lo, sys.scenario.comm_area.hi, sys.scenario.sens_area.lo,
             sys.scenario.sens_area.hi};
  Tape bf_tape = mlp_forward(sys.beamformer, std::move(areas));
  const CVec v = precoder_from_row(bf_tape.head_out);

  Constellation alphabet;
  Tape mod_tape;
  if (trained_mod) {
    RealMat one_hot(sys.scenario.mod_order, sys.scenario.mod_order);
    for (std::size_t i = 0; i < one_hot.rows; ++i) one_hot(i, i) = 1.0;
    mod_tape = mlp_forward(sys.modulator, std::move(one_hot));
    std::vector<cplx> pts(mod_tape.head_out.rows);
    for (std::size_t m = 0; m < pts.size(); ++m)
      pts[m] = {mod_tape.head_out(m, 0), mod_tape.head_out(m, 1)};
    alphabet = constellation_from_points(std::move(pts));
  } else {
    alphabet = sys.classical;
  }

  // ---- per-window channel forward ----
  std::size_t n_symbols = 0;
  for (const auto& f : windows) n_symbols += static_cast<std::size_t>(f.n_win);

  struct WindowFwd {
    CVec a_s, a_c;
    cplx c_s{0, 0}, c_c{0, 0};
    CMat z_s;  // received sensing frame
    std::vector<detail::EqForward> eq;  // one per symbol
  };
  std::vector<WindowFwd> fwd(n_windows);

  RealMat det_batch(n_windows, 2 * k * k + 2);
  RealMat ang_batch(n_windows, 2 * k * k + 2);
  RealMat dem_batch(n_symbols, 3);
  std::vector<double> det_offsets(n_windows, 0.0);  // tau = 0 while training
  std::vector<std::uint8_t> t_flags(n_windows);
  BatchLabels labels;
  labels.targets.resize(n_windows);
  labels.thetas.resize(n_windows);
  labels.n_wins.resize(n_windows);
  labels.sigma_ns2.resize(n_windows);
  std::vector<std::uint8_t> bits_flat;
  bits_flat.reserve(n_symbols * nbits);

  std::size_t sym_at = 0;
  for (std::size_t wi = 0; wi < n_windows; ++wi) {
    const FrameBatch& f = windows[wi];
    WindowFwd& wf = fwd[wi];
    wf.a_s = steering_vector(f.theta, k);
    wf.a_c = steering_vector(f.phi, k);
    for (std::size_t i = 0; i < k; ++i) {
      wf.c_s += wf.a_s[i] * v[i];
      wf.c_c += wf.a_c[i] * v[i];
    }

    // sensing observation: Z = T c_s a_s (x . alpha)^T + N
    wf.z_s = f.noise_s;
    if (f.target) {
      for (int n = 0; n < f.n_win; ++n) {
        const cplx rown = wf.c_s * alphabet.points[f.symbols[n]] * f.alpha_s[n];
        for (std::size_t i = 0; i < k; ++i) wf.z_s(i, n) += wf.a_s[i] * rown;
      }
    }
    const CorrelationMatrix corr = correlate(wf.z_s);
    const std::vector<double> feats = sensing_features(corr, f.n_win, f.sigma_ns2);
    for (std::size_t c = 0; c < feats.size(); ++c) {
      det_batch(wi, c) = feats[c];
      ang_batch(wi, c) = feats[c];
    }
    t_flags[wi] = f.target ? 1 : 0;
    labels.targets[wi] = t_flags[wi];
    labels.thetas[wi] = f.theta;
    labels.n_wins[wi] = f.n_win;
    labels.sigma_ns2[wi] = f.sigma_ns2;

    // communication per symbol
    wf.eq.resize(f.n_win);
    for (int n = 0; n < f.n_win; ++n) {
      const cplx x = alphabet.points[f.symbols[n]];
      const cplx gamma = wf.c_c * f.alpha_c[n];
      const cplx z = gamma * x + f.noise_c[n];
      wf.eq[n] = detail::mmse_forward(gamma, z, f.sigma_nc2);
      dem_batch(sym_at, 0) = wf.eq[n].x_eq.real();
      dem_batch(sym_at, 1) = wf.eq[n].x_eq.imag();
      dem_batch(sym_at, 2) = wf.eq[n].u3;
      ++sym_at;
    }
    bits_flat.insert(bits_flat.end(), f.bits.begin(), f.bits.end());
  }

  // ---- receiver nets forward ----
  Tape det_tape = mlp_forward(sys.detector, det_batch, det_offsets);
  Tape ang_tape = mlp_forward(sys.angler, ang_batch);
  Tape dem_tape = mlp_forward(sys.demapper, dem_batch);

  // constant-false-alarm offset is active during training: the batch's own
  // noise-only scores set it, so shifting the noise-score distribution buys
  // the optimizer nothing and the noise tails stay aligned across SNR
  std::vector<double> s_raw(n_windows);
  for (std::size_t wi = 0; wi < n_windows; ++wi) s_raw[wi] = det_tape.post.back()(wi, 0);
  double tau_batch = 0.0;
  std::size_t tau_window = SIZE_MAX;  // window whose score is the order statistic
  {
    std::vector<std::pair<double, std::size_t>> noise_scores;
    for (std::size_t wi = 0; wi < n_windows; ++wi)
      if (!t_flags[wi]) noise_scores.emplace_back(s_raw[wi], wi);
    if (noise_scores.size() >= 2) {
      std::sort(noise_scores.begin(), noise_scores.end());
      const double pf = sys.scenario.p_false_alarm;
      std::size_t rank = static_cast<std::size_t>(
          std::ceil((1.0 - pf) * static_cast<double>(noise_scores.size())));
      rank = std::min(std::max<std::size_t>(rank, 1), noise_scores.size());
      tau_batch = -noise_scores[rank - 1].first;
      tau_window = noise_scores[rank - 1].second;
    }
  }

  std::vector<double> p_t(n_windows), theta_hat(n_windows);
  for (std::size_t wi = 0; wi < n_windows; ++wi) {
    p_t[wi] = sigmoid(s_raw[wi] + tau_batch);
    theta_hat[wi] = ang_tape.head_out(wi, 0);
  }
  std::vector<double> llr_flat(n_symbols * nbits);
  for (std::size_t s = 0; s < n_symbols; ++s)
    for (std::size_t b = 0; b < nbits; ++b) llr_flat[s * nbits + b] = dem_tape.head_out(s, b);

  // ---- losses ----
  LossParts parts;
  if (sw.comm_loss) parts.comm = loss_comm_bce(llr_flat, bits_flat);
  if (sw.sens_loss) {
    parts.detect = loss_detect_bce(p_t, t_flags);
    parts.angle = modified_angle_loss ? loss_angle_crb_normalized(theta_hat, labels)
                                      : loss_angle_unmodified(theta_hat, labels);
  }
  if (!grads) return parts;

  // ---- loss gradients ----
  RealMat dllr(n_symbols, nbits);
  if (sw.comm_loss) {
    const std::vector<double> g = loss_comm_bce_grad(llr_flat, bits_flat);
    for (std::size_t i = 0; i < g.size(); ++i) dllr.a[i] = g[i] * (1.0 - w.w_s);
  }
  RealMat dscore(n_windows, 1);  // w.r.t. raw detector outputs (fused sigmoid+BCE)
  RealMat dtheta(n_windows, 1);
  if (sw.sens_loss) {
    const double inv_n = 1.0 / static_cast<double>(n_windows);
    double dtau = 0.0;
    for (std::size_t wi = 0; wi < n_windows; ++wi) {
      const double g = w.w_s * (p_t[wi] - static_cast<double>(t_flags[wi])) * inv_n / kLn2;
      dscore(wi, 0) = g;
      dtau += g;  // every probability shares the batch offset
      if (t_flags[wi]) {
        const double factor =
            modified_angle_loss ? static_cast<double>(labels.n_wins[wi]) / labels.sigma_ns2[wi]
                                : 1.0;
        dtheta(wi, 0) = w.w_s * (-2.0) * inv_n * factor * (labels.thetas[wi] - theta_hat[wi]);
      }
    }
    // tau = -s_(rank): the order statistic carries the offset's subgradient
    if (tau_window != SIZE_MAX) dscore(tau_window, 0) -= dtau;
  }

  // ---- receiver nets backward ----
  RealMat dem_in, det_in, ang_in;
  grads->demap = mlp_backward(sys.demapper, dem_tape, dllr, &dem_in);
  grads->detect = mlp_backward_raw(sys.detector, det_tape, dscore, &det_in);
  grads->angle = mlp_backward(sys.angler, ang_tape, dtheta, &ang_in);

  // ---- glue adjoints back to the transmitter ----
  CVec vdot(k, cplx{0.0, 0.0});
  std::vector<cplx> ptdot(alphabet.order, cplx{0.0, 0.0});
  const bool need_tx = sw.upd_beam || (sw.upd_mod && trained_mod);

  if (need_tx) {
    std::vector<double> fdot(2 * k * k + 2);
    sym_at = 0;
    for (std::size_t wi = 0; wi < n_windows; ++wi) {
      const FrameBatch& f = windows[wi];
      const WindowFwd& wf = fwd[wi];

      if (f.target) {
        for (std::size_t c = 0; c < fdot.size(); ++c) fdot[c] = det_in(wi, c) + ang_in(wi, c);
        const CVec rowdot =
            detail::sensing_row_adjoint(wf.z_s, wf.a_s, f.alpha_s, fdot, f.sigma_ns2);
        cplx cs_dot = 0.0;
        for (int n = 0; n < f.n_win; ++n) {
          const cplx x = alphabet.points[f.symbols[n]];
          cs_dot += rowdot[n] * std::conj(x);
          ptdot[f.symbols[n]] += std::conj(wf.c_s) * rowdot[n];
        }
        for (std::size_t i = 0; i < k; ++i) vdot[i] += std::conj(wf.a_s[i]) * cs_dot;
      }

      cplx cc_dot = 0.0;
      for (int n = 0; n < f.n_win; ++n) {
        const cplx edot{dem_in(sym_at, 0), dem_in(sym_at, 1)};
        const double u3dot = dem_in(sym_at, 2);
        const detail::EqAdjoint adj = detail::mmse_backward(wf.eq[n], edot, u3dot);
        // z = gamma x + noise
        const cplx x = alphabet.points[f.symbols[n]];
        cplx gamma_dot = adj.gamma_dot + std::conj(x) * adj.z_dot;
        ptdot[f.symbols[n]] += std::conj(wf.eq[n].gamma) * adj.z_dot;
        // gamma = c_c * alpha_c
        cc_dot += std::conj(f.alpha_c[n]) * gamma_dot;
        ++sym_at;
      }
      for (std::size_t i = 0; i < k; ++i) vdot[i] += std::conj(wf.a_c[i]) * cc_dot;
    }
  }

  if (sw.upd_beam) {
    RealMat gv(1, 2 * k);
    for (std::size_t i = 0; i < k; ++i) {
      gv(0, 2 * i) = vdot[i].real();
      gv(0, 2 * i + 1) = vdot[i].imag();
    }
    grads->beam = mlp_backward(sys.beamformer, bf_tape, gv);
  } else {
    grads->beam = sys.beamformer.zero_grads();
  }

  if (sw.upd_mod && trained_mod) {
    RealMat gp(alphabet.order, 2);
    for (std::size_t m = 0; m < alphabet.order; ++m) {
      gp(m, 0) = ptdot[m].real();
      gp(m, 1) = ptdot[m].imag();
    }
    grads->mod = mlp_backward(sys.modulator, mod_tape, gp);
  } else {
    grads->mod = sys.modulator.zero_grads();
  }
  return parts;
}

namespace {

struct AdamBundle {
  AdamState beam, mod, detect, angle, demap;
};

TrainReport run_phase(JcasSystem& sys, const TrainPlan& plan, std::uint64_t phase_tag,
                      const char* phase_name, std::size_t budget, const PhaseSwitches& sw) {
  plan.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.phase = phase_name;
  report.seed = plan.seed;

  AdamBundle adam{adam_init(sys.beamformer, plan.learning_rate),
                  adam_init(sys.modulator, plan.learning_rate),
                  adam_init(sys.detector, plan.learning_rate),
                  adam_init(sys.angler, plan.learning_rate),
                  adam_init(sys.demapper, plan.learning_rate)};

  LossWeights w;
  w.w_s = plan.w_s;
  std::size_t consumed = 0;
  std::size_t step = 0;
  while (consumed < budget) {
    const std::size_t batch = std::min(plan.batch_symbols, budget - consumed);
    const auto windows = draw_batch(sys.scenario, sys.alphabet(), plan, phase_tag, step, batch);
    GradBundle grads;
    const LossParts parts = forward_backward(sys, windows, w, plan.angle_loss_modified, sw, &grads);

    if (sw.upd_beam) adam_step(sys.beamformer, grads.beam, adam.beam);
    if (sw.upd_mod && sys.mode == ModMode::trained) adam_step(sys.modulator, grads.mod, adam.mod);
    if (sw.upd_detect) adam_step(sys.detector, grads.detect, adam.detect);
    if (sw.upd_angle) adam_step(sys.angler, grads.angle, adam.angle);
    if (sw.upd_demap) adam_step(sys.demapper, grads.demap, adam.demap);

    for (const auto& f : windows) consumed += static_cast<std::size_t>(f.n_win);
    report.trace.push_back(
        {step, parts.comm, parts.detect, parts.angle, loss_total(parts, w)});
    ++step;
  }
  report.symbols_consumed = consumed;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

TrainReport pretrain(JcasSystem& sys, const TrainPlan& plan) {
  PhaseSwitches sw;
  sw.upd_beam = true;
  sw.upd_mod = false;  // modulator frozen until fine-tuning
  sw.upd_detect = true;
  sw.upd_angle = true;
  sw.upd_demap = false;
  sw.comm_loss = false;  // sensing terms only
  sw.sens_loss = true;
  return run_phase(sys, plan, kTagPretrain, "pretrain", plan.pretrain_symbols, sw);
}

TrainReport finetune(JcasSystem& sys, const TrainPlan& plan) {
  PhaseSwitches sw;  // everything live; modulator only in trained mode
  sys.w_s = plan.w_s;
  return run_phase(sys, plan, kTagFinetune, "finetune", plan.finetune_symbols, sw);
}

ThresholdTable limit(JcasSystem& sys, const TrainPlan& plan) {
  plan.validate();
  const Constellation alphabet = sys.alphabet();
  const PrecodingVector v = sys.precoder();
  ScenarioConfig cfg = sys.scenario;
  cfg.target_prior = 0.0;  // noise-only calibration windows

  ThresholdTable table;
  const int n_knots = 9;
  for (int g = 0; g < n_knots; ++g) {
    const double snr_db =
        plan.snr_s_db_lo + (plan.snr_s_db_hi - plan.snr_s_db_lo) * g / (n_knots - 1);
    table.knots_log_sigma2.push_back(std::log10(cfg.sigma_s2) - snr_db / 10.0);
  }
  std::sort(table.knots_log_sigma2.begin(), table.knots_log_sigma2.end());

  // the per-knot share of the calibration budget, floor of 1000 scores
  const std::size_t per_knot = std::max<std::size_t>(plan.limit_windows / 2, 1000);
  for (int n_win = plan.n_win_min; n_win <= plan.n_win_max; ++n_win) {
    std::vector<double> taus(table.knots_log_sigma2.size());
    for (std::size_t kn = 0; kn < table.knots_log_sigma2.size(); ++kn) {
      const double sigma_ns2 = std::pow(10.0, table.knots_log_sigma2[kn]);
      std::vector<double> scores;
      scores.reserve(per_knot);
      for (std::size_t i = 0; i < per_knot; ++i) {
        RngStream rng(plan.seed,
                      substream_id(kTagLimit, static_cast<std::uint64_t>(n_win) * 64 + kn, i));
        FrameBatch f = make_frame(cfg, alphabet, n_win, sigma_ns2, cfg.sigma_nc2, rng);
        const CMat y = transmit([&] {
          CVec x(f.n_win);
          for (int n = 0; n < f.n_win; ++n) x[n] = alphabet.points[f.symbols[n]];
          return x;
        }(), v);
        const CMat z = sensing_channel(y, f.theta, f.target, f.alpha_s, f.noise_s);
        const auto feats = sensing_features(correlate(z), n_win, sigma_ns2);
        scores.push_back(detect(sys.detector, feats, 0.0, false).score);
      }
      taus[kn] = calibrate_threshold(scores, sys.scenario.p_false_alarm).tau;
    }
    table.tau[n_win] = std::move(taus);
  }
  sys.thresholds = table;
  return table;
}

// ---- checkpoint io -------------------------------------------------------

namespace {

using nlohmann::json;

json net_to_json(const Mlp& net) {
  json j;
  j["sizes"] = net.sizes;
  j["head"] = head_to_string(net.head);
  json ws = json::array();
  for (const auto& m : net.w) ws.push_back(m.a);
  j["weights"] = ws;
  j["biases"] = net.b;
  return j;
}

Mlp net_from_json(const json& j) {
  Mlp net;
  net.sizes = j.at("sizes").get<std::vector<std::size_t>>();
  net.head = head_from_string(j.at("head").get<std::string>());
  const auto& ws = j.at("weights");
  const auto& bs = j.at("biases");
  for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
    RealMat m(net.sizes[l], net.sizes[l + 1]);
    m.a = ws.at(l).get<std::vector<double>>();
    if (m.a.size() != m.rows * m.cols) throw std::runtime_error("checkpoint: weight shape mismatch");
    net.w.push_back(std::move(m));
    net.b.push_back(bs.at(l).get<std::vector<double>>());
    if (net.b.back().size() != net.sizes[l + 1])
      throw std::runtime_error("checkpoint: bias shape mismatch");
  }
  return net;
}

json scenario_to_json(const ScenarioConfig& c) {
  return json{{"k", c.k_antennas},
              {"m", c.mod_order},
              {"comm_area", {c.comm_area.lo, c.comm_area.hi}},
              {"sens_area", {c.sens_area.lo, c.sens_area.hi}},
              {"sigma_c2", c.sigma_c2},
              {"sigma_s2", c.sigma_s2},
              {"sigma_nc2", c.sigma_nc2},
              {"sigma_ns2", c.sigma_ns2},
              {"n_win_max", c.n_win_max},
              {"target_prior", c.target_prior},
              {"p_false_alarm", c.p_false_alarm}};
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c;
  c.k_antennas = j.at("k").get<std::size_t>();
  c.mod_order = j.at("m").get<std::size_t>();
  c.comm_area = {j.at("comm_area")[0].get<double>(), j.at("comm_area")[1].get<double>()};
  c.sens_area = {j.at("sens_area")[0].get<double>(), j.at("sens_area")[1].get<double>()};
  c.sigma_c2 = j.at("sigma_c2").get<double>();
  c.sigma_s2 = j.at("sigma_s2").get<double>();
  c.sigma_nc2 = j.at("sigma_nc2").get<double>();
  c.sigma_ns2 = j.at("sigma_ns2").get<double>();
  c.n_win_max = j.at("n_win_max").get<std::size_t>();
  c.target_prior = j.at("target_prior").get<double>();
  c.p_false_alarm = j.at("p_false_alarm").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const JcasSystem& sys, const std::string& path) {
  json j;
  j["format"] = "jcas-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = "single";
  j["mode"] = mod_mode_to_string(sys.mode);
  j["apsk_r2"] = sys.apsk_r2;
  j["w_s"] = sys.w_s;
  j["scenario"] = scenario_to_json(sys.scenario);
  j["nets"] = {{"beamformer", net_to_json(sys.beamformer)},
               {"modulator", net_to_json(sys.modulator)},
               {"detector", net_to_json(sys.detector)},
               {"angler", net_to_json(sys.angler)},
               {"demapper", net_to_json(sys.demapper)}};
  json th = json::object();
  th["knots_log_sigma2"] = sys.thresholds.knots_log_sigma2;
  json taus = json::object();
  for (const auto& [n, t] : sys.thresholds.tau) taus[std::to_string(n)] = t;
  th["tau"] = taus;
  j["thresholds"] = th;

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f << j.dump(1) << "\n";
}

JcasSystem load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  json j;
  f >> j;
  if (j.value("format", "") != "jcas-checkpoint")
    throw std::runtime_error("not a checkpoint file: " + path);
  const int version = j.at("version").get<int>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint version " + std::to_string(version) +
                             " not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  if (j.value("kind", "single") != "single")
    throw std::runtime_error("checkpoint holds a different system kind: " + j.value("kind", "?"));

  JcasSystem sys;
  sys.scenario = scenario_from_json(j.at("scenario"));
  sys.mode = mod_mode_from_string(j.at("mode").get<std::string>());
  sys.apsk_r2 = j.at("apsk_r2").get<double>();
  sys.w_s = j.at("w_s").get<double>();
  sys.beamformer = net_from_json(j.at("nets").at("beamformer"));
  sys.modulator = net_from_json(j.at("nets").at("modulator"));
  sys.detector = net_from_json(j.at("nets").at("detector"));
  sys.angler = net_from_json(j.at("nets").at("angler"));
  sys.demapper = net_from_json(j.at("nets").at("demapper"));
  const auto& th = j.at("thresholds");
  sys.thresholds.knots_log_sigma2 = th.at("knots_log_sigma2").get<std::vector<double>>();
  for (const auto& [key, val] : th.at("tau").items())
    sys.thresholds.tau[std::stoi(key)] = val.get<std::vector<double>>();
  switch (sys.mode) {
    case ModMode::qam: sys.classical = make_qam(sys.scenario.mod_order); break;
    case ModMode::psk: sys.classical = make_psk(sys.scenario.mod_order); break;
    case ModMode::apsk: sys.classical = make_apsk(ApskSpec{sys.scenario.mod_order, sys.apsk_r2}); break;
    case ModMode::trained: sys.classical = make_qam(sys.scenario.mod_order); break;
  }
  return sys;
}

// ---- evaluation ----------------------------------------------------------

SweepAxis axis_from_string(const std::string& s) {
  if (s == "snr_c") return SweepAxis::snr_c;
  if (s == "snr_s") return SweepAxis::snr_s;
  if (s == "n_win") return SweepAxis::n_win;
  if (s == "w_s") return SweepAxis::w_s;
  throw std::invalid_argument("unknown sweep axis: " + s + " (valid: snr_c, snr_s, n_win, w_s)");
}

std::string axis_to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::snr_c: return "snr_c";
    case SweepAxis::snr_s: return "snr_s";
    case SweepAxis::n_win: return "n_win";
    case SweepAxis::w_s: return "w_s";
  }
  throw std::logic_error("axis_to_string: bad enum");
}

namespace {

constexpr std::uint64_t kTagEvalSens = 0x10;
constexpr std::uint64_t kTagEvalComm = 0x11;

void hash_doubles(std::uint64_t& h, const double* p, std::size_t n) {
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
}

std::uint64_t frame_draw_hash(std::uint64_t h, const FrameBatch& f) {
  hash_doubles(h, &f.theta, 1);
  hash_doubles(h, &f.phi, 1);
  const double t = f.target ? 1.0 : 0.0;
  hash_doubles(h, &t, 1);
  hash_doubles(h, reinterpret_cast<const double*>(f.alpha_s.data()), 2 * f.alpha_s.size());
  hash_doubles(h, reinterpret_cast<const double*>(f.alpha_c.data()), 2 * f.alpha_c.size());
  hash_doubles(h, reinterpret_cast<const double*>(f.noise_c.data()), 2 * f.noise_c.size());
  hash_doubles(h, reinterpret_cast<const double*>(f.noise_s.data()), 2 * f.noise_s.entries().size());
  return h;
}

double binom_hw(double p, std::size_t n) {
  return n ? 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n)) : 0.0;
}

}  // namespace

SensingEval eval_sensing_point(const JcasSystem& sys, double snr_s_db, int n_win,
                               std::size_t trials, std::uint64_t seed, bool with_baselines) {
  const ScenarioConfig& cfg = sys.scenario;
  const double sigma_ns2 = cfg.sigma_s2 * std::pow(10.0, -snr_s_db / 10.0);
  const Constellation alphabet = sys.alphabet();
  const PrecodingVector v = sys.precoder();
  bool calibrated = false;
  const double tau = sys.threshold_for(n_win, sigma_ns2, &calibrated);

  std::vector<std::uint8_t> decisions(trials), np_decisions(trials), t_flags(trials);
  std::vector<double> theta_hat(trials), theta_true(trials);
  std::vector<double> esprit_sq;
  std::uint64_t draw_hash = 0xCBF29CE484222325ULL;

  for (std::size_t i = 0; i < trials; ++i) {
    RngStream rng(seed, substream_id(kTagEvalSens, static_cast<std::uint64_t>(n_win), i));
    FrameBatch f = make_frame(cfg, alphabet, n_win, sigma_ns2, cfg.sigma_nc2, rng);
    draw_hash = frame_draw_hash(draw_hash, f);
    CVec x(f.n_win);
    for (int n = 0; n < f.n_win; ++n) x[n] = alphabet.points[f.symbols[n]];
    const CMat y = transmit(x, v);
    const CMat z = sensing_channel(y, f.theta, f.target, f.alpha_s, f.noise_s);
    const CorrelationMatrix corr = correlate(z);
    const auto feats = sensing_features(corr, n_win, sigma_ns2);

    const DetectionResult r = detect(sys.detector, feats, tau, calibrated);
    decisions[i] = r.decision ? 1 : 0;
    theta_hat[i] = estimate_aoa(sys.angler, feats);
    t_flags[i] = f.target ? 1 : 0;
    theta_true[i] = f.theta;

    if (with_baselines) {
      np_decisions[i] = np_detector(z, sigma_ns2, cfg.p_false_alarm).decision ? 1 : 0;
      if (f.target) {
        const EspritResult e = esprit_aoa(corr);
        const double err = e.theta - f.theta;
        esprit_sq.push_back(err * err);
      }
    }
  }

  const SensingMetrics m = metric_sensing(decisions, t_flags, theta_hat, theta_true);
  SensingEval out;
  out.p_d = m.p_d;
  out.p_f = m.p_f;
  out.rmse = m.rmse_rad.value_or(0.0);
  out.bias = m.bias_rad.value_or(0.0);
  std::size_t n1 = 0;
  for (auto t : t_flags) n1 += t;
  out.p_d_hw = binom_hw(out.p_d, n1);
  out.p_f_hw = binom_hw(out.p_f, trials - n1);
  if (n1 && m.rmse_rad) {
    // delta-method half width for the RMSE
    std::vector<double> sq;
    for (std::size_t i = 0; i < trials; ++i)
      if (t_flags[i]) {
        const double e = theta_hat[i] - theta_true[i];
        sq.push_back(e * e);
      }
    double mean = 0.0;
    for (double s : sq) mean += s;
    mean /= static_cast<double>(sq.size());
    double var = 0.0;
    for (double s : sq) var += (s - mean) * (s - mean);
    var /= std::max<std::size_t>(1, sq.size() - 1);
    out.rmse_hw = out.rmse > 0.0
                      ? 1.96 * std::sqrt(var / static_cast<double>(sq.size())) / (2.0 * out.rmse)
                      : 0.0;
  }

  const double beta_s = avg_beam_gain(v, cfg.sens_area, 0.25 * M_PI / 180.0);
  out.beta_s_db = 10.0 * std::log10(std::max(beta_s, 1e-300));
  CrbParams cp;
  cp.k_antennas = cfg.k_antennas;
  cp.n_win = n_win;
  cp.sigma_ns2 = sigma_ns2;
  cp.beam_gain = std::max(beta_s, 1e-12);
  cp.sigma_s2 = cfg.sigma_s2;
  cp.theta = 0.0;
  out.crb_rmse = std::sqrt(crb_full(cp));

  if (with_baselines) {
    const SensingMetrics mnp = metric_sensing(np_decisions, t_flags, theta_hat, theta_true);
    out.p_d_np = mnp.p_d;
    out.p_f_np = mnp.p_f;
    if (!esprit_sq.empty()) {
      double s = 0.0;
      for (double e : esprit_sq) s += e;
      out.rmse_esprit = std::sqrt(s / static_cast<double>(esprit_sq.size()));
    }
  }
  out.draw_hash = draw_hash;
  return out;
}

CommEval eval_comm_point(const JcasSystem& sys, double snr_c_db, std::size_t symbols,
                         std::uint64_t seed, bool with_mld) {
  const ScenarioConfig& cfg = sys.scenario;
  const double sigma_nc2 = cfg.sigma_c2 * std::pow(10.0, -snr_c_db / 10.0);
  const Constellation alphabet = sys.alphabet();
  const PrecodingVector v = sys.precoder();
  const std::size_t nbits = alphabet.bits_per_symbol();

  std::vector<double> llr_nn, llr_mld;
  std::vector<std::uint8_t> bits;
  llr_nn.reserve(symbols * nbits);
  bits.reserve(symbols * nbits);
  std::size_t err_nn = 0, err_mld = 0;
  std::uint64_t draw_hash = 0xCBF29CE484222325ULL;

  for (std::size_t i = 0; i < symbols; ++i) {
    RngStream rng(seed, substream_id(kTagEvalComm, 1, i));
    FrameBatch f = make_frame(cfg, alphabet, 1, cfg.sigma_ns2, sigma_nc2, rng);
    draw_hash = frame_draw_hash(draw_hash, f);
    const CVec x{alphabet.points[f.symbols[0]]};
    const CMat y = transmit(x, v);
    const CommOutput co = comm_channel(y, v, f.phi, f.alpha_c, f.noise_c);

    const MmseOutput eq = mmse_equalize(co.z[0], co.gamma[0], sigma_nc2);
    const auto l_nn = demap_nn(sys.demapper, eq.x_eq, co.gamma[0], sigma_nc2);
    const auto hard_nn = harden(l_nn);
    for (std::size_t b = 0; b < nbits; ++b) {
      llr_nn.push_back(l_nn[b]);
      bits.push_back(f.bits[b]);
      err_nn += hard_nn[b] != f.bits[b];
    }
    if (with_mld) {
      const auto l_mld = demap_mld(alphabet, co.z[0], co.gamma[0], sigma_nc2);
      const auto hard_mld = harden(l_mld);
      for (std::size_t b = 0; b < nbits; ++b) {
        llr_mld.push_back(l_mld[b]);
        err_mld += hard_mld[b] != f.bits[b];
      }
    }
  }

  CommEval out;
  const std::size_t total_bits = symbols * nbits;
  out.ber = total_bits ? static_cast<double>(err_nn) / static_cast<double>(total_bits) : 0.0;
  out.ber_hw = binom_hw(out.ber, total_bits);
  out.bmi = metric_bmi(llr_nn, bits, alphabet.order);
  if (with_mld) {
    out.ber_mld = total_bits ? static_cast<double>(err_mld) / static_cast<double>(total_bits) : 0.0;
    out.bmi_mld = metric_bmi(llr_mld, bits, alphabet.order);
  }
  const double beta_c = avg_beam_gain(v, cfg.comm_area, 0.25 * M_PI / 180.0);
  out.snr_plus_beta_db = snr_c_db + 10.0 * std::log10(std::max(beta_c, 1e-300));
  out.draw_hash = draw_hash;
  return out;
}

Table sweep(const JcasSystem& sys, SweepAxis axis, const std::vector<double>& grid,
            std::size_t trials, const SweepOptions& opt) {
  Table t;
  t.add_meta("axis", axis_to_string(axis));
  t.add_meta("seed", std::to_string(opt.seed));
  t.add_meta("w_s", std::to_string(sys.w_s));
  switch (axis) {
    case SweepAxis::snr_c: {
      t.header = {"snr_c_db", "snr_plus_beta_db", "ber", "ber_hw", "bmi_bits", "ber_mld", "bmi_mld"};
      if (trials == 0) return t;
      for (double g : grid) {
        const CommEval e = eval_comm_point(sys, g, trials, opt.seed, opt.with_baselines);
        t.rows.push_back({g, e.snr_plus_beta_db, e.ber, e.ber_hw, e.bmi, e.ber_mld, e.bmi_mld});
      }
      break;
    }
    case SweepAxis::snr_s: {
      t.header = {"snr_s_db", "snr_eff_db", "n_win", "p_d", "p_d_hw", "p_f", "p_f_hw",
                  "rmse_rad", "rmse_hw", "bias_rad", "p_d_np", "p_f_np", "rmse_esprit",
                  "crb_rmse_rad"};
      if (trials == 0) return t;
      for (double g : grid) {
        const SensingEval e =
            eval_sensing_point(sys, g, opt.fixed_n_win, trials, opt.seed, opt.with_baselines);
        t.rows.push_back({g, g + e.beta_s_db, static_cast<double>(opt.fixed_n_win), e.p_d, e.p_d_hw,
                          e.p_f, e.p_f_hw, e.rmse, e.rmse_hw, e.bias, e.p_d_np, e.p_f_np,
                          e.rmse_esprit, e.crb_rmse});
      }
      break;
    }
    case SweepAxis::n_win: {
      t.header = {"n_win", "snr_s_db", "p_d", "p_d_hw", "p_f", "p_f_hw", "rmse_rad", "rmse_hw",
                  "bias_rad", "p_d_np", "p_f_np", "rmse_esprit", "crb_rmse_rad"};
      if (trials == 0) return t;
      for (double g : grid) {
        const int n_win = static_cast<int>(g);
        const SensingEval e =
            eval_sensing_point(sys, opt.fixed_snr_s_db, n_win, trials, opt.seed, opt.with_baselines);
        t.rows.push_back({g, opt.fixed_snr_s_db, e.p_d, e.p_d_hw, e.p_f, e.p_f_hw, e.rmse,
                          e.rmse_hw, e.bias, e.p_d_np, e.p_f_np, e.rmse_esprit, e.crb_rmse});
      }
      break;
    }
    case SweepAxis::w_s:
      throw std::invalid_argument("sweep: the w_s axis needs one checkpoint per grid point; use sweep_ws");
  }
  return t;
}

Table sweep_ws(const std::vector<JcasSystem>& systems, std::size_t trials,
               const SweepOptions& opt) {
  Table t;
  t.header = {"w_s", "bmi_bits", "ber", "rmse_rad", "p_d", "p_f"};
  t.add_meta("axis", "w_s");
  t.add_meta("seed", std::to_string(opt.seed));
  t.add_meta("snr_c_db", std::to_string(opt.fixed_snr_c_db));
  t.add_meta("snr_s_db", std::to_string(opt.fixed_snr_s_db_ws));
  if (trials == 0) return t;
  for (const auto& sys : systems) {
    const CommEval ce = eval_comm_point(sys, opt.fixed_snr_c_db, trials, opt.seed, false);
    const SensingEval se =
        eval_sensing_point(sys, opt.fixed_snr_s_db_ws, opt.fixed_n_win, trials, opt.seed, false);
    t.rows.push_back({sys.w_s, ce.bmi, ce.ber, se.rmse, se.p_d, se.p_f});
  }
  return t;
}

}  // namespace jcas
