#include "jcas/mimo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "jcas/comm_rx.hpp"
#include "jcas/sensing_rx.hpp"
#include "pipeline_common.hpp"

namespace jcas {

namespace {

const double kLn2 = std::log(2.0);

constexpr std::uint64_t kTagMimoInit = 0x21;
constexpr std::uint64_t kTagMimoPre = 0x22;
constexpr std::uint64_t kTagMimoFine = 0x23;
constexpr std::uint64_t kTagMimoLimit = 0x24;
constexpr std::uint64_t kTagMimoEval = 0x25;

std::size_t ilog2(std::size_t m) {
  std::size_t c = 0;
  while ((std::size_t{1} << c) < m) ++c;
  return c;
}

}  // namespace

void MimoScenario::validate() const {
  base.validate();
  if (ue_angles.size() < 1) throw std::invalid_argument("MimoScenario: need at least one UE");
  for (double a : ue_angles)
    if (!(a > -M_PI / 2 && a < M_PI / 2))
      throw std::invalid_argument("MimoScenario: UE angle outside (-pi/2, pi/2)");
}

CMat mimo_transmit(const PrecodingMatrix& v, const CMat& x) {
  if (v.v.cols() != x.rows()) throw std::invalid_argument("mimo_transmit: UE count mismatch");
  return v.v * x;
}

PrecodingMatrix mimo_beamformer_head(const Mlp& net, const std::vector<double>& inputs,
                                     std::size_t k_antennas, std::size_t n_ue) {
  RealMat batch(1, inputs.size());
  batch.a = inputs;
  Tape tape = mlp_forward(net, std::move(batch));
  PrecodingMatrix out;
  out.v = CMat(k_antennas, n_ue);
  double norm2 = 0.0;
  for (std::size_t u = 0; u < n_ue; ++u)
    for (std::size_t k = 0; k < k_antennas; ++k) {
      const std::size_t at = 2 * (u * k_antennas + k);
      out.v(k, u) = {tape.head_out(0, at), tape.head_out(0, at + 1)};
      norm2 += std::norm(out.v(k, u));
    }
  if (norm2 == 0.0) {
    const double val = 1.0 / std::sqrt(static_cast<double>(k_antennas * n_ue));
    for (std::size_t u = 0; u < n_ue; ++u)
      for (std::size_t k = 0; k < k_antennas; ++k) out.v(k, u) = {val, 0.0};
  }
  return out;
}

MimoCommOutput mimo_comm_channel(const CMat& y, const PrecodingMatrix& v, std::size_t ue,
                                 double theta_ue, const CVec& alpha, const CVec& noise) {
  if (alpha.size() != y.cols() || noise.size() != y.cols())
    throw std::invalid_argument("mimo_comm_channel: tap/noise length mismatch");
  const std::size_t k = y.rows();
  const std::size_t n_ue = v.v.cols();
  if (ue >= n_ue) throw std::invalid_argument("mimo_comm_channel: UE index out of range");
  const CVec a = steering_vector(theta_ue, k);

  MimoCommOutput out;
  out.row.assign(n_ue, cplx{0.0, 0.0});
  for (std::size_t m = 0; m < n_ue; ++m)
    for (std::size_t i = 0; i < k; ++i) out.row[m] += a[i] * v.v(i, m);

  double other_power = 0.0;
  for (std::size_t m = 0; m < n_ue; ++m)
    if (m != ue) other_power += std::norm(out.row[m]);

  out.z.resize(y.cols());
  out.gamma.resize(y.cols());
  out.interference.resize(y.cols());
  for (std::size_t n = 0; n < y.cols(); ++n) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += a[i] * y(i, n);
    out.z[n] = s * alpha[n] + noise[n];
    out.gamma[n] = out.row[ue] * alpha[n];
    out.interference[n] = std::norm(alpha[n]) * other_power;
  }
  return out;
}

PrecodingMatrix MimoSystem::precoding() const {
  std::vector<double> inputs = {scenario.base.sens_area.lo, scenario.base.sens_area.hi};
  inputs.insert(inputs.end(), scenario.ue_angles.begin(), scenario.ue_angles.end());
  return mimo_beamformer_head(precoder, inputs, scenario.base.k_antennas, scenario.n_ue());
}

std::uint64_t MimoSystem::param_hash_all() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto absorb = [&h](std::uint64_t ph) {
    for (int i = 0; i < 8; ++i) {
      h ^= (ph >> (8 * i)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  };
  absorb(precoder.param_hash());
  absorb(detector.param_hash());
  absorb(angler.param_hash());
  for (const auto& d : demappers) absorb(d.param_hash());
  return h;
}

MimoSystem make_mimo_system(const MimoScenario& sc, std::uint64_t seed) {
  sc.validate();
  const std::size_t k = sc.base.k_antennas;
  const std::size_t m = sc.mod_order;
  const std::size_t nbits = ilog2(m);
  const std::size_t n_ue = sc.n_ue();

  MimoSystem sys;
  sys.scenario = sc;
  RngStream r_pre(seed, substream_id(kTagMimoInit, 1));
  RngStream r_det(seed, substream_id(kTagMimoInit, 2));
  RngStream r_ang(seed, substream_id(kTagMimoInit, 3));
  sys.precoder = mlp_init({2 + n_ue, k, k, 2 * k, 2 * k * n_ue}, Head::power_normalized, r_pre);
  sys.detector = mlp_init({2 * k * k + 2, 2 * k, 2 * k, k, 1}, Head::sigmoid_offset, r_det);
  sys.angler = mlp_init({2 * k * k + 2, 8 * k, 4 * k, 4 * k, k, 1}, Head::scaled_tanh, r_ang);
  for (std::size_t u = 0; u < n_ue; ++u) {
    RngStream r_dem(seed, substream_id(kTagMimoInit, 10 + u));
    sys.demappers.push_back(
        mlp_init({3, 10 * m, 10 * m, 10 * m, 10 * m, nbits}, Head::linear, r_dem));
  }
  sys.alphabet = make_psk(m);  // QPSK per UE
  return sys;
}

MimoFrame make_mimo_frame(const MimoScenario& sc, const Constellation& alphabet, int n_win,
                          double sigma_ns2, double sigma_nc2, RngStream& rng) {
  MimoFrame f;
  const std::size_t n_ue = sc.n_ue();
  f.n_win = n_win;
  f.sigma_ns2 = sigma_ns2;
  f.sigma_nc2 = sigma_nc2;
  f.theta = rng.uniform(sc.base.sens_area.lo, sc.base.sens_area.hi);
  f.target = rng.bernoulli(sc.base.target_prior);
  const std::size_t nbits = alphabet.bits_per_symbol();
  f.symbols.resize(n_ue);
  f.bits.resize(n_ue);
  f.alpha.resize(n_ue);
  f.noise_c.resize(n_ue);
  for (std::size_t u = 0; u < n_ue; ++u) {
    f.symbols[u].resize(n_win);
    f.bits[u].resize(nbits * n_win);
    for (int n = 0; n < n_win; ++n) {
      const std::size_t idx = rng.uniform_int(alphabet.order);
      f.symbols[u][n] = static_cast<int>(idx);
      for (std::size_t b = 0; b < nbits; ++b) f.bits[u][n * nbits + b] = alphabet.bit_labels[idx][b];
    }
    f.alpha[u] = sample_cnormal(rng, {0.0, 0.0}, sc.base.sigma_c2, n_win);
    f.noise_c[u] = sample_cnormal(rng, {0.0, 0.0}, sigma_nc2, n_win);
  }
  f.alpha_s = sample_cnormal(rng, {0.0, 0.0}, sc.base.sigma_s2, n_win);
  f.noise_s = CMat(sc.base.k_antennas, n_win);
  for (std::size_t k = 0; k < sc.base.k_antennas; ++k)
    for (int n = 0; n < n_win; ++n) f.noise_s(k, n) = rng.cnormal({0.0, 0.0}, sigma_ns2);
  return f;
}

LossParts mimo_forward_backward(const MimoSystem& sys, const std::vector<MimoFrame>& windows,
                                const LossWeights& w, bool modified_angle_loss,
                                MimoGradBundle* grads) {
  const std::size_t k = sys.scenario.base.k_antennas;
  const std::size_t n_ue = sys.scenario.n_ue();
  const std::size_t nbits = ilog2(sys.scenario.mod_order);
  const std::size_t n_windows = windows.size();
  const Constellation& alphabet = sys.alphabet;

  // precoder forward
  std::vector<double> inputs = {sys.scenario.base.sens_area.lo, sys.scenario.base.sens_area.hi};
  inputs.insert(inputs.end(), sys.scenario.ue_angles.begin(), sys.scenario.ue_angles.end());
  RealMat in_row(1, inputs.size());
  in_row.a = inputs;
  Tape pre_tape = mlp_forward(sys.precoder, std::move(in_row));
  PrecodingMatrix V;
  V.v = CMat(k, n_ue);
  for (std::size_t u = 0; u < n_ue; ++u)
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t at = 2 * (u * k + i);
      V.v(i, u) = {pre_tape.head_out(0, at), pre_tape.head_out(0, at + 1)};
    }

  // effective rows per UE: r_u = a(theta_ue)^T V
  std::vector<CVec> ue_steer(n_ue);
  std::vector<CVec> ue_row(n_ue, CVec(n_ue, cplx{0.0, 0.0}));
  for (std::size_t u = 0; u < n_ue; ++u) {
    ue_steer[u] = steering_vector(sys.scenario.ue_angles[u], k);
    for (std::size_t m = 0; m < n_ue; ++m)
      for (std::size_t i = 0; i < k; ++i) ue_row[u][m] += ue_steer[u][i] * V.v(i, m);
  }

  std::size_t n_symbols = 0;
  for (const auto& f : windows) n_symbols += static_cast<std::size_t>(f.n_win);

  struct WindowFwd {
    CVec a_s;
    CMat x;    // N_ue x n_win transmit symbols
    CMat y;    // K x n_win
    CMat z_s;
    std::vector<std::vector<detail::EqForward>> eq;  // [ue][n]
  };
  std::vector<WindowFwd> fwd(n_windows);

  RealMat det_batch(n_windows, 2 * k * k + 2);
  RealMat ang_batch(n_windows, 2 * k * k + 2);
  std::vector<RealMat> dem_batch(n_ue, RealMat(n_symbols, 3));
  std::vector<double> det_offsets(n_windows, 0.0);
  std::vector<std::uint8_t> t_flags(n_windows);
  BatchLabels labels;
  labels.targets.resize(n_windows);
  labels.thetas.resize(n_windows);
  labels.n_wins.resize(n_windows);
  labels.sigma_ns2.resize(n_windows);
  std::vector<std::vector<std::uint8_t>> bits_flat(n_ue);

  std::size_t sym_at = 0;
  for (std::size_t wi = 0; wi < n_windows; ++wi) {
    const MimoFrame& f = windows[wi];
    WindowFwd& wf = fwd[wi];
    wf.a_s = steering_vector(f.theta, k);
    wf.x = CMat(n_ue, f.n_win);
    for (std::size_t u = 0; u < n_ue; ++u)
      for (int n = 0; n < f.n_win; ++n) wf.x(u, n) = alphabet.points[f.symbols[u][n]];
    wf.y = mimo_transmit(V, wf.x);
    wf.z_s = sensing_channel(wf.y, f.theta, f.target, f.alpha_s, f.noise_s);
    const auto feats = sensing_features(correlate(wf.z_s), f.n_win, f.sigma_ns2);
    for (std::size_t c = 0; c < feats.size(); ++c) {
      det_batch(wi, c) = feats[c];
      ang_batch(wi, c) = feats[c];
    }
    t_flags[wi] = f.target ? 1 : 0;
    labels.targets[wi] = t_flags[wi];
    labels.thetas[wi] = f.theta;
    labels.n_wins[wi] = f.n_win;
    labels.sigma_ns2[wi] = f.sigma_ns2;

    wf.eq.assign(n_ue, {});
    for (std::size_t u = 0; u < n_ue; ++u) {
      wf.eq[u].resize(f.n_win);
      double other_power = 0.0;
      for (std::size_t m = 0; m < n_ue; ++m)
        if (m != u) other_power += std::norm(ue_row[u][m]);
      for (int n = 0; n < f.n_win; ++n) {
        cplx s = 0.0;
        for (std::size_t m = 0; m < n_ue; ++m) s += ue_row[u][m] * wf.x(m, n);
        const cplx z = s * f.alpha[u][n] + f.noise_c[u][n];
        const cplx gamma = ue_row[u][u] * f.alpha[u][n];
        const double nu_eff = std::norm(f.alpha[u][n]) * other_power + f.sigma_nc2;
        wf.eq[u][n] = detail::mmse_forward(gamma, z, nu_eff);
        dem_batch[u](sym_at + n, 0) = wf.eq[u][n].x_eq.real();
        dem_batch[u](sym_at + n, 1) = wf.eq[u][n].x_eq.imag();
        dem_batch[u](sym_at + n, 2) = wf.eq[u][n].u3;
      }
      bits_flat[u].insert(bits_flat[u].end(), f.bits[u].begin(), f.bits[u].end());
    }
    sym_at += static_cast<std::size_t>(f.n_win);
  }

  Tape det_tape = mlp_forward(sys.detector, det_batch, det_offsets);
  Tape ang_tape = mlp_forward(sys.angler, ang_batch);
  std::vector<Tape> dem_tapes;
  dem_tapes.reserve(n_ue);
  for (std::size_t u = 0; u < n_ue; ++u)
    dem_tapes.push_back(mlp_forward(sys.demappers[u], dem_batch[u]));

  // adaptive batch threshold from noise-only scores, as in the single-user path
  std::vector<double> s_raw(n_windows);
  for (std::size_t wi = 0; wi < n_windows; ++wi) s_raw[wi] = det_tape.post.back()(wi, 0);
  double tau_batch = 0.0;
  std::size_t tau_window = SIZE_MAX;
  {
    std::vector<std::pair<double, std::size_t>> noise_scores;
    for (std::size_t wi = 0; wi < n_windows; ++wi)
      if (!t_flags[wi]) noise_scores.emplace_back(s_raw[wi], wi);
    if (noise_scores.size() >= 2) {
      std::sort(noise_scores.begin(), noise_scores.end());
      const double pf = sys.scenario.base.p_false_alarm;
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

  // per-UE rates and the fairness loss
  const double log2m = static_cast<double>(nbits);
  std::vector<std::vector<double>> llr(n_ue);
  std::vector<double> rates(n_ue);
  for (std::size_t u = 0; u < n_ue; ++u) {
    llr[u].resize(n_symbols * nbits);
    for (std::size_t s = 0; s < n_symbols; ++s)
      for (std::size_t b = 0; b < nbits; ++b) llr[u][s * nbits + b] = dem_tapes[u].head_out(s, b);
    rates[u] = log2m * (1.0 - loss_comm_bce(llr[u], bits_flat[u]));
  }

  LossParts parts;
  parts.comm = loss_alpha_fair(rates, w.alpha);
  parts.detect = loss_detect_bce(p_t, t_flags);
  parts.angle = modified_angle_loss ? loss_angle_crb_normalized(theta_hat, labels)
                                    : loss_angle_unmodified(theta_hat, labels);
  if (!grads) return parts;

  // ---- backward ----
  const std::vector<double> rate_grads = loss_alpha_fair_grad(rates, w.alpha);

  RealMat dscore(n_windows, 1), dtheta(n_windows, 1);
  const double inv_n = 1.0 / static_cast<double>(n_windows);
  double dtau = 0.0;
  for (std::size_t wi = 0; wi < n_windows; ++wi) {
    const double g = w.w_s * (p_t[wi] - static_cast<double>(t_flags[wi])) * inv_n / kLn2;
    dscore(wi, 0) = g;
    dtau += g;
    if (t_flags[wi]) {
      const double factor = modified_angle_loss
                                ? static_cast<double>(labels.n_wins[wi]) / labels.sigma_ns2[wi]
                                : 1.0;
      dtheta(wi, 0) = w.w_s * (-2.0) * inv_n * factor * (labels.thetas[wi] - theta_hat[wi]);
    }
  }
  if (tau_window != SIZE_MAX) dscore(tau_window, 0) -= dtau;

  RealMat det_in, ang_in;
  grads->detect = mlp_backward_raw(sys.detector, det_tape, dscore, &det_in);
  grads->angle = mlp_backward(sys.angler, ang_tape, dtheta, &ang_in);

  grads->demappers.resize(n_ue);
  std::vector<RealMat> dem_in(n_ue);
  for (std::size_t u = 0; u < n_ue; ++u) {
    // dL/d llr = dL/d rate * d rate/d bce * d bce/d llr
    const std::vector<double> bce_grad = loss_comm_bce_grad(llr[u], bits_flat[u]);
    RealMat dllr(n_symbols, nbits);
    const double scale = (1.0 - w.w_s) * rate_grads[u] * (-log2m);
    for (std::size_t i = 0; i < bce_grad.size(); ++i) dllr.a[i] = scale * bce_grad[i];
    grads->demappers[u] = mlp_backward(sys.demappers[u], dem_tapes[u], dllr, &dem_in[u]);
  }

  // glue back to the precoder
  CMat vdot(k, n_ue);
  std::vector<double> fdot(2 * k * k + 2);
  std::vector<CVec> rowdot_ue(n_ue, CVec(n_ue, cplx{0.0, 0.0}));  // adjoint of ue_row

  sym_at = 0;
  for (std::size_t wi = 0; wi < n_windows; ++wi) {
    const MimoFrame& f = windows[wi];
    const WindowFwd& wf = fwd[wi];

    if (f.target) {
      for (std::size_t c = 0; c < fdot.size(); ++c) fdot[c] = det_in(wi, c) + ang_in(wi, c);
      const CVec rowdot = detail::sensing_row_adjoint(wf.z_s, wf.a_s, f.alpha_s, fdot, f.sigma_ns2);
      // Y adjoint: Ydot_kn = conj(a_k) rowdot_n ; V adjoint: Vdot = Ydot X^H
      for (std::size_t i = 0; i < k; ++i) {
        const cplx ai = std::conj(wf.a_s[i]);
        for (std::size_t m = 0; m < n_ue; ++m) {
          cplx acc = 0.0;
          for (int n = 0; n < f.n_win; ++n) acc += ai * rowdot[n] * std::conj(wf.x(m, n));
          vdot(i, m) += acc;
        }
      }
    }

    for (std::size_t u = 0; u < n_ue; ++u) {
      double other_power = 0.0;
      for (std::size_t m = 0; m < n_ue; ++m)
        if (m != u) other_power += std::norm(ue_row[u][m]);
      for (int n = 0; n < f.n_win; ++n) {
        const cplx edot{dem_in[u](sym_at + n, 0), dem_in[u](sym_at + n, 1)};
        const double u3dot = dem_in[u](sym_at + n, 2);
        const detail::EqAdjoint adj = detail::mmse_backward(wf.eq[u][n], edot, u3dot);
        // z = (sum_m r_m x_mn) alpha + noise
        const cplx sdot = std::conj(f.alpha[u][n]) * adj.z_dot;
        for (std::size_t m = 0; m < n_ue; ++m) rowdot_ue[u][m] += std::conj(wf.x(m, n)) * sdot;
        // gamma = r_u * alpha
        rowdot_ue[u][u] += std::conj(f.alpha[u][n]) * adj.gamma_dot;
        // nu_eff = |alpha|^2 * sum_{m != u} |r_m|^2 + sigma_nc2
        const double a2 = std::norm(f.alpha[u][n]);
        for (std::size_t m = 0; m < n_ue; ++m)
          if (m != u) rowdot_ue[u][m] += 2.0 * ue_row[u][m] * adj.nu_dot * a2;
      }
    }
    sym_at += static_cast<std::size_t>(f.n_win);
  }

  // r_u = a(theta_u)^T V: V adjoint accumulation
  for (std::size_t u = 0; u < n_ue; ++u)
    for (std::size_t m = 0; m < n_ue; ++m) {
      const cplx rd = rowdot_ue[u][m];
      if (rd == cplx{0.0, 0.0}) continue;
      for (std::size_t i = 0; i < k; ++i) vdot(i, m) += std::conj(ue_steer[u][i]) * rd;
    }

  RealMat gv(1, 2 * k * n_ue);
  for (std::size_t u = 0; u < n_ue; ++u)
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t at = 2 * (u * k + i);
      gv(0, at) = vdot(i, u).real();
      gv(0, at + 1) = vdot(i, u).imag();
    }
  grads->precoder = mlp_backward(sys.precoder, pre_tape, gv);
  return parts;
}

namespace {

std::vector<MimoFrame> draw_mimo_batch(const MimoSystem& sys, const TrainPlan& plan,
                                       std::uint64_t tag, std::size_t step,
                                       std::size_t batch_symbols) {
  std::vector<MimoFrame> windows;
  std::size_t symbols = 0;
  std::size_t idx = 0;
  while (symbols < batch_symbols) {
    RngStream rng(plan.seed, substream_id(tag, step, idx++));
    const int span = plan.n_win_max - plan.n_win_min + 1;
    const int n_win = plan.n_win_min + static_cast<int>(rng.uniform_int(span));
    const double snr_s_db = rng.uniform(plan.snr_s_db_lo, plan.snr_s_db_hi);
    const double snr_c_db = rng.uniform(plan.snr_c_db_lo, plan.snr_c_db_hi);
    const double sigma_ns2 = sys.scenario.base.sigma_s2 * std::pow(10.0, -snr_s_db / 10.0);
    const double sigma_nc2 = sys.scenario.base.sigma_c2 * std::pow(10.0, -snr_c_db / 10.0);
    windows.push_back(make_mimo_frame(sys.scenario, sys.alphabet, n_win, sigma_ns2, sigma_nc2, rng));
    symbols += static_cast<std::size_t>(n_win);
  }
  return windows;
}

TrainReport run_mimo_phase(MimoSystem& sys, const TrainPlan& plan, std::uint64_t tag,
                           const char* name, std::size_t budget, bool comm_live) {
  plan.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.phase = name;
  report.seed = plan.seed;

  AdamState ad_pre = adam_init(sys.precoder, plan.learning_rate);
  AdamState ad_det = adam_init(sys.detector, plan.learning_rate);
  AdamState ad_ang = adam_init(sys.angler, plan.learning_rate);
  std::vector<AdamState> ad_dem;
  for (const auto& d : sys.demappers) ad_dem.push_back(adam_init(d, plan.learning_rate));

  LossWeights w;
  w.w_s = plan.w_s;
  w.alpha = plan.alpha_fair;

  std::size_t consumed = 0, step = 0;
  while (consumed < budget) {
    const std::size_t batch = std::min(plan.batch_symbols, budget - consumed);
    const auto windows = draw_mimo_batch(sys, plan, tag, step, batch);
    MimoGradBundle grads;
    LossWeights wphase = w;
    if (!comm_live) wphase.w_s = 1.0;  // sensing-only pre-training
    const LossParts parts =
        mimo_forward_backward(sys, windows, wphase, plan.angle_loss_modified, &grads);

    adam_step(sys.precoder, grads.precoder, ad_pre);
    adam_step(sys.detector, grads.detect, ad_det);
    adam_step(sys.angler, grads.angle, ad_ang);
    if (comm_live)
      for (std::size_t u = 0; u < sys.demappers.size(); ++u)
        adam_step(sys.demappers[u], grads.demappers[u], ad_dem[u]);

    for (const auto& f : windows) consumed += static_cast<std::size_t>(f.n_win);
    report.trace.push_back({step, parts.comm, parts.detect, parts.angle, loss_total(parts, wphase)});
    ++step;
  }
  report.symbols_consumed = consumed;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

TrainReport mimo_pretrain(MimoSystem& sys, const TrainPlan& plan) {
  return run_mimo_phase(sys, plan, kTagMimoPre, "mimo_pretrain", plan.pretrain_symbols, false);
}

TrainReport mimo_finetune(MimoSystem& sys, const TrainPlan& plan) {
  sys.w_s = plan.w_s;
  sys.alpha_fair = plan.alpha_fair;
  return run_mimo_phase(sys, plan, kTagMimoFine, "mimo_finetune", plan.finetune_symbols, true);
}

ThresholdTable mimo_limit(MimoSystem& sys, const TrainPlan& plan) {
  plan.validate();
  MimoScenario sc = sys.scenario;
  sc.base.target_prior = 0.0;
  const PrecodingMatrix V = sys.precoding();

  ThresholdTable table;
  const int n_knots = 9;
  for (int g = 0; g < n_knots; ++g) {
    const double snr_db =
        plan.snr_s_db_lo + (plan.snr_s_db_hi - plan.snr_s_db_lo) * g / (n_knots - 1);
    table.knots_log_sigma2.push_back(std::log10(sc.base.sigma_s2) - snr_db / 10.0);
  }
  std::sort(table.knots_log_sigma2.begin(), table.knots_log_sigma2.end());

  const std::size_t per_knot = std::max<std::size_t>(plan.limit_windows / 2, 1000);
  for (int n_win = plan.n_win_min; n_win <= plan.n_win_max; ++n_win) {
    std::vector<double> taus(table.knots_log_sigma2.size());
    for (std::size_t kn = 0; kn < table.knots_log_sigma2.size(); ++kn) {
      const double sigma_ns2 = std::pow(10.0, table.knots_log_sigma2[kn]);
      std::vector<double> scores;
      scores.reserve(per_knot);
      for (std::size_t i = 0; i < per_knot; ++i) {
        RngStream rng(plan.seed,
                      substream_id(kTagMimoLimit, static_cast<std::uint64_t>(n_win) * 64 + kn, i));
        MimoFrame f = make_mimo_frame(sc, sys.alphabet, n_win, sigma_ns2, sc.base.sigma_nc2, rng);
        CMat x(sc.n_ue(), n_win);
        for (std::size_t u = 0; u < sc.n_ue(); ++u)
          for (int n = 0; n < n_win; ++n) x(u, n) = sys.alphabet.points[f.symbols[u][n]];
        const CMat y = mimo_transmit(V, x);
        const CMat z = sensing_channel(y, f.theta, f.target, f.alpha_s, f.noise_s);
        const auto feats = sensing_features(correlate(z), n_win, sigma_ns2);
        scores.push_back(detect(sys.detector, feats, 0.0, false).score);
      }
      taus[kn] = calibrate_threshold(scores, sys.scenario.base.p_false_alarm).tau;
    }
    table.tau[n_win] = std::move(taus);
  }
  sys.thresholds = table;
  return table;
}

// ---- checkpoint ----------------------------------------------------------

namespace {

using nlohmann::json;

json mimo_net_to_json(const Mlp& net) {
  json j;
  j["sizes"] = net.sizes;
  j["head"] = head_to_string(net.head);
  json ws = json::array();
  for (const auto& m : net.w) ws.push_back(m.a);
  j["weights"] = ws;
  j["biases"] = net.b;
  return j;
}

Mlp mimo_net_from_json(const json& j) {
  Mlp net;
  net.sizes = j.at("sizes").get<std::vector<std::size_t>>();
  net.head = head_from_string(j.at("head").get<std::string>());
  const auto& ws = j.at("weights");
  const auto& bs = j.at("biases");
  for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
    RealMat m(net.sizes[l], net.sizes[l + 1]);
    m.a = ws.at(l).get<std::vector<double>>();
    net.w.push_back(std::move(m));
    net.b.push_back(bs.at(l).get<std::vector<double>>());
  }
  return net;
}

}  // namespace

void save_mimo_checkpoint(const MimoSystem& sys, const std::string& path) {
  json j;
  j["format"] = "jcas-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = "mimo";
  j["w_s"] = sys.w_s;
  j["alpha_fair"] = sys.alpha_fair;
  j["mod_order"] = sys.scenario.mod_order;
  j["ue_angles"] = sys.scenario.ue_angles;
  j["scenario"] = {{"k", sys.scenario.base.k_antennas},
                   {"sens_area", {sys.scenario.base.sens_area.lo, sys.scenario.base.sens_area.hi}},
                   {"comm_area", {sys.scenario.base.comm_area.lo, sys.scenario.base.comm_area.hi}},
                   {"sigma_c2", sys.scenario.base.sigma_c2},
                   {"sigma_s2", sys.scenario.base.sigma_s2},
                   {"sigma_nc2", sys.scenario.base.sigma_nc2},
                   {"sigma_ns2", sys.scenario.base.sigma_ns2},
                   {"target_prior", sys.scenario.base.target_prior},
                   {"p_false_alarm", sys.scenario.base.p_false_alarm}};
  j["nets"] = {{"precoder", mimo_net_to_json(sys.precoder)},
               {"detector", mimo_net_to_json(sys.detector)},
               {"angler", mimo_net_to_json(sys.angler)}};
  json dem = json::array();
  for (const auto& d : sys.demappers) dem.push_back(mimo_net_to_json(d));
  j["demappers"] = dem;
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

MimoSystem load_mimo_checkpoint(const std::string& path) {
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
  if (j.value("kind", "") != "mimo")
    throw std::runtime_error("checkpoint holds a different system kind: " + j.value("kind", "?"));

  MimoSystem sys;
  sys.w_s = j.at("w_s").get<double>();
  sys.alpha_fair = j.at("alpha_fair").get<double>();
  sys.scenario.mod_order = j.at("mod_order").get<std::size_t>();
  sys.scenario.ue_angles = j.at("ue_angles").get<std::vector<double>>();
  const auto& sc = j.at("scenario");
  sys.scenario.base.k_antennas = sc.at("k").get<std::size_t>();
  sys.scenario.base.mod_order = sys.scenario.mod_order;
  sys.scenario.base.sens_area = {sc.at("sens_area")[0].get<double>(),
                                 sc.at("sens_area")[1].get<double>()};
  sys.scenario.base.comm_area = {sc.at("comm_area")[0].get<double>(),
                                 sc.at("comm_area")[1].get<double>()};
  sys.scenario.base.sigma_c2 = sc.at("sigma_c2").get<double>();
  sys.scenario.base.sigma_s2 = sc.at("sigma_s2").get<double>();
  sys.scenario.base.sigma_nc2 = sc.at("sigma_nc2").get<double>();
  sys.scenario.base.sigma_ns2 = sc.at("sigma_ns2").get<double>();
  sys.scenario.base.target_prior = sc.at("target_prior").get<double>();
  sys.scenario.base.p_false_alarm = sc.at("p_false_alarm").get<double>();
  sys.precoder = mimo_net_from_json(j.at("nets").at("precoder"));
  sys.detector = mimo_net_from_json(j.at("nets").at("detector"));
  sys.angler = mimo_net_from_json(j.at("nets").at("angler"));
  for (const auto& d : j.at("demappers")) sys.demappers.push_back(mimo_net_from_json(d));
  const auto& th = j.at("thresholds");
  sys.thresholds.knots_log_sigma2 = th.at("knots_log_sigma2").get<std::vector<double>>();
  for (const auto& [key, val] : th.at("tau").items())
    sys.thresholds.tau[std::stoi(key)] = val.get<std::vector<double>>();
  sys.alphabet = make_psk(sys.scenario.mod_order);
  return sys;
}

// ---- evaluation ----------------------------------------------------------

MimoCommEval eval_mimo_comm_point(const MimoSystem& sys, double snr_c_db, std::size_t symbols,
                                  std::uint64_t seed) {
  const MimoScenario& sc = sys.scenario;
  const double sigma_nc2 = sc.base.sigma_c2 * std::pow(10.0, -snr_c_db / 10.0);
  const std::size_t n_ue = sc.n_ue();
  const std::size_t nbits = sys.alphabet.bits_per_symbol();
  const PrecodingMatrix V = sys.precoding();

  std::vector<std::size_t> errs(n_ue, 0);
  std::vector<std::vector<double>> llrs(n_ue);
  std::vector<std::vector<std::uint8_t>> bits(n_ue);

  for (std::size_t i = 0; i < symbols; ++i) {
    RngStream rng(seed, substream_id(kTagMimoEval, 1, i));
    MimoFrame f = make_mimo_frame(sc, sys.alphabet, 1, sc.base.sigma_ns2, sigma_nc2, rng);
    CMat x(n_ue, 1);
    for (std::size_t u = 0; u < n_ue; ++u) x(u, 0) = sys.alphabet.points[f.symbols[u][0]];
    const CMat y = mimo_transmit(V, x);
    for (std::size_t u = 0; u < n_ue; ++u) {
      const MimoCommOutput co =
          mimo_comm_channel(y, V, u, sc.ue_angles[u], f.alpha[u], f.noise_c[u]);
      const double nu_eff = co.interference[0] + sigma_nc2;
      const detail::EqForward eq = detail::mmse_forward(co.gamma[0], co.z[0], nu_eff);
      RealMat row(1, 3);
      row.a = {eq.x_eq.real(), eq.x_eq.imag(), eq.u3};
      Tape tape = mlp_forward(sys.demappers[u], std::move(row));
      for (std::size_t b = 0; b < nbits; ++b) {
        const double l = tape.head_out(0, b);
        llrs[u].push_back(l);
        bits[u].push_back(f.bits[u][b]);
        errs[u] += (l < 0.0 ? 1 : 0) != static_cast<int>(f.bits[u][b]);
      }
    }
  }

  MimoCommEval out;
  for (std::size_t u = 0; u < n_ue; ++u) {
    out.ber.push_back(static_cast<double>(errs[u]) /
                      static_cast<double>(std::max<std::size_t>(1, symbols * nbits)));
    out.bmi.push_back(metric_bmi(llrs[u], bits[u], sys.alphabet.order));
  }
  return out;
}

Table mimo_beam_table(const MimoSystem& sys) {
  const PrecodingMatrix V = sys.precoding();
  const std::size_t k = sys.scenario.base.k_antennas;
  const std::size_t n_ue = sys.scenario.n_ue();
  Table t;
  t.header = {"angle_deg"};
  for (std::size_t u = 0; u < n_ue; ++u) t.header.push_back("p_ue" + std::to_string(u + 1));
  t.header.push_back("p_sum");
  const auto grid = angle_grid(0.25 * M_PI / 180.0);
  for (double ang : grid) {
    const CVec a = steering_vector(ang, k);
    std::vector<double> row{ang * 180.0 / M_PI};
    double sum = 0.0;
    for (std::size_t u = 0; u < n_ue; ++u) {
      cplx s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += a[i] * V.v(i, u);
      row.push_back(std::norm(s));
      sum += std::norm(s);
    }
    row.push_back(sum);
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace jcas
