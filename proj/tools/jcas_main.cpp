// Command-line front end: train systems, sweep metrics against the
// classical baselines, and emit the figure tables as CSV.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "jcas/baselines.hpp"
#include "jcas/comm_rx.hpp"
#include "jcas/config.hpp"
#include "jcas/csv.hpp"
#include "jcas/mimo.hpp"
#include "jcas/sensing_rx.hpp"
#include "jcas/special.hpp"
#include "jcas/trainer.hpp"

namespace fs = std::filesystem;
using namespace jcas;

namespace {

std::vector<double> parse_grid(const std::string& spec) {
  // "lo:hi:count" or "a,b,c"
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double lo, hi;
    int count;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1)
      throw CLI::ValidationError("grid", "expected lo:hi:count");
    for (int i = 0; i < count; ++i)
      out.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    return out;
  }
  std::istringstream is(spec);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw CLI::ValidationError("grid", "empty grid");
  return out;
}

void write_table(Table t, const std::string& path, std::uint64_t seed, std::uint64_t cfg_hash) {
  t.add_meta("seed", std::to_string(seed));
  t.add_meta("config_hash", hex64(cfg_hash));
  t.add_meta("format_version", "1");
  t.write(path);
  std::cout << "wrote " << path << "\n";
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              long long seed_override) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_override >= 0) {
    cfg.seed = static_cast<std::uint64_t>(seed_override);
    cfg.plan.seed = cfg.seed;
  }
  fs::create_directories(cfg.out_dir);

  if (cfg.mimo) {
    MimoSystem sys = make_mimo_system(*cfg.mimo, cfg.seed);
    const TrainReport pre = mimo_pretrain(sys, cfg.plan);
    const TrainReport fine = mimo_finetune(sys, cfg.plan);
    mimo_limit(sys, cfg.plan);
    const std::string ck = cfg.out_dir + "/checkpoint_mimo.json";
    save_mimo_checkpoint(sys, ck);
    write_table(pre.trace_table(), cfg.out_dir + "/loss_pretrain.csv", cfg.seed, cfg.config_hash);
    write_table(fine.trace_table(), cfg.out_dir + "/loss_finetune.csv", cfg.seed, cfg.config_hash);
    std::cout << "wrote " << ck << "\n";
    return 0;
  }

  JcasSystem sys = make_system(cfg.scenario, cfg.mode, cfg.apsk_r2, cfg.seed);
  const TrainReport pre = pretrain(sys, cfg.plan);
  const TrainReport fine = finetune(sys, cfg.plan);
  limit(sys, cfg.plan);
  const std::string ck = cfg.out_dir + "/checkpoint.json";
  save_checkpoint(sys, ck);
  write_table(pre.trace_table(), cfg.out_dir + "/loss_pretrain.csv", cfg.seed, cfg.config_hash);
  write_table(fine.trace_table(), cfg.out_dir + "/loss_finetune.csv", cfg.seed, cfg.config_hash);
  std::cout << "wrote " << ck << "\n";
  return 0;
}

int cmd_eval(const std::vector<std::string>& checkpoints, const std::string& axis_name,
             const std::string& grid_spec, std::size_t trials, double snr_s, int n_win,
             std::uint64_t seed, const std::string& out_path) {
  const SweepAxis axis = axis_from_string(axis_name);
  SweepOptions opt;
  opt.fixed_snr_s_db = snr_s;
  opt.fixed_n_win = n_win;
  opt.seed = seed;

  if (axis == SweepAxis::w_s) {
    std::vector<JcasSystem> systems;
    for (const auto& p : checkpoints) systems.push_back(load_checkpoint(p));
    write_table(sweep_ws(systems, trials, opt), out_path, seed, 0);
    return 0;
  }
  if (checkpoints.size() != 1)
    throw CLI::ValidationError("checkpoint", "this axis takes exactly one checkpoint");
  const JcasSystem sys = load_checkpoint(checkpoints[0]);
  write_table(sweep(sys, axis, parse_grid(grid_spec), trials, opt), out_path, seed, 0);
  return 0;
}

int cmd_figure(const std::string& name, const std::vector<std::string>& checkpoints,
               std::size_t trials, std::uint64_t seed, const std::string& out_path) {
  if (name == "beam") {
    if (checkpoints.empty()) throw CLI::ValidationError("checkpoint", "beam needs checkpoints");
    if (checkpoints.size() > 1) {
      // several operating points: emit the area power-fraction table
      Table t;
      t.header = {"w_s", "frac_sens", "frac_comm", "frac_out"};
      for (const auto& p : checkpoints) {
        const JcasSystem sys = load_checkpoint(p);
        const PowerFractions fr =
            area_power_fractions(sys.precoder(), sys.scenario, 0.25 * M_PI / 180.0);
        t.rows.push_back({sys.w_s, fr.sensing, fr.comm, fr.outside});
      }
      write_table(std::move(t), out_path, seed, 0);
      return 0;
    }
    // MIMO checkpoints carry per-UE patterns; single checkpoints one column
    std::ifstream probe(checkpoints[0]);
    std::string bytes((std::istreambuf_iterator<char>(probe)), std::istreambuf_iterator<char>());
    if (bytes.find("\"kind\": \"mimo\"") != std::string::npos ||
        bytes.find("\"kind\":\"mimo\"") != std::string::npos) {
      write_table(mimo_beam_table(load_mimo_checkpoint(checkpoints[0])), out_path, seed, 0);
      return 0;
    }
    const JcasSystem sys = load_checkpoint(checkpoints[0]);
    const PrecodingVector v = sys.precoder();
    Table t;
    t.header = {"angle_deg", "power"};
    const auto grid = angle_grid(0.25 * M_PI / 180.0);
    const auto p = beam_pattern(v, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      t.rows.push_back({grid[i] * 180.0 / M_PI, p[i]});
    const PowerFractions fr = area_power_fractions(v, sys.scenario, 0.25 * M_PI / 180.0);
    t.add_meta("frac_sens", std::to_string(fr.sensing));
    t.add_meta("frac_comm", std::to_string(fr.comm));
    t.add_meta("frac_outside", std::to_string(fr.outside));
    write_table(std::move(t), out_path, seed, 0);
    return 0;
  }
  if (name == "tradeoff") {
    std::vector<JcasSystem> systems;
    for (const auto& p : checkpoints) systems.push_back(load_checkpoint(p));
    SweepOptions opt;
    opt.seed = seed;
    write_table(sweep_ws(systems, trials, opt), out_path, seed, 0);
    return 0;
  }
  if (name == "kurtosis") {
    Table t;
    t.header = {"kappa", "dmin", "dmin_closed_form", "closed_form_valid", "source"};
    // source: 0 = two-ring reference curve, 1 = PSK marker, 2 = QAM marker, 3 = checkpoint
    for (double r2 = 0.55; r2 <= 1.0 + 1e-9; r2 += 0.01) {
      const Constellation apsk = make_apsk(ApskSpec{16, std::min(r2, 1.0)});
      const double kap = kurtosis(apsk);
      const DminResult closed = dmin_from_kappa(kap, 16);
      t.rows.push_back({kap, mean_min_distance(apsk), closed.dmin, closed.valid ? 1.0 : 0.0, 0.0});
    }
    const Constellation psk = make_psk(16);
    const Constellation qam = make_qam(16);
    t.rows.push_back({kurtosis(psk), mean_min_distance(psk), 0.0, 0.0, 1.0});
    t.rows.push_back({kurtosis(qam), mean_min_distance(qam), 0.0, 0.0, 2.0});
    for (const auto& p : checkpoints) {
      const JcasSystem sys = load_checkpoint(p);
      const Constellation c = sys.alphabet();
      t.rows.push_back({kurtosis(c), mean_min_distance(c), 0.0, 0.0, 3.0});
    }
    write_table(std::move(t), out_path, seed, 0);
    return 0;
  }
  if (name == "constellation") {
    Table t;
    t.header = {"w_s", "index", "re", "im"};
    for (const auto& p : checkpoints) {
      const JcasSystem sys = load_checkpoint(p);
      const Constellation c = sys.alphabet();
      for (std::size_t m = 0; m < c.order; ++m)
        t.rows.push_back({sys.w_s, static_cast<double>(m), c.points[m].real(), c.points[m].imag()});
    }
    write_table(std::move(t), out_path, seed, 0);
    return 0;
  }
  throw CLI::ValidationError("name", "unknown figure '" + name +
                                         "' (valid: beam, tradeoff, kurtosis, constellation)");
}

int cmd_baseline(const std::string& op, const std::string& grid_spec, std::size_t trials,
                 std::size_t k, int n_win, std::uint64_t seed, const std::string& out_path) {
  if (op == "crb") {
    Table t;
    t.header = {"snr_eff_db", "crb_rmse_rad"};
    for (double g : parse_grid(grid_spec)) {
      CrbParams p;
      p.k_antennas = k;
      p.n_win = n_win;
      p.sigma_ns2 = 1.0;
      p.beam_gain = std::pow(10.0, g / 10.0);
      p.sigma_s2 = 1.0;
      p.theta = 0.0;
      t.rows.push_back({g, std::sqrt(crb_full(p))});
    }
    write_table(std::move(t), out_path, seed, 0);
    return 0;
  }
  if (op == "np") {
    Table t;
    t.header = {"n_win", "p_f_empirical", "threshold"};
    for (double g : parse_grid(grid_spec)) {
      const int n = static_cast<int>(g);
      std::size_t alarms = 0;
      double threshold = 0;
      for (std::size_t i = 0; i < trials; ++i) {
        RngStream rng(seed, substream_id(0xBA5E, static_cast<std::uint64_t>(n), i));
        CMat z(k, n);
        for (std::size_t r = 0; r < k; ++r)
          for (int c = 0; c < n; ++c) z(r, c) = rng.cnormal({0, 0}, 1.0);
        const NpDetection d = np_detector(z, 1.0, 0.01);
        threshold = d.threshold;
        alarms += d.decision ? 1 : 0;
      }
      t.rows.push_back({g, static_cast<double>(alarms) / static_cast<double>(trials), threshold});
    }
    write_table(std::move(t), out_path, seed, 0);
    return 0;
  }
  if (op == "esprit") {
    Table t;
    t.header = {"snr_eff_db", "rmse_esprit_rad", "crb_rmse_rad"};
    for (double g : parse_grid(grid_spec)) {
      const double snr = std::pow(10.0, g / 10.0);
      double sum_sq = 0.0;
      for (std::size_t i = 0; i < trials; ++i) {
        RngStream rng(seed, substream_id(0xE597, static_cast<std::uint64_t>(g * 1000), i));
        const double theta = rng.uniform(-20.0 * M_PI / 180.0, 20.0 * M_PI / 180.0);
        const CVec a = steering_vector(theta, k);
        CMat z(k, n_win);
        for (int c = 0; c < n_win; ++c) {
          const cplx amp = rng.cnormal({0, 0}, snr);
          for (std::size_t r = 0; r < k; ++r) z(r, c) = a[r] * amp + rng.cnormal({0, 0}, 1.0);
        }
        const EspritResult e = esprit_aoa(correlate(z));
        sum_sq += (e.theta - theta) * (e.theta - theta);
      }
      CrbParams p;
      p.k_antennas = k;
      p.n_win = n_win;
      p.sigma_ns2 = 1.0;
      p.beam_gain = snr;
      p.sigma_s2 = 1.0;
      p.theta = 0.0;
      t.rows.push_back({g, std::sqrt(sum_sq / static_cast<double>(trials)), std::sqrt(crb_full(p))});
    }
    write_table(std::move(t), out_path, seed, 0);
    return 0;
  }
  if (op == "mld") {
    Table t;
    t.header = {"snr_c_db", "ber_qam_mld", "ber_psk_mld"};
    const Constellation qam = make_qam(16);
    const Constellation psk = make_psk(16);
    for (double g : parse_grid(grid_spec)) {
      const double sigma2 = std::pow(10.0, -g / 10.0);
      std::size_t err_qam = 0, err_psk = 0, bits = 0;
      for (std::size_t i = 0; i < trials; ++i) {
        RngStream rng(seed, substream_id(0x34D, static_cast<std::uint64_t>(g * 1000), i));
        const cplx gamma = rng.cnormal({0, 0}, 1.0);  // Rayleigh tap
        const cplx noise = rng.cnormal({0, 0}, sigma2);
        const std::size_t mq = rng.uniform_int(16);
        const cplx zq = gamma * qam.points[mq] + noise;
        const auto hq = harden(demap_mld(qam, zq, gamma, sigma2));
        for (std::size_t b = 0; b < 4; ++b) err_qam += hq[b] != qam.bit_labels[mq][b];
        const std::size_t mp = rng.uniform_int(16);
        const cplx zp = gamma * psk.points[mp] + noise;
        const auto hp = harden(demap_mld(psk, zp, gamma, sigma2));
        for (std::size_t b = 0; b < 4; ++b) err_psk += hp[b] != psk.bit_labels[mp][b];
        bits += 4;
      }
      t.rows.push_back({g, static_cast<double>(err_qam) / bits, static_cast<double>(err_psk) / bits});
    }
    write_table(std::move(t), out_path, seed, 0);
    return 0;
  }
  throw CLI::ValidationError("op", "unknown baseline '" + op + "' (valid: crb, np, esprit, mld)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint communication and sensing simulator"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run the three training phases from a config file");
  std::string config_path, out_override;
  long long seed_override = -1;
  train->add_option("--config", config_path, "experiment config file")->required();
  train->add_option("--out", out_override, "output directory override");
  train->add_option("--seed", seed_override, "seed override");

  // eval
  auto* eval = app.add_subcommand("eval", "sweep metrics from a checkpoint");
  std::vector<std::string> checkpoints;
  std::string axis = "snr_s", grid = "-10:10:11", out_path = "sweep.csv";
  std::size_t trials = 2000;
  double fixed_snr_s = -5.0;
  int fixed_n_win = 1;
  std::uint64_t eval_seed = 99;
  eval->add_option("--checkpoint", checkpoints, "checkpoint file(s)")->required();
  eval->add_option("--axis", axis, "snr_c | snr_s | n_win | w_s");
  eval->add_option("--grid", grid, "lo:hi:count or comma list");
  eval->add_option("--trials", trials, "Monte-Carlo trials per grid point");
  eval->add_option("--snr-s", fixed_snr_s, "fixed sensing SNR (n_win axis)");
  eval->add_option("--n-win", fixed_n_win, "fixed window length (snr axes)");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--out", out_path, "output CSV path");

  // figure
  auto* figure = app.add_subcommand("figure", "emit a figure's underlying table");
  std::string fig_name;
  std::vector<std::string> fig_ckpts;
  std::string fig_out = "figure.csv";
  std::size_t fig_trials = 5000;
  std::uint64_t fig_seed = 99;
  figure->add_option("--name", fig_name, "beam | tradeoff | kurtosis | constellation")->required();
  figure->add_option("--checkpoint", fig_ckpts, "checkpoint file(s)");
  figure->add_option("--trials", fig_trials, "trials for tradeoff metrics");
  figure->add_option("--seed", fig_seed, "evaluation seed");
  figure->add_option("--out", fig_out, "output CSV path");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "classical reference curves without a checkpoint");
  std::string bl_op, bl_grid = "-5:5:11", bl_out = "baseline.csv";
  std::size_t bl_trials = 10000, bl_k = 16;
  int bl_n_win = 1;
  std::uint64_t bl_seed = 7;
  baseline->add_option("--op", bl_op, "crb | np | esprit | mld")->required();
  baseline->add_option("--grid", bl_grid, "lo:hi:count or comma list");
  baseline->add_option("--trials", bl_trials, "Monte-Carlo trials");
  baseline->add_option("--antennas", bl_k, "array size");
  baseline->add_option("--n-win", bl_n_win, "window length");
  baseline->add_option("--seed", bl_seed, "seed");
  baseline->add_option("--out", bl_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, out_override, seed_override);
    if (eval->parsed())
      return cmd_eval(checkpoints, axis, grid, trials, fixed_snr_s, fixed_n_win, eval_seed, out_path);
    if (figure->parsed()) return cmd_figure(fig_name, fig_ckpts, fig_trials, fig_seed, fig_out);
    if (baseline->parsed())
      return cmd_baseline(bl_op, bl_grid, bl_trials, bl_k, bl_n_win, bl_seed, bl_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
