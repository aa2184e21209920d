#include "jcas/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "jcas/csv.hpp"

namespace jcas {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_rad(double deg) { return deg * M_PI / 180.0; }

}  // namespace

std::string ConfigFile::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw std::invalid_argument("config: missing field: " + key);
  return it->second;
}

std::string ConfigFile::get_or(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double ConfigFile::get_num(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (trim(v.substr(used)).size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("config: field " + key + " is not a number: '" + v + "'");
  }
}

double ConfigFile::get_num_or(const std::string& key, double fallback) const {
  return has(key) ? get_num(key) : fallback;
}

std::vector<double> ConfigFile::get_pair(const std::string& key) const {
  std::istringstream is(get(key));
  std::vector<double> out;
  double x;
  while (is >> x) out.push_back(x);
  if (out.size() != 2)
    throw std::invalid_argument("config: field " + key + " must hold exactly two numbers");
  return out;
}

ConfigFile parse_config_text(const std::string& text) {
  ConfigFile cfg;
  cfg.raw = text;
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: bad section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: empty key at line " + std::to_string(lineno));
    cfg.values[(section.empty() ? key : section + "." + key)] = value;
  }
  return cfg;
}

ConfigFile parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

ExperimentConfig experiment_config_from_text(const std::string& text) {
  const ConfigFile c = parse_config_text(text);
  ExperimentConfig e;
  e.config_hash = fnv1a(c.raw);

  // required fields first so errors carry the full path
  e.scenario.k_antennas = static_cast<std::size_t>(c.get_num("scenario.k"));
  e.scenario.mod_order = static_cast<std::size_t>(c.get_num("scenario.m"));
  e.mode = mod_mode_from_string(c.get("modulation.mode"));
  e.seed = static_cast<std::uint64_t>(c.get_num("output.seed"));
  e.plan.w_s = c.get_num("plan.w_s");

  const auto comm = c.has("scenario.comm_area_deg") ? c.get_pair("scenario.comm_area_deg")
                                                    : std::vector<double>{30.0, 50.0};
  const auto sens = c.has("scenario.sens_area_deg") ? c.get_pair("scenario.sens_area_deg")
                                                    : std::vector<double>{-20.0, 20.0};
  e.scenario.comm_area = {to_rad(comm[0]), to_rad(comm[1])};
  e.scenario.sens_area = {to_rad(sens[0]), to_rad(sens[1])};
  e.scenario.sigma_c2 = c.get_num_or("scenario.sigma_c2", 1.0);
  e.scenario.sigma_s2 = c.get_num_or("scenario.sigma_s2", 1.0);
  e.scenario.sigma_nc2 = c.get_num_or("scenario.sigma_nc2", 0.1);
  e.scenario.sigma_ns2 = c.get_num_or("scenario.sigma_ns2", 1.0);
  e.scenario.target_prior = c.get_num_or("scenario.target_prior", 0.5);
  e.scenario.p_false_alarm = c.get_num_or("scenario.p_false_alarm", 0.01);

  e.plan.pretrain_symbols = static_cast<std::size_t>(c.get_num_or("plan.pretrain_symbols", 1e6));
  e.plan.finetune_symbols = static_cast<std::size_t>(c.get_num_or("plan.finetune_symbols", 2e6));
  e.plan.limit_windows = static_cast<std::size_t>(c.get_num_or("plan.limit_windows", 1e4));
  e.plan.batch_symbols = static_cast<std::size_t>(c.get_num_or("plan.batch_symbols", 1e4));
  e.plan.learning_rate = c.get_num_or("plan.learning_rate", 1e-4);
  e.plan.n_win_min = static_cast<int>(c.get_num_or("plan.n_win_min", 1));
  e.plan.n_win_max = static_cast<int>(c.get_num_or("plan.n_win_max", 15));
  e.scenario.n_win_max = static_cast<std::size_t>(e.plan.n_win_max);
  if (c.has("plan.snr_s_db")) {
    const auto r = c.get_pair("plan.snr_s_db");
    e.plan.snr_s_db_lo = r[0];
    e.plan.snr_s_db_hi = r[1];
  }
  if (c.has("plan.snr_c_db")) {
    const auto r = c.get_pair("plan.snr_c_db");
    e.plan.snr_c_db_lo = r[0];
    e.plan.snr_c_db_hi = r[1];
  }
  e.plan.alpha_fair = c.get_num_or("plan.alpha_fair", 1.0);
  const std::string al = c.get_or("plan.angle_loss", "modified");
  if (al != "modified" && al != "unmodified")
    throw std::invalid_argument("config: plan.angle_loss must be 'modified' or 'unmodified'");
  e.plan.angle_loss_modified = al == "modified";
  e.plan.seed = e.seed;

  e.apsk_r2 = c.get_num_or("modulation.apsk_r2", 1.0);

  if (c.has("output.dir")) {
    e.out_dir = c.get("output.dir");
  } else if (const char* env = std::getenv("JCAS_OUT_DIR")) {
    e.out_dir = env;
  } else {
    e.out_dir = ".";
  }

  if (c.has("mimo.ue_angles_deg")) {
    MimoScenario ms;
    ms.base = e.scenario;
    std::istringstream is(c.get("mimo.ue_angles_deg"));
    double a;
    while (is >> a) ms.ue_angles.push_back(to_rad(a));
    ms.mod_order = static_cast<std::size_t>(c.get_num_or("mimo.m", 4));
    ms.base.mod_order = ms.mod_order;
    ms.validate();
    e.mimo = ms;
  }

  e.scenario.validate();
  return e;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return experiment_config_from_text(buf.str());
}

}  // namespace jcas
