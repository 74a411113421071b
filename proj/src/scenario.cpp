#include "covert_isac/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "covert_isac/rng.hpp"

namespace cisac {

using nlohmann::json;

std::string to_string(WcsiMode m) {
  switch (m) {
    case WcsiMode::Bounded: return "bounded";
    case WcsiMode::Gaussian: return "gaussian";
    case WcsiMode::Statistical: return "statistical";
    case WcsiMode::Instantaneous: return "instantaneous";
  }
  return "?";
}

WcsiMode parse_mode(const std::string& s) {
  if (s == "bounded") return WcsiMode::Bounded;
  if (s == "gaussian") return WcsiMode::Gaussian;
  if (s == "statistical") return WcsiMode::Statistical;
  if (s == "instantaneous") return WcsiMode::Instantaneous;
  throw ConfigError("unknown mode '" + s + "'");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double path_loss(double zeta0_db, double d0, double d, double alpha) {
  if (!(d > 0.0) || !(d0 > 0.0)) throw std::invalid_argument("path_loss: distances must be positive");
  return db_to_linear(zeta0_db) * std::pow(d0 / d, alpha);
}

PathLossResult path_losses(const PathLossConfig& pl) {
  return {path_loss(pl.zeta0_db, pl.d0, pl.d_b, pl.alpha_b),
          path_loss(pl.zeta0_db, pl.d0, pl.d_w, pl.alpha_w)};
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

std::vector<std::string> validate_config(const SystemConfig& c) {
  std::vector<std::string> err;
  auto need = [&err](bool ok, const std::string& msg) {
    if (!ok) err.push_back(msg);
  };
  need(c.N >= 1, "N: must be >= 1");
  need(c.spacing_ratio > 0.0, "spacing_ratio: must be > 0");
  need(c.P_A_min > 0.0 && c.P_A_min <= c.P_A && c.P_A <= c.P_A_max && c.P_A_max < c.P_t,
       "power ordering: require 0 < P_A_min <= P_A <= P_A_max < P_t");
  need(c.P_A_min < c.P_A_max, "power ordering: require P_A_min < P_A_max");
  need(c.sigma_b2 > 0.0, "sigma_b2: must be > 0");
  need(c.sigma_w2 > 0.0, "sigma_w2: must be > 0");
  need(c.epsilon > 0.0 && c.epsilon < 1.0, "epsilon: must lie in (0,1)");
  need(c.rho_c > 0.0 && c.rho_c < 1.0, "rho_c: must lie in (0,1)");
  need(c.R_min >= 0.0, "R_min: must be >= 0");
  need(c.w_c >= 0.0, "w_c: must be >= 0");
  need(c.M() <= c.N, "target_angles: M must not exceed N");
  for (double a : c.target_angles_deg)
    need(a >= -90.0 && a <= 90.0, "target_angles: " + std::to_string(a) + " outside [-90,90]");
  need(c.S >= 2, "S: must be >= 2");
  need(c.delta_theta_deg > 0.0, "delta_theta: must be > 0");
  need(c.path_loss.d0 > 0.0 && c.path_loss.d_b > 0.0 && c.path_loss.d_w > 0.0,
       "path_loss: distances must be > 0");
  need(c.eps_w_rel >= 0.0, "eps_w_rel: must be >= 0");
  need(c.gamma_w_rel >= 0.0, "gamma_w_rel: must be >= 0");
  if (c.Omega_w) {
    const CMat& O = *c.Omega_w;
    if (O.rows() != c.N || O.cols() != c.N) {
      err.push_back("Omega_w: must be N x N");
    } else {
      need(hermitian_defect(O) <= 1e-10, "Omega_w: not Hermitian");
      need(min_eigenvalue(O) >= -1e-10, "Omega_w: not PSD");
    }
  }
  if (c.P_b) need(*c.P_b >= 0.0, "P_b: must be >= 0");
  need(c.L_max > 0.0, "L_max: must be > 0");
  if (c.P_b_max) need(*c.P_b_max > 0.0, "P_b_max: must be > 0");
  need(c.algo.shrink > 0.0 && c.algo.shrink < 1.0, "algorithm.shrink: must lie in (0,1)");
  need(c.algo.L_th > 0.0, "algorithm.L_th: must be > 0");
  need(c.algo.rho_th_rel > 0.0, "algorithm.rho_th_rel: must be > 0");
  need(c.algo.max_solves >= 2, "algorithm.max_solves: must be >= 2");
  return err;
}

void require_valid(const SystemConfig& cfg) {
  auto err = validate_config(cfg);
  if (err.empty()) return;
  std::string msg = "invalid config:";
  for (auto& e : err) msg += "\n  " + e;
  throw ConfigError(msg);
}

namespace {

CMat matrix_from_json(const json& j, int N) {
  CMat m = CMat::Zero(N, N);
  const json& re = j.at("re");
  const json* im = j.contains("im") ? &j.at("im") : nullptr;
  if (re.size() != static_cast<size_t>(N)) throw ConfigError("Omega_w: expected N rows");
  for (int r = 0; r < N; ++r) {
    if (re[r].size() != static_cast<size_t>(N)) throw ConfigError("Omega_w: expected N columns");
    for (int c = 0; c < N; ++c)
      m(r, c) = cd(re[r][c].get<double>(), im ? (*im)[r][c].get<double>() : 0.0);
  }
  return m;
}

json matrix_to_json(const CMat& m) {
  json re = json::array(), im = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json a = json::array(), b = json::array();
    for (int c = 0; c < m.cols(); ++c) {
      a.push_back(m(r, c).real());
      b.push_back(m(r, c).imag());
    }
    re.push_back(a);
    im.push_back(b);
  }
  return {{"re", re}, {"im", im}};
}

template <class T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

SystemConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config parse error: top level must be an object");
  if (!j.contains("schema") || j.at("schema") != 1) throw ConfigError("schema: expected schema = 1");

  static const char* known[] = {"schema", "N", "spacing_ratio", "P_t", "P_A_min", "P_A_max", "P_A",
                                "sigma_b2_dbm", "sigma_w2_dbm", "epsilon", "rho_c", "R_min", "w_c",
                                "target_angles_deg", "delta_theta_deg", "S", "seed", "path_loss",
                                "eps_w_rel", "gamma_w_rel", "Omega_w", "P_b", "L_max", "P_b_max",
                                "algorithm"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + it.key() + "'");
  }

  SystemConfig c;
  try {
    get_opt(j, "N", c.N);
    get_opt(j, "spacing_ratio", c.spacing_ratio);
    get_opt(j, "P_t", c.P_t);
    get_opt(j, "P_A_min", c.P_A_min);
    get_opt(j, "P_A_max", c.P_A_max);
    get_opt(j, "P_A", c.P_A);
    if (j.contains("sigma_b2_dbm")) c.sigma_b2 = dbm_to_watts(j.at("sigma_b2_dbm").get<double>());
    if (j.contains("sigma_w2_dbm")) c.sigma_w2 = dbm_to_watts(j.at("sigma_w2_dbm").get<double>());
    get_opt(j, "epsilon", c.epsilon);
    get_opt(j, "rho_c", c.rho_c);
    get_opt(j, "R_min", c.R_min);
    get_opt(j, "w_c", c.w_c);
    get_opt(j, "target_angles_deg", c.target_angles_deg);
    get_opt(j, "delta_theta_deg", c.delta_theta_deg);
    get_opt(j, "S", c.S);
    get_opt(j, "seed", c.seed);
    if (j.contains("path_loss")) {
      const json& p = j.at("path_loss");
      get_opt(p, "zeta0_db", c.path_loss.zeta0_db);
      get_opt(p, "alpha_b", c.path_loss.alpha_b);
      get_opt(p, "alpha_w", c.path_loss.alpha_w);
      get_opt(p, "d0", c.path_loss.d0);
      get_opt(p, "d_b", c.path_loss.d_b);
      get_opt(p, "d_w", c.path_loss.d_w);
    }
    get_opt(j, "eps_w_rel", c.eps_w_rel);
    get_opt(j, "gamma_w_rel", c.gamma_w_rel);
    if (j.contains("Omega_w") && !j.at("Omega_w").is_null()) c.Omega_w = matrix_from_json(j.at("Omega_w"), c.N);
    if (j.contains("P_b") && !j.at("P_b").is_null()) c.P_b = j.at("P_b").get<double>();
    get_opt(j, "L_max", c.L_max);
    if (j.contains("P_b_max") && !j.at("P_b_max").is_null()) c.P_b_max = j.at("P_b_max").get<double>();
    if (j.contains("algorithm")) {
      const json& a = j.at("algorithm");
      get_opt(a, "shrink", c.algo.shrink);
      get_opt(a, "L_th", c.algo.L_th);
      get_opt(a, "rho_th_rel", c.algo.rho_th_rel);
      get_opt(a, "max_solves", c.algo.max_solves);
      get_opt(a, "max_inner", c.algo.max_inner);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  require_valid(c);
  return c;
}

SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const SystemConfig& c, int indent) {
  json j;
  j["schema"] = 1;
  j["N"] = c.N;
  j["spacing_ratio"] = c.spacing_ratio;
  j["P_t"] = c.P_t;
  j["P_A_min"] = c.P_A_min;
  j["P_A_max"] = c.P_A_max;
  j["P_A"] = c.P_A;
  j["sigma_b2_dbm"] = watts_to_dbm(c.sigma_b2);
  j["sigma_w2_dbm"] = watts_to_dbm(c.sigma_w2);
  j["epsilon"] = c.epsilon;
  j["rho_c"] = c.rho_c;
  j["R_min"] = c.R_min;
  j["w_c"] = c.w_c;
  j["target_angles_deg"] = c.target_angles_deg;
  j["delta_theta_deg"] = c.delta_theta_deg;
  j["S"] = c.S;
  j["seed"] = c.seed;
  j["path_loss"] = {{"zeta0_db", c.path_loss.zeta0_db}, {"alpha_b", c.path_loss.alpha_b},
                    {"alpha_w", c.path_loss.alpha_w},   {"d0", c.path_loss.d0},
                    {"d_b", c.path_loss.d_b},           {"d_w", c.path_loss.d_w}};
  j["eps_w_rel"] = c.eps_w_rel;
  j["gamma_w_rel"] = c.gamma_w_rel;
  j["Omega_w"] = c.Omega_w ? matrix_to_json(*c.Omega_w) : json(nullptr);
  j["P_b"] = c.P_b ? json(*c.P_b) : json(nullptr);
  j["L_max"] = c.L_max;
  j["P_b_max"] = c.P_b_max ? json(*c.P_b_max) : json(nullptr);
  j["algorithm"] = {{"shrink", c.algo.shrink},
                    {"L_th", c.algo.L_th},
                    {"rho_th_rel", c.algo.rho_th_rel},
                    {"max_solves", c.algo.max_solves},
                    {"max_inner", c.algo.max_inner}};
  return j.dump(indent);
}

ChannelSet generate_channels(const SystemConfig& cfg) { return generate_channels(cfg, cfg.seed); }

ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t seed) {
  auto pl = path_losses(cfg.path_loss);
  Rng rng = substream(seed, "channels");
  ChannelSet ch;
  ch.l_b = pl.l_b;
  ch.l_w = pl.l_w;
  ch.h_b = complex_gaussian(rng, cfg.N, pl.l_b);
  ch.h_w_hat = complex_gaussian(rng, cfg.N, pl.l_w);
  double nw = ch.h_w_hat.norm();
  ch.eps_w = cfg.eps_w_rel * nw;
  ch.gamma_w = CMat::Identity(cfg.N, cfg.N) * (cfg.gamma_w_rel * nw * nw / cfg.N);
  ch.Omega_w = cfg.Omega_w ? *cfg.Omega_w : CMat::Identity(cfg.N, cfg.N);
  ch.P_b = cfg.P_b ? *cfg.P_b : cfg.epsilon * (cfg.P_A_max - cfg.P_A_min);
  return ch;
}

}  // namespace cisac
