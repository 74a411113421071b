#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covert_isac/linalg.hpp"

namespace cisac {

struct PathLossConfig {
  double zeta0_db = -30.0;
  double alpha_b = 2.5;
  double alpha_w = 2.5;
  double d0 = 1.0;
  double d_b = 50.0;
  double d_w = 50.0;
};

// Constants of the penalty loop. rho_th is relative to P_t - P_A_max.
struct AlgorithmConfig {
  double shrink = 0.3;
  double L_th = 1e-4;
  double rho_th_rel = 1e-6;
  int max_solves = 60;
  int max_inner = 5;
};

struct SystemConfig {
  int N = 10;
  double spacing_ratio = 0.5;
  double P_t = 20.0;
  double P_A_min = 1.0;
  double P_A_max = 10.0;
  double P_A = 5.0;
  double sigma_b2 = 1e-11;
  double sigma_w2 = 1e-11;
  double epsilon = 0.1;
  double rho_c = 0.05;
  double R_min = 8.0;
  double w_c = 1.0;
  std::vector<double> target_angles_deg{-45.0, -20.0, 20.0, 45.0};
  double delta_theta_deg = 10.0;
  int S = 180;
  std::uint64_t seed = 1;
  PathLossConfig path_loss;

  // WCSI error sizes relative to the estimate: eps_w = eps_w_rel*|h_w_hat|,
  // gamma_w = gamma_w_rel*|h_w_hat|^2*I/N.
  double eps_w_rel = 0.1;
  double gamma_w_rel = 0.01;
  std::optional<CMat> Omega_w;  // identity when absent
  std::optional<double> P_b;    // instantaneous mode; eps*(P_A_max-P_A_min) when absent

  // Limits used by the rate-maximizing programs behind the sweeps.
  double L_max = 40.0;
  std::optional<double> P_b_max;  // P_t - P_A_max when absent

  AlgorithmConfig algo;

  int M() const { return static_cast<int>(target_angles_deg.size()); }
  double w1_budget() const { return P_t - P_A_max; }
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class WcsiMode { Bounded, Gaussian, Statistical, Instantaneous };

std::string to_string(WcsiMode m);
WcsiMode parse_mode(const std::string& s);

struct ChannelSet {
  CVec h_b;
  CVec h_w_hat;
  double l_b = 0.0;
  double l_w = 0.0;
  double eps_w = 0.0;
  CMat gamma_w;
  CMat Omega_w;
  double P_b = 0.0;
};

struct PathLossResult {
  double l_b;
  double l_w;
};

double path_loss(double zeta0_db, double d0, double d, double alpha);
PathLossResult path_losses(const PathLossConfig& pl);
double dbm_to_watts(double dbm);
double watts_to_dbm(double w);
double db_to_linear(double db);

std::vector<std::string> validate_config(const SystemConfig& cfg);
// Throws ConfigError listing every violation.
void require_valid(const SystemConfig& cfg);

SystemConfig parse_config(const std::string& json_text);
SystemConfig load_config(const std::string& path);
std::string config_to_json(const SystemConfig& cfg, int indent = 2);

// Channels for cfg.seed.
ChannelSet generate_channels(const SystemConfig& cfg);
ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t seed);

}  // namespace cisac
