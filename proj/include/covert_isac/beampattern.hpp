#pragma once

#include <string>
#include <vector>

#include "covert_isac/linalg.hpp"
#include "covert_isac/scenario.hpp"

namespace cisac {

struct SteeringGrid {
  std::vector<double> thetas;  // radians
  std::vector<double> thetas_deg;
  std::vector<CVec> steering;
  std::vector<double> desired;
};

struct CovariancePair {
  CMat W1;
  CMat T;
  double eta = 0.0;
};

// Angle given in radians.
CVec steering_vector(double theta, int N, double spacing_ratio);

// Cell-midpoint grid over [-90, 90] degrees.
SteeringGrid make_grid(int S, int N, double spacing_ratio, const std::vector<double>& targets_deg,
                       double delta_theta_deg);
SteeringGrid make_grid(const SystemConfig& cfg);

// a^H R a at each grid angle.
std::vector<double> beampattern_gain(const CMat& R, const SteeringGrid& grid);
std::vector<double> beampattern_gain(const CovariancePair& p, const SteeringGrid& grid);

double mse(const CovariancePair& p, const SteeringGrid& grid);
double cross_correlation(const CovariancePair& p, const std::vector<double>& targets_deg, int N,
                         double spacing_ratio);
double objective(const CovariancePair& p, const SteeringGrid& grid,
                 const std::vector<double>& targets_deg, double w_c, double spacing_ratio);
double objective(const CovariancePair& p, const SteeringGrid& grid, const SystemConfig& cfg);

// Least-squares eta for fixed matrices. Throws std::domain_error for an all-zero desired pattern.
double optimal_eta(const CovariancePair& p, const SteeringGrid& grid);

// CSV with columns theta_deg,desired,gain_total,gain_info,gain_dfan.
std::string beampattern_csv(const CovariancePair& p, const SteeringGrid& grid);

}  // namespace cisac
