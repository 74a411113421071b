#include "covert_isac/beampattern.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "covert_isac/csv.hpp"

namespace cisac {

CVec steering_vector(double theta, int N, double spacing_ratio) {
  CVec a(N);
  double phase = 2.0 * kPi * spacing_ratio * std::sin(theta);
  for (int n = 0; n < N; ++n) a(n) = std::polar(1.0, phase * n);
  return a;
}

SteeringGrid make_grid(int S, int N, double spacing_ratio, const std::vector<double>& targets_deg,
                       double delta_theta_deg) {
  SteeringGrid g;
  g.thetas.reserve(S);
  g.thetas_deg.reserve(S);
  g.steering.reserve(S);
  g.desired.reserve(S);
  double step = 180.0 / S;
  for (int s = 1; s <= S; ++s) {
    double deg = -90.0 + (s - 0.5) * step;
    bool inside = false;
    for (double t : targets_deg) inside = inside || std::abs(deg - t) <= delta_theta_deg / 2.0;
    g.thetas.push_back(deg2rad(deg));
    g.thetas_deg.push_back(deg);
    g.steering.push_back(steering_vector(deg2rad(deg), N, spacing_ratio));
    g.desired.push_back(inside ? 1.0 : 0.0);
  }
  return g;
}

SteeringGrid make_grid(const SystemConfig& cfg) {
  return make_grid(cfg.S, cfg.N, cfg.spacing_ratio, cfg.target_angles_deg, cfg.delta_theta_deg);
}

std::vector<double> beampattern_gain(const CMat& R, const SteeringGrid& grid) {
  std::vector<double> out;
  out.reserve(grid.steering.size());
  for (const CVec& a : grid.steering) {
    if (a.size() != R.rows() || R.rows() != R.cols())
      throw std::invalid_argument("beampattern_gain: dimension mismatch");
    cd v = (a.adjoint() * R * a)(0, 0);
    double tol = 1e-10 * std::max(1.0, std::abs(v));
    if (std::abs(v.imag()) > tol) throw std::runtime_error("beampattern_gain: non-Hermitian input");
    out.push_back(v.real());
  }
  return out;
}

std::vector<double> beampattern_gain(const CovariancePair& p, const SteeringGrid& grid) {
  return beampattern_gain(CMat(p.W1 + p.T), grid);
}

double mse(const CovariancePair& p, const SteeringGrid& grid) {
  auto g = beampattern_gain(p, grid);
  double acc = 0.0;
  for (size_t s = 0; s < g.size(); ++s) {
    double r = p.eta * grid.desired[s] - g[s];
    acc += r * r;
  }
  return acc / static_cast<double>(g.size());
}

double cross_correlation(const CovariancePair& p, const std::vector<double>& targets_deg, int N,
                         double spacing_ratio) {
  int M = static_cast<int>(targets_deg.size());
  if (M < 2) return 0.0;
  CMat R = p.W1 + p.T;
  std::vector<CVec> a;
  for (double t : targets_deg) a.push_back(steering_vector(deg2rad(t), N, spacing_ratio));
  double acc = 0.0;
  for (int i = 0; i < M; ++i)
    for (int j = i + 1; j < M; ++j) acc += std::norm((a[i].adjoint() * R * a[j])(0, 0));
  return 2.0 * acc / (M * M - M);
}

double objective(const CovariancePair& p, const SteeringGrid& grid,
                 const std::vector<double>& targets_deg, double w_c, double spacing_ratio) {
  int N = static_cast<int>(p.W1.rows());
  return mse(p, grid) + w_c * cross_correlation(p, targets_deg, N, spacing_ratio);
}

double objective(const CovariancePair& p, const SteeringGrid& grid, const SystemConfig& cfg) {
  return objective(p, grid, cfg.target_angles_deg, cfg.w_c, cfg.spacing_ratio);
}

double optimal_eta(const CovariancePair& p, const SteeringGrid& grid) {
  auto g = beampattern_gain(p, grid);
  double num = 0.0, den = 0.0;
  for (size_t s = 0; s < g.size(); ++s) {
    num += grid.desired[s] * g[s];
    den += grid.desired[s] * grid.desired[s];
  }
  if (den <= 0.0) throw std::domain_error("optimal_eta: desired pattern is identically zero");
  return num / den;
}

std::string beampattern_csv(const CovariancePair& p, const SteeringGrid& grid) {
  auto gi = beampattern_gain(p.W1, grid);
  auto gd = beampattern_gain(p.T, grid);
  std::ostringstream os;
  os << "theta_deg,desired,gain_total,gain_info,gain_dfan\n";
  for (size_t s = 0; s < gi.size(); ++s) {
    os << csv_num(grid.thetas_deg[s]) << ',' << csv_num(grid.desired[s]) << ','
       << csv_num(gi[s] + gd[s]) << ',' << csv_num(gi[s]) << ',' << csv_num(gd[s]) << '\n';
  }
  return os.str();
}

}  // namespace cisac
