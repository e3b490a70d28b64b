#ifndef IPSLAB_EVOLVE_HPP
#define IPSLAB_EVOLVE_HPP

#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipslab/dynamics.hpp"
#include "ipslab/measure.hpp"

namespace ipslab {

// nu exp(tQ) by uniformisation; the dropped Poisson tail is at most tol in total variation
DenseMeasure evolve(const DenseMeasure& nu0, const GeneratorMatrix& g, double t, double tol = 1e-13);
// nu exp(-tQ) by its power series, for small t only; fails if a weight turns negative
DenseMeasure evolve_backward(const DenseMeasure& nu0, const GeneratorMatrix& g, double t);

class StationaryError : public std::runtime_error {
 public:
  StationaryError(const std::string& what, std::vector<double> singular_values)
      : std::runtime_error(what), singular_values(std::move(singular_values)) {}
  std::vector<double> singular_values;
};

// one extremal stationary measure per closed communicating class
std::vector<DenseMeasure> stationary(const GeneratorMatrix& g);
// the unique stationary measure; throws StationaryError if there are several
DenseMeasure stationary_measure(const GeneratorMatrix& g);
// smallest |Re lambda| over the non-zero eigenvalues (dense, small spaces only)
double spectral_gap(const GeneratorMatrix& g);

struct OracleValue {
  double value = 0.0;
  double error = 0.0;
};
// d/dt h_Lambda(nu_t | mu) at 0 from central differences with Richardson extrapolation
OracleValue entropy_derivative_oracle(const DenseMeasure& nu, const DenseMeasure& mu,
                                      const GeneratorMatrix& g, const Window& lambda,
                                      double dt = 1e-3);

struct TrajectoryRow {
  double t = 0.0;
  double h = 0.0;               // relative entropy on the whole torus
  std::vector<double> h_window;  // per extra window
  double g = 0.0;               // entropy loss per site
  bool violation = false;       // h went up by more than the tolerance
};

struct Trajectory {
  std::vector<Window> windows;
  std::vector<TrajectoryRow> rows;
  bool monotone = true;
  DenseMeasure final_measure;
};

Trajectory run_trajectory(const DenseMeasure& nu0, const RateFamily& rates, const DenseMeasure& mu,
                          const std::vector<double>& grid, const std::vector<Window>& windows,
                          double tol = 1e-10);
std::vector<double> linear_grid(double t_end, int points);

using Sampler = std::function<std::vector<int>(std::mt19937_64&)>;
Sampler product_sampler(std::vector<double> single_site, std::size_t sites);
Sampler measure_sampler(const DenseMeasure& m);

struct EmpiricalMeasure {
  DenseMeasure measure;
  std::vector<double> std_error;
  std::size_t paths = 0;
};

// Gillespie paths on the torus; the window marginal at t_end. Path k draws from its
// own seeded stream, so the result does not depend on the thread count.
EmpiricalMeasure gillespie_sample(const RateFamily& rates, const Torus& torus, const Sampler& initial,
                                  double t_end, std::size_t n_paths, const Window& window,
                                  std::uint64_t seed, int threads = 1);

}  // namespace ipslab

#endif
