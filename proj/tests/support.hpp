#ifndef IPSLAB_TEST_SUPPORT_HPP
#define IPSLAB_TEST_SUPPORT_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ipslab/dynamics.hpp"
#include "ipslab/measure.hpp"

namespace testing {

using namespace ipslab;

// softened, translation-averaged random measure
inline DenseMeasure random_ti(const Torus& t, int q, std::uint64_t seed, double eps = 0.2) {
  return soften(translation_average(random_measure(t, q, seed)), eps);
}

inline DenseMeasure random_soft(const Torus& t, int q, std::uint64_t seed, double eps = 0.2) {
  return soften(random_measure(t, q, seed), eps);
}

inline Eigen::MatrixXd dense(const GeneratorMatrix& g) { return Eigen::MatrixXd(g.q); }

inline Eigen::VectorXd vec(const DenseMeasure& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.weights().data(), m.size());
}

// d/dt h_Lambda at t = 0 from the matrix: sum over window states of (nu Q)_Lambda log(nu_Lambda / mu_Lambda)
inline double matrix_entropy_derivative(const DenseMeasure& nu, const DenseMeasure& mu,
                                        const GeneratorMatrix& g, const Window& lambda) {
  Eigen::VectorXd flow = dense(g).transpose() * vec(nu);
  auto pos = nu.positions_of(lambda);
  StateSpace sub(pos.size(), nu.q());
  std::vector<double> f(sub.size(), 0.0), a(sub.size(), 0.0), b(sub.size(), 0.0);
  for (std::uint64_t s = 0; s < nu.size(); ++s) {
    auto k = nu.space().project(s, pos);
    f[k] += flow(static_cast<Eigen::Index>(s));
    a[k] += nu[s];
    b[k] += mu[s];
  }
  double d = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) d += f[k] * std::log(a[k] / b[k]);
  return d;
}

}  // namespace testing

#endif
