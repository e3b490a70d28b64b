#ifndef IPSLAB_ENTROPY_HPP
#define IPSLAB_ENTROPY_HPP

#include <string>
#include <vector>

#include "ipslab/dynamics.hpp"
#include "ipslab/gibbs.hpp"
#include "ipslab/measure.hpp"

namespace ipslab {

// Values are extended reals: -inf and +inf are legitimate results.

struct EntropyTerm {
  std::size_t site = 0;  // torus index of the anchor or of i
  std::size_t rule = 0;
  std::uint64_t target = 0;
  double value = 0.0;
};

struct EntropyReport {
  std::string quantity;
  double value = 0.0;
  double volume = 1.0;  // divide value by this for a per-site number
  std::vector<EntropyTerm> breakdown;
  double per_site() const { return value / volume; }
};

// sum p log(p/q); +inf when p is not absolutely continuous w.r.t. q
double relative_entropy(const std::vector<double>& p, const std::vector<double>& q);
double local_relative_entropy(const DenseMeasure& nu, const DenseMeasure& mu, const Window& lambda);

// d/dt of the relative entropy on lambda at t = 0:
// sum over sigma_Lambda of nu(L 1_sigma) log(nu(sigma)/mu(sigma)), broken down per
// (anchor, rule, target).
EntropyReport entropy_loss_finite(const DenseMeasure& nu, const DenseMeasure& mu,
                                  const RateFamily& rates, const Window& lambda);

struct LossParts {
  double total = 0.0;    // sum nu(L 1_sigma) log(nu/mu)
  double entropy = 0.0;  // sum nu(L 1_sigma) log nu
  double energy = 0.0;   // -sum nu(L 1_sigma) log mu
};
LossParts entropy_loss_parts(const DenseMeasure& nu, const DenseMeasure& mu,
                             const RateFamily& rates, const Window& lambda);

// per-site entropy loss of a non-null measure, averaged over the translates
// of each shape that contain the origin
double specific_entropy_loss(const DenseMeasure& nu, const RateFamily& rates);
// per-site energy loss written with specification ratios
double specific_energy_loss(const DenseMeasure& nu, const RateFamily& rates, const Potential& potential);

// sum over i in `sites`, Delta containing i (weight 1/|Delta|), of
// int nu c log[nu(sigma_{Delta cap W} eta_{W minus Delta}) / nu(eta_W)]
double window_entropy_loss(const DenseMeasure& nu, const RateFamily& rates, const Window& lambda);
// the same restricted to i in the shrunken box, divided by |Lambda_n|
double g_tilde(const DenseMeasure& nu, const RateFamily& rates, int n);
// sum over rule shapes of c_S q^|S| times |Lambda_n minus shrunken| / |Lambda_n|
double gtilde_boundary_bound(const RateFamily& rates, int n);
// per-site bound log(1/delta) sum_{Delta containing 0} c_Delta on |window_entropy_loss|
double window_loss_bound(const RateFamily& rates, double delta);
// per-site bound 2 log(1/delta) sum_{Delta containing 0} c_Delta q^|Delta| on |entropy_loss_finite|
double entropy_loss_bound(const RateFamily& rates, double delta);

struct SRDecomposition {
  int n = 0;
  double s = 0.0;
  double r = 0.0;
  double g_tilde = 0.0;  // unnormalised, equal to s + r
  double r_density = 0.0;
};
SRDecomposition s_r_decomposition(const DenseMeasure& nu, const RateFamily& rates, int n);

// Psi(u) = -u log u + u - 1
double psi(double u);
// w Psi(a / w) with its limits at w = 0
double psi_perspective(double w, double a);

EntropyReport f_n(const DenseMeasure& nu, const RateFamily& rates, int n);

// prod_{l >= n} ((2^{l+2}-2)/(2^{l+2}-1))^d; tail bounds the relative truncation error
double jensen_prefactor(int n, int d, double* tail = nullptr);

struct JensenStep {
  int n = 0;
  double f = 0.0;
  double prefactor = 0.0;
  double normalized = 0.0;
  bool holds = true;  // normalized value not above the previous one (within tol)
};
std::vector<JensenStep> jensen_monotone_sequence(const DenseMeasure& nu, const RateFamily& rates,
                                                 int n_max, double tol = 1e-9);

struct ReversibleDecomposition {
  double s_rev = 0.0;
  double r_rev = 0.0;  // per site
  double rho = 0.0;    // per site
  double identity_defect = 0.0;
};
ReversibleDecomposition reversible_decomposition(const DenseMeasure& nu, const RateFamily& rates,
                                                 const Potential& potential, int n);

nlohmann::json to_json(const EntropyReport& r, const Torus& torus, int q,
                       const RateFamily& rates);

}  // namespace ipslab

#endif
