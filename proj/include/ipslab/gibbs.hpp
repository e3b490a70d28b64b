#ifndef IPSLAB_GIBBS_HPP
#define IPSLAB_GIBBS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ipslab/geometry.hpp"
#include "ipslab/measure.hpp"
#include "ipslab/state_space.hpp"

namespace ipslab {

// Energy table of one interaction shape, indexed by the configuration on the
// shape in canonical order.
struct Interaction {
  Window shape;
  std::vector<double> table;
};

class Potential {
 public:
  Potential() = default;
  // Shapes are moved so their smallest site is the origin; equal shapes are merged.
  Potential(int q, int dim, std::vector<Interaction> terms, std::string name = "custom");

  int q() const { return q_; }
  int dimension() const { return dim_; }
  const std::vector<Interaction>& terms() const { return terms_; }
  const std::string& name() const { return name_; }
  int range() const;
  // union of all translates of the shapes that contain the origin
  Window neighborhood() const;
  // sum over translates A containing the origin of max |Phi_A|
  double local_bound() const;

 private:
  int q_ = 2;
  int dim_ = 1;
  std::vector<Interaction> terms_;
  std::string name_;
};

Potential ising_potential(double beta, double field = 0.0, int dim = 1);
Potential potts_potential(int q, double beta, int dim = 1);
Potential zero_potential(int q, int dim = 1);
// energy h on state 1, zero otherwise
Potential single_site_field(double h, int q = 2, int dim = 1);

struct Specification {
  Potential potential;
  double delta = 0.0;  // uniform lower bound of single-site conditionals
};

Specification make_specification(const Potential& potential);
// inf over boundary conditions of gamma_0(eta_0 | boundary), by enumeration
double nonnull_delta(const Potential& potential);

// Distribution over inner configurations of lambda (canonical order) given
// a boundary covering every interacting translate.
std::vector<double> gamma_kernel(const Potential& potential, const Window& lambda,
                                 const Config& boundary);
double gamma(const Potential& potential, const Window& lambda, const Config& inner,
             const Config& boundary);

// Potential laid out on a torus: every translate of every shape, one per anchor.
class TorusHamiltonian {
 public:
  TorusHamiltonian(const Potential& potential, const Torus& torus);

  const Torus& torus() const { return torus_; }
  const StateSpace& space() const { return space_; }
  double energy(std::uint64_t state) const;
  // energy of the translates meeting the given sites
  double local_energy(std::uint64_t state, std::span<const std::size_t> sites) const;
  std::vector<std::size_t> touching(std::span<const std::size_t> sites) const;
  double energy_of(std::uint64_t state, std::span<const std::size_t> translate_ids) const;
  // conditional law of the digits at `sites` given the rest of `state`
  std::vector<double> conditional(std::uint64_t state, std::span<const std::size_t> sites) const;

 private:
  struct Placed {
    std::size_t term;
    std::vector<std::size_t> sites;
  };
  Potential potential_;
  Torus torus_;
  StateSpace space_;
  std::vector<Placed> placed_;
  std::vector<std::vector<std::size_t>> touching_;
};

DenseMeasure torus_gibbs(const Potential& potential, const Torus& torus);
// max over eta_Lambda of |(m gamma_Lambda)(eta_Lambda) - m(eta_Lambda)|
double dlr_defect(const DenseMeasure& m, const Potential& potential, const Window& lambda);
// max over positive contexts of |log gamma ratio - log m ratio|
double conditional_ratio_defect(const DenseMeasure& m, const Potential& potential,
                                const Window& delta);

}  // namespace ipslab

#endif
