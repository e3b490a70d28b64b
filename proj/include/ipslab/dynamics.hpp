#ifndef IPSLAB_DYNAMICS_HPP
#define IPSLAB_DYNAMICS_HPP

#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ipslab/geometry.hpp"
#include "ipslab/gibbs.hpp"
#include "ipslab/measure.hpp"
#include "ipslab/state_space.hpp"

namespace ipslab {

// Rates c(eta, sigma) for the sites in `shape`, as a function of eta read on
// `dependence`. Table layout: rates[context * q^|shape| + target].
struct TransitionRule {
  Window shape;
  Window dependence;
  std::vector<double> rates;

  std::vector<std::size_t> shape_positions;  // shape sites inside dependence
  std::uint64_t contexts = 0;
  std::uint64_t targets = 0;
  StateSpace dep_space;

  double rate(std::uint64_t context, std::uint64_t target) const {
    return rates[context * targets + target];
  }
  // sum over targets
  double total(std::uint64_t context) const;
  // sum over targets that change the shape
  double moving(std::uint64_t context) const { return total(context) - rate(context, shape_part(context)); }
  std::uint64_t shape_part(std::uint64_t context) const {
    return dep_space.project(context, shape_positions);
  }
  std::uint64_t replace_shape(std::uint64_t context, std::uint64_t target) const {
    return dep_space.substitute(context, shape_positions, target);
  }
  // fills the derived fields from shape, dependence and q
  void finalize(int q);
};

class RateFamily {
 public:
  RateFamily() = default;
  // Shapes are moved so their smallest site is the origin and equal shapes merged.
  // Rates towards the current configuration are kept: they move nothing but
  // enter the totals c_Delta used by the entropy functionals.
  RateFamily(int q, int dim, std::vector<TransitionRule> rules, std::string name = "custom");

  int q() const { return q_; }
  int dimension() const { return dim_; }
  const std::vector<TransitionRule>& rules() const { return rules_; }
  const std::string& name() const { return name_; }
  int range() const;
  Window dependence_union() const;
  // sup over contexts of the total rate of a rule
  double max_total_rate(std::size_t rule) const;
  double min_positive_rate() const;

 private:
  int q_ = 2;
  int dim_ = 1;
  std::vector<TransitionRule> rules_;
  std::string name_;
};

TransitionRule make_rule(const Window& shape, const Window& dependence, int q,
                         const std::function<double(std::span<const int> context,
                                                    std::span<const int> target)>& rate);

RateFamily glauber_heat_bath(const Potential& potential);
RateFamily glauber_metropolis(const Potential& potential);
RateFamily exclusion(double p_right, double p_left, int dim = 1);
RateFamily cyclic_clock(int q, double forward, double backward, int dim = 1);
RateFamily independent_flip(int q, double rate, int dim = 1);
// death 1 at rate one, infection at rate lambda times infected neighbours
RateFamily contact_process(double lambda, int dim = 1);
// Rates that only look at `ball` (in each rule's own frame): the infimum over
// everything the rule reads outside it.
TransitionRule truncate_rule(const TransitionRule& rule, const Window& ball, int q);
RateFamily truncated_rates(const RateFamily& rates, const Window& ball);

// throws unless every rule translate sits on the torus without self-overlap
void require_fits(const RateFamily& rates, const Torus& torus);

// The rule translates placed on a torus.
class TorusDynamics {
 public:
  TorusDynamics(const RateFamily& rates, const Torus& torus);

  const RateFamily& rates() const { return rates_; }
  const Torus& torus() const { return torus_; }
  const StateSpace& space() const { return space_; }
  std::size_t anchors() const { return torus_.site_count(); }

  const std::vector<std::size_t>& shape_sites(std::size_t rule, std::size_t anchor) const {
    return shape_sites_[rule][anchor];
  }
  const std::vector<std::size_t>& dependence_sites(std::size_t rule, std::size_t anchor) const {
    return dep_sites_[rule][anchor];
  }
  std::uint64_t context(std::uint64_t state, std::size_t rule, std::size_t anchor) const {
    return space_.project(state, dep_sites_[rule][anchor]);
  }
  std::uint64_t jump(std::uint64_t state, std::size_t rule, std::size_t anchor,
                     std::uint64_t target) const {
    return space_.substitute(state, shape_sites_[rule][anchor], target);
  }
  double rate(std::uint64_t state, std::size_t rule, std::size_t anchor, std::uint64_t target) const;
  double total_rate(std::uint64_t state, std::size_t rule, std::size_t anchor) const;

 private:
  RateFamily rates_;
  Torus torus_;
  StateSpace space_;
  std::vector<std::vector<std::vector<std::size_t>>> shape_sites_, dep_sites_;
};

using SparseQ = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct GeneratorMatrix {
  StateSpace space;
  SparseQ q;  // rows sum to zero
  Window window;
  std::optional<Torus> torus;
};

GeneratorMatrix generator_matrix(const RateFamily& rates, const Torus& torus);
// (L f)(eta) on the torus
double apply_generator(const RateFamily& rates, const Torus& torus,
                       const std::function<double(std::span<const int>)>& f,
                       std::span<const int> eta);

struct Check {
  bool holds = true;
  std::string detail;
};

struct ConditionReport {
  Check finitely_many_types;
  Check uniform_continuity;
  Check no_traps;
  Check min_rate;
  Check irreducible;
  std::optional<std::string> conserved;
  double min_rate_value = 0.0;
  bool all() const {
    return finitely_many_types.holds && uniform_continuity.holds && no_traps.holds &&
           min_rate.holds && irreducible.holds;
  }
};

ConditionReport check_conditions(const RateFamily& rates);
// max per-jump |mu(eta) c(eta -> xi) - mu(xi) c(xi -> eta)| with mu the torus Gibbs measure
double detailed_balance_defect(const RateFamily& rates, const Potential& potential,
                               const Torus& torus);

// Rates seen by the marginal on a window once the outside is averaged against mu.
struct AveragedJump {
  std::size_t rule = 0;
  std::size_t anchor = 0;
  std::vector<int> window_position;  // per shape site, -1 when outside the window
  std::uint64_t targets = 0;
  std::vector<double> rates;  // [window state * targets + target]
};

struct WindowDynamics {
  Window window;  // torus coordinates
  int q = 2;
  std::vector<AveragedJump> jumps;
};

WindowDynamics averaged_dynamics(const RateFamily& rates, const DenseMeasure& mu,
                                 const Window& lambda);
GeneratorMatrix generator_matrix(const WindowDynamics& dyn);

}  // namespace ipslab

#endif
