#ifndef IPSLAB_MEASURE_HPP
#define IPSLAB_MEASURE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipslab/geometry.hpp"
#include "ipslab/state_space.hpp"
#include "json.hpp"

namespace ipslab {

// Probability weights on q^{|window|} configurations. A measure built on a torus
// covers every torus site and remembers the torus, so windows handed to it
// may be given in Z^d coordinates and are wrapped.
class DenseMeasure {
 public:
  DenseMeasure() = default;
  // weights must already sum to 1 within 1e-12
  DenseMeasure(Window window, int q, std::vector<double> weights);
  static DenseMeasure on_torus(const Torus& torus, int q, std::vector<double> weights);
  // divides by the total mass
  static DenseMeasure normalized(Window window, int q, std::vector<double> weights);
  static DenseMeasure normalized_on_torus(const Torus& torus, int q, std::vector<double> weights);

  const Window& window() const { return window_; }
  int q() const { return space_.q(); }
  const StateSpace& space() const { return space_; }
  std::uint64_t size() const { return space_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  double operator[](std::uint64_t state) const { return weights_[state]; }
  const std::optional<Torus>& torus() const { return torus_; }
  const Torus& require_torus() const;

  // window in this measure's own coordinates (wrapped on a torus)
  Window localize(const Window& sub) const;
  // positions inside window() of the sites of localize(sub), in canonical order
  std::vector<std::size_t> positions_of(const Window& sub) const;
  double probability(const Config& c) const;

 private:
  Window window_;
  StateSpace space_;
  std::vector<double> weights_;
  std::optional<Torus> torus_;
};

DenseMeasure marginal(const DenseMeasure& m, const Window& sub);
// marginal weights at the given positions of m.window(), indexed in the order given
std::vector<double> marginal_weights(const DenseMeasure& m, std::span<const std::size_t> positions);
DenseMeasure conditional(const DenseMeasure& m, const Config& given);
DenseMeasure translation_average(const DenseMeasure& m);
bool is_translation_invariant(const DenseMeasure& m, double tol = 1e-12);
// min over sites i and configurations with positive context of m(eta_i | rest)
double non_nullness_constant(const DenseMeasure& m);
DenseMeasure soften(const DenseMeasure& m, double eps);
double total_variation(const DenseMeasure& a, const DenseMeasure& b);
// sum_k 2^{-k} TV of the marginals on schedule[k-1]
double weak_distance(const DenseMeasure& a, const DenseMeasure& b,
                     const std::vector<Window>& schedule);
std::vector<Window> growing_windows(const Torus& torus);

DenseMeasure uniform_measure(const Torus& torus, int q);
DenseMeasure product_measure(const Torus& torus, const std::vector<double>& single_site);
DenseMeasure point_measure(const Torus& torus, int q, const std::vector<int>& values);
DenseMeasure random_measure(const Torus& torus, int q, std::uint64_t seed);
// uniform double in [0,1) from 53 random bits
double unit_uniform(std::uint64_t bits);

nlohmann::json to_json(const DenseMeasure& m);
DenseMeasure measure_from_json(const nlohmann::json& j);
// raw little-endian f64 array at path plus a JSON header at path + ".json"
void write_raw(const DenseMeasure& m, const std::string& path);
DenseMeasure read_raw(const std::string& path);

}  // namespace ipslab

#endif
