#ifndef IPSLAB_CONFIG_HPP
#define IPSLAB_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipslab/dynamics.hpp"
#include "ipslab/gibbs.hpp"
#include "ipslab/measure.hpp"
#include "json.hpp"

namespace ipslab {

// A bad experiment file. `field` is a JSON pointer; line is 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, std::string field, int line, const std::string& message);
  std::string source, field;
  int line = 0;
  std::string message;  // without the location prefix
};

enum class Reference { stationary, gibbs };

struct TimeGrid {
  double t_end = 10.0;
  bool in_gap_units = false;  // t_end measured in units of 1/gap
  int points = 50;
};

struct ExperimentConfig {
  std::string name;
  std::string source;  // file the config came from
  std::string text;    // raw bytes, hashed into the output headers
  nlohmann::json json;

  Potential potential;
  RateFamily rates;
  Torus torus{std::vector<int>{1}};
  nlohmann::json initial;  // recipe, built per seed
  Reference reference = Reference::stationary;
  TimeGrid time;
  std::vector<Window> windows;
  std::vector<std::string> suites;
  int jensen_n_max = 2;
  std::vector<int> gtilde_n{1};
  int box_n = 1;  // box index for decomposition/reversible suites
  std::vector<double> attractor_gaps{10.0, 20.0, 50.0};
  std::optional<nlohmann::json> expect_conditions;
  std::uint64_t seed = 1;
  std::string output = "out";
};

const std::vector<std::string>& known_suites();

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<string>");
ExperimentConfig load_config(const std::string& path);
// line of the value at a JSON pointer in the config text (nearest ancestor if absent)
int config_line(const ExperimentConfig& config, const std::string& pointer);

// pieces usable on their own; `at` is the JSON pointer used in diagnostics
Potential potential_from_json(const nlohmann::json& j, int dim, const std::string& at = "/model/potential");
RateFamily rates_from_json(const nlohmann::json& j, const Potential& potential, const std::string& at = "/model/rates");
DenseMeasure initial_measure(const nlohmann::json& recipe, const Torus& torus, int q, std::uint64_t seed,
                             const std::string& at = "/initial");

}  // namespace ipslab

#endif
