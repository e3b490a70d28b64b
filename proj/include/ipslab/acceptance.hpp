#ifndef IPSLAB_ACCEPTANCE_HPP
#define IPSLAB_ACCEPTANCE_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace ipslab {

enum class Scale { small, medium };

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Runs the twelve acceptance criteria; criteria run in parallel when threads > 1.
std::vector<CriterionResult> run_acceptance(Scale scale, int threads = 1);
// one line per criterion followed by a summary line
void print_acceptance(const std::vector<CriterionResult>& results, std::ostream& out);
int cmd_verify_all(Scale scale, int threads, std::ostream& out);

// canonical experiment used by the determinism criterion and the shipped examples
std::string canonical_glauber_config();

}  // namespace ipslab

#endif
