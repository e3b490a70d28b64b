#include <cstring>
#include <iostream>

#include "ipslab/acceptance.hpp"

// one pass/fail line per criterion; nonzero exit on any failure
int main(int argc, char** argv) {
  ipslab::Scale scale = ipslab::Scale::small;
  for (int k = 1; k < argc; ++k)
    if (std::strcmp(argv[k], "--medium") == 0) scale = ipslab::Scale::medium;
  auto results = ipslab::run_acceptance(scale);
  ipslab::print_acceptance(results, std::cout);
  for (const auto& r : results)
    if (!r.passed) return 1;
  return 0;
}
