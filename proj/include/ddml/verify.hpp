#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ddml::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 0;
  int workers = 2;
};

// Named verification suites, one per acceptance area:
//   variance, adv2, discard, accumulation, preimage, gradient,
//   sqrt_equiv, strategies, eps_sweep, recovery, net
std::vector<std::string> suite_names();
std::vector<CheckResult> run_suite(const std::string& suite, const Options& opt);

}  // namespace ddml::verify
