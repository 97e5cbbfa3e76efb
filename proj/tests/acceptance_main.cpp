// Acceptance suite: one criterion per invocation (or all when run bare).
// Prints one [PASS]/[FAIL] line per criterion check; exits nonzero if any
// requested check fails.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "ddml/verify.hpp"

namespace {

struct Criterion {
  int id;
  const char* title;
  std::vector<std::string> suites;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c = {
      {1, "variance stabilization", {"variance"}},
      {2, "adversary II worst case", {"adv2"}},
      {3, "discard fraction", {"discard"}},
      {4, "noise accumulation", {"accumulation"}},
      {5, "pre-image amplification", {"preimage"}},
      {6, "sqrt batching equivalence", {"sqrt_equiv"}},
      {7, "strategy panel", {"strategies"}},
      {8, "epsilon sweep", {"eps_sweep"}},
      {9, "known-weights recovery", {"recovery"}},
      {10, "gradient correctness", {"gradient"}},
      {11, "networked equivalence", {"net"}},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  ddml::verify::Options opt;
  opt.seed = 0;
  opt.workers = 2;

  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--seed") == 0 && i + 1 < argc) {
      opt.seed = std::strtoull(argv[++i], nullptr, 10);
    } else if (std::strcmp(argv[i], "--workers") == 0 && i + 1 < argc) {
      opt.workers = std::atoi(argv[++i]);
    } else {
      wanted.push_back(std::atoi(argv[i]));
    }
  }

  bool all_pass = true;
  for (const auto& c : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    bool crit_pass = true;
    std::string details;
    for (const auto& s : c.suites) {
      for (const auto& r : ddml::verify::run_suite(s, opt)) {
        std::printf("  %s %s — %s\n", r.pass ? "[ok]  " : "[FAIL]", r.name.c_str(),
                    r.detail.c_str());
        crit_pass &= r.pass;
      }
    }
    std::printf("%s criterion %d — %s\n", crit_pass ? "[PASS]" : "[FAIL]", c.id, c.title);
    std::fflush(stdout);
    all_pass &= crit_pass;
  }
  return all_pass ? 0 : 1;
}
