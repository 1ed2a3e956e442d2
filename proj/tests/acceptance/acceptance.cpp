// Full acceptance run on the shipped preset config. One PASS/FAIL line per
// criterion; exit status 0 only when all ten pass.

#include <iostream>
#include <map>
#include <string>

#include "cartanlab/lab/experiments.hpp"

int main(int argc, char** argv) {
  namespace lab = cartanlab::lab;
  const std::string config = argc > 1 ? argv[1] : CARTANLAB_CONFIGS "/cubic-2cos-pi-9.json";
  const std::string out = argc > 2 ? argv[2] : "acceptance-out";
  try {
    auto cfg = lab::load_config(config, lab::Overrides{std::nullopt, out});
    auto r = lab::run("verify", cfg);
    r.artifacts.write(cfg.out);
    std::map<int, const lab::Check*> by_criterion;
    for (const auto& c : r.checks)
      if (c.criterion > 0) by_criterion[c.criterion] = &c;
    bool all = true;
    for (int k = 1; k <= 10; ++k) {
      auto it = by_criterion.find(k);
      if (it == by_criterion.end()) {
        std::cout << "FAIL criterion " << k << ": not evaluated\n";
        all = false;
        continue;
      }
      std::cout << it->second->line() << '\n';
      all = all && it->second->pass;
    }
    std::cout << (all ? "ALL PASS" : "SOME FAIL") << '\n';
    return all ? 0 : 1;
  } catch (const std::exception& e) {
    std::cout << "FAIL: " << e.what() << '\n';
    return 1;
  }
}
