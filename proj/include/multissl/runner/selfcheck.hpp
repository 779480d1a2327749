#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "multissl/combine/strategy.hpp"

namespace multissl::runner {

/// Seconds-scale dataset and experiment used by `verify` and the test suites.
scenegen::SceneGenConfig tiny_scene_config();
combine::Experiment tiny_experiment(const scenegen::Dataset& data, uint64_t seed = 1);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Fast oracle and invariant checks. Prints one line per check and a
/// summary; returns all results.
std::vector<CheckResult> run_selfcheck(std::ostream& out);

}  // namespace multissl::runner
