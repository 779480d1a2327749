#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace multissl {

/// One scalar observation, the unit of the metrics stream.
struct MetricRow {
  std::string phase;
  std::string task;
  int64_t step = 0;
  std::string metric;
  double value = 0.0;
};

using MetricSink = std::function<void(const MetricRow&)>;

}  // namespace multissl
