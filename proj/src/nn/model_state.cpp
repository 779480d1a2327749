#include "multissl/nn/model_state.hpp"

#include <cmath>
#include <map>

#include "multissl/core/error.hpp"

namespace multissl::nn {

void ModelState::check_finite() const {
  for (const auto& [name, t] : params) {
    for (double v : t.data) {
      if (!std::isfinite(v)) throw Error("parameter '" + name + "' is not finite");
    }
  }
}

NamedTensors snapshot(const NamedParams& params) {
  NamedTensors out;
  out.reserve(params.size());
  for (const auto& [name, p] : params) out.emplace_back(name, p.value());
  return out;
}

ModelState capture(const NamedParams& params, const Adam* optimizer, int64_t step) {
  ModelState s;
  s.params = snapshot(params);
  if (optimizer != nullptr) {
    s.optimizer_steps = optimizer->steps();
    s.optimizer_slots = optimizer->slots();
  }
  s.step = step;
  return s;
}

void restore(const NamedParams& params, const NamedTensors& values, bool allow_extra) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : values) by_name[name] = &t;
  size_t used = 0;
  for (const auto& [name, p] : params) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error("restore: missing parameter '" + name + "'");
    if (it->second->shape != p.shape()) {
      throw Error("restore: parameter '" + name + "' has shape " + to_string(it->second->shape) + ", expected " +
                  to_string(p.shape()));
    }
    p.mutable_value() = *it->second;
    ++used;
  }
  if (!allow_extra && used != by_name.size()) throw Error("restore: values contain unknown parameters");
}

NamedTensors with_prefix(const NamedTensors& values, const std::string& prefix) {
  NamedTensors out;
  for (const auto& [name, t] : values) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.emplace_back(name.substr(prefix.size()), t);
  }
  return out;
}

bool same_values(const NamedParams& params, const NamedTensors& values) {
  if (params.size() != values.size()) return false;
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].first != values[i].first || !(params[i].second.value() == values[i].second)) return false;
  }
  return true;
}

}  // namespace multissl::nn
