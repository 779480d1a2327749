#include "multissl/combine/strategy.hpp"

namespace multissl::combine {

std::unique_ptr<nn::ConcatTrunk> concat_encoder(std::vector<std::unique_ptr<nn::Trunk>> trunks) {
  return std::make_unique<nn::ConcatTrunk>(std::move(trunks));
}

StrategyResult concat_strategy(const Experiment& exp, const std::vector<ssl::TaskId>& tasks) {
  std::vector<std::unique_ptr<nn::Trunk>> trunks;
  for (auto t : tasks) trunks.push_back(train_single(exp, t).trunk);
  StrategyResult r;
  r.trunk = concat_encoder(std::move(trunks));
  nn::NamedParams params;
  nn::append_params(params, "trunk.", r.trunk->parameters());
  r.state = nn::capture(params, nullptr, 0);
  return r;
}

}  // namespace multissl::combine
