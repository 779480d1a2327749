#include "multissl/nn/encoder.hpp"

#include <nlohmann/json.hpp>

#include "multissl/core/error.hpp"

namespace multissl::nn {

using nlohmann::json;

const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::kSound: return "sound";
    case EncoderKind::kVisual: return "visual";
    case EncoderKind::kFlow: return "flow";
  }
  return "?";
}

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "sound") return EncoderKind::kSound;
  if (s == "visual") return EncoderKind::kVisual;
  if (s == "flow") return EncoderKind::kFlow;
  throw ConfigError("unknown encoder kind '" + s + "'");
}

void EncoderConfig::validate() const {
  if (embedding_dim < 8) throw ConfigError("encoder embedding_dim must be >= 8");
  if (channels.size() < 2) throw ConfigError("encoder needs at least 2 conv stages");
  for (int c : channels) {
    if (c < 1) throw ConfigError("encoder stage widths must be positive");
  }
  if (input_channels < 1) throw ConfigError("encoder input_channels must be positive");
  if (kernel < 1 || stride < 1) throw ConfigError("encoder kernel and stride must be positive");
}

std::pair<int, int> EncoderConfig::dense_size(int height, int width) const {
  const int pad = kernel / 2;
  for (size_t s = 0; s < channels.size(); ++s) {
    height = (height + 2 * pad - kernel) / stride + 1;
    width = (width + 2 * pad - kernel) / stride + 1;
  }
  return {height, width};
}

void to_json(json& j, const EncoderConfig& c) {
  j = json{{"kind", encoder_kind_name(c.kind)},
           {"input_channels", c.input_channels},
           {"input_height", c.input_height},
           {"input_width", c.input_width},
           {"channels", c.channels},
           {"kernel", c.kernel},
           {"stride", c.stride},
           {"embedding_dim", c.embedding_dim},
           {"emit_dense", c.emit_dense}};
}

void from_json(const json& j, EncoderConfig& c) {
  c.kind = parse_encoder_kind(j.at("kind").get<std::string>());
  c.input_channels = j.value("input_channels", c.kind == EncoderKind::kSound ? 2 : 1);
  c.input_height = j.value("input_height", 0);
  c.input_width = j.value("input_width", 0);
  j.at("channels").get_to(c.channels);
  j.at("kernel").get_to(c.kernel);
  j.at("stride").get_to(c.stride);
  j.at("embedding_dim").get_to(c.embedding_dim);
  j.at("emit_dense").get_to(c.emit_dense);
}

// ---------------------------------------------------------------------------

ConvTrunk::ConvTrunk(EncoderConfig config, Rng& rng, std::vector<int> lateral_widths)
    : config_(std::move(config)), lateral_widths_(std::move(lateral_widths)) {
  config_.validate();
  const int n = static_cast<int>(config_.channels.size());
  if (lateral_widths_.empty()) lateral_widths_.assign(static_cast<size_t>(n) + 1, 0);
  if (static_cast<int>(lateral_widths_.size()) != n + 1 || lateral_widths_[0] != 0) {
    throw Error("ConvTrunk: lateral widths must have stages+1 entries with none at stage 0");
  }
  int in = config_.input_channels;
  for (int s = 0; s < n; ++s) {
    stages_.emplace_back(in, config_.channels[static_cast<size_t>(s)], config_.kernel, config_.stride,
                         config_.kernel / 2, rng);
    in = config_.channels[static_cast<size_t>(s)];
  }
  projection_ = Conv2d(in, config_.embedding_dim, 1, 1, 0, rng);

  Rng lateral_rng = rng.derive("lateral");
  lateral_weights_.resize(static_cast<size_t>(n) + 1);
  for (int s = 1; s <= n; ++s) {
    const int w = lateral_widths_[static_cast<size_t>(s)];
    if (w == 0) continue;
    const int k = s < n ? config_.kernel : 1;
    const int out = s < n ? config_.channels[static_cast<size_t>(s)] : config_.embedding_dim;
    lateral_weights_[static_cast<size_t>(s)] = Var::parameter(fan_in_uniform({out, w, k, k}, w * k * k, lateral_rng));
  }
}

int ConvTrunk::stage_input_width(int s) const {
  const int own = s == 0 ? config_.input_channels : config_.channels[static_cast<size_t>(s - 1)];
  return own + lateral_widths_.at(static_cast<size_t>(s));
}

void ConvTrunk::zero_projection() {
  for (auto& v : projection_.weight.mutable_value().data) v = 0.0;
  for (auto& v : projection_.bias.mutable_value().data) v = 0.0;
}

void ConvTrunk::check_input(const Var& input) const {
  const auto& s = input.shape();
  const bool ok = s.size() == 4 && s[1] == config_.input_channels &&
                  (config_.input_height == 0 || s[2] == config_.input_height) &&
                  (config_.input_width == 0 || s[3] == config_.input_width);
  if (!ok) {
    Shape expected{-1, config_.input_channels, config_.input_height, config_.input_width};
    throw Error(std::string(encoder_kind_name(config_.kind)) + " encoder: input shape mismatch, expected " +
                to_string(expected) + " (N free, 0 = any), got " + to_string(s));
  }
}

ColumnActivations ConvTrunk::run(const Var& input, const std::vector<const ColumnActivations*>& previous,
                                 double lateral_scale) const {
  check_input(input);
  ColumnActivations out;
  const size_t n = stages_.size();
  auto with_laterals = [&](const Var& own, size_t s, const Conv2d& layer, Var& in, Var& weight) {
    in = own;
    weight = layer.weight;
    if (lateral_widths_[s] == 0) return;
    if (previous.empty()) throw Error("ConvTrunk: column expects lateral inputs");
    std::vector<Var> parts{own};
    for (const auto* p : previous) {
      const Var& lat = p->stages.at(s - 1);
      parts.push_back(lateral_scale == 1.0 ? lat : scale(lat, lateral_scale));
    }
    in = concat(parts, 1);
    weight = concat({layer.weight, lateral_weights_[s]}, 1);
  };

  Var h = input;
  for (size_t s = 0; s < n; ++s) {
    Var in, w;
    with_laterals(h, s, stages_[s], in, w);
    h = silu(conv2d(in, w, stages_[s].bias, stages_[s].stride, stages_[s].pad));
    out.stages.push_back(h);
  }
  Var in, w;
  with_laterals(h, n, projection_, in, w);
  out.dense = conv2d(in, w, projection_.bias, 1, 0);
  return out;
}

TrunkOutput ConvTrunk::forward(const Var& input) const {
  ColumnActivations act = run(input, {});
  TrunkOutput out;
  out.pooled = spatial_mean(act.dense);
  if (config_.emit_dense) out.dense = act.dense;
  return out;
}

NamedParams ConvTrunk::parameters() const {
  NamedParams p;
  for (size_t s = 0; s < stages_.size(); ++s) {
    append_params(p, "stage" + std::to_string(s) + ".", stages_[s].parameters());
    if (lateral_weights_[s].defined()) p.emplace_back("stage" + std::to_string(s) + ".lateral", lateral_weights_[s]);
  }
  append_params(p, "proj.", projection_.parameters());
  if (lateral_weights_.back().defined()) p.emplace_back("proj.lateral", lateral_weights_.back());
  return p;
}

std::unique_ptr<Trunk> ConvTrunk::clone() const {
  auto c = std::unique_ptr<ConvTrunk>(new ConvTrunk());
  c->config_ = config_;
  c->lateral_widths_ = lateral_widths_;
  for (const auto& s : stages_) c->stages_.push_back(s.clone());
  c->projection_ = projection_.clone();
  for (const auto& w : lateral_weights_) c->lateral_weights_.push_back(w.defined() ? clone_param(w) : Var());
  return c;
}

json ConvTrunk::describe() const {
  return json{{"kind", "conv"}, {"encoder", config_}, {"lateral_widths", lateral_widths_}};
}

// ---------------------------------------------------------------------------

ConcatTrunk::ConcatTrunk(std::vector<std::unique_ptr<Trunk>> members) : members_(std::move(members)) {
  if (members_.size() < 2) throw Error("concatenation needs at least 2 encoders");
  for (const auto& m : members_) {
    if (m->config().kind != members_.front()->config().kind) {
      throw Error("concatenation members must share an input modality");
    }
    set_trainable(m->parameters(), false);
  }
}

TrunkOutput ConcatTrunk::forward(const Var& input) const {
  std::vector<Var> pooled, dense;
  bool have_dense = true;
  for (const auto& m : members_) {
    TrunkOutput o = m->forward(input);
    pooled.push_back(o.pooled);
    if (o.dense.defined()) {
      dense.push_back(o.dense);
    } else {
      have_dense = false;
    }
  }
  TrunkOutput out;
  out.pooled = concat(pooled, 1);
  if (have_dense) out.dense = concat(dense, 1);
  return out;
}

int ConcatTrunk::embedding_dim() const {
  int d = 0;
  for (const auto& m : members_) d += m->embedding_dim();
  return d;
}

NamedParams ConcatTrunk::parameters() const {
  NamedParams p;
  for (size_t k = 0; k < members_.size(); ++k) {
    append_params(p, "member" + std::to_string(k) + ".", members_[k]->parameters());
  }
  return p;
}

std::unique_ptr<Trunk> ConcatTrunk::clone() const {
  std::vector<std::unique_ptr<Trunk>> m;
  for (const auto& t : members_) m.push_back(t->clone());
  return std::make_unique<ConcatTrunk>(std::move(m));
}

json ConcatTrunk::describe() const {
  json members = json::array();
  for (const auto& m : members_) members.push_back(m->describe());
  return json{{"kind", "concat"}, {"members", members}};
}

// ---------------------------------------------------------------------------

std::vector<int> progressive_lateral_widths(const EncoderConfig& config, int index) {
  const size_t n = config.channels.size();
  std::vector<int> w(n + 1, 0);
  if (index == 0) return w;
  for (size_t s = 1; s < n; ++s) w[s] = index * config.channels[s - 1];
  w[n] = index * config.channels.back();
  return w;
}

ProgressiveTrunk::ProgressiveTrunk(std::vector<std::unique_ptr<ConvTrunk>> columns)
    : columns_(std::move(columns)) {
  if (columns_.empty()) throw Error("progressive trunk needs at least one column");
  for (size_t k = 0; k < columns_.size(); ++k) {
    if (columns_[k]->lateral_widths() != progressive_lateral_widths(columns_[0]->config(), static_cast<int>(k))) {
      throw Error("progressive column " + std::to_string(k) + " has inconsistent lateral widths");
    }
    if (k + 1 < columns_.size()) set_trainable(columns_[k]->parameters(), false);
  }
}

TrunkOutput ProgressiveTrunk::forward_masked(const Var& input, double lateral_scale) const {
  std::vector<ColumnActivations> acts;
  acts.reserve(columns_.size());
  for (const auto& col : columns_) {
    std::vector<const ColumnActivations*> prev;
    for (const auto& a : acts) prev.push_back(&a);
    acts.push_back(col->run(input, prev, lateral_scale));
  }
  TrunkOutput out;
  out.pooled = spatial_mean(acts.back().dense);
  if (config().emit_dense) out.dense = acts.back().dense;
  return out;
}

TrunkOutput ProgressiveTrunk::forward(const Var& input) const { return forward_masked(input, lateral_scale_); }

NamedParams ProgressiveTrunk::parameters() const {
  NamedParams p;
  for (size_t k = 0; k < columns_.size(); ++k) {
    append_params(p, "column" + std::to_string(k) + ".", columns_[k]->parameters());
  }
  return p;
}

std::unique_ptr<Trunk> ProgressiveTrunk::clone() const {
  std::vector<std::unique_ptr<ConvTrunk>> cols;
  for (const auto& c : columns_) {
    auto t = c->clone();
    cols.emplace_back(static_cast<ConvTrunk*>(t.release()));
  }
  auto out = std::make_unique<ProgressiveTrunk>(std::move(cols));
  out->lateral_scale_ = lateral_scale_;
  // Preserve trainability of the last column as it was.
  set_trainable(out->columns_.back()->parameters(), columns_.back()->parameters().front().second.requires_grad());
  return out;
}

json ProgressiveTrunk::describe() const {
  return json{{"kind", "progressive"}, {"encoder", columns_.front()->config()}, {"columns", columns_.size()}};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Trunk> make_trunk(const json& d) {
  const auto kind = d.at("kind").get<std::string>();
  Rng rng(0);
  if (kind == "conv") {
    return std::make_unique<ConvTrunk>(d.at("encoder").get<EncoderConfig>(), rng,
                                       d.at("lateral_widths").get<std::vector<int>>());
  }
  if (kind == "concat") {
    std::vector<std::unique_ptr<Trunk>> members;
    for (const auto& m : d.at("members")) members.push_back(make_trunk(m));
    return std::make_unique<ConcatTrunk>(std::move(members));
  }
  if (kind == "progressive") {
    const auto cfg = d.at("encoder").get<EncoderConfig>();
    const int n = d.at("columns").get<int>();
    std::vector<std::unique_ptr<ConvTrunk>> cols;
    for (int k = 0; k < n; ++k) cols.push_back(std::make_unique<ConvTrunk>(cfg, rng, progressive_lateral_widths(cfg, k)));
    return std::make_unique<ProgressiveTrunk>(std::move(cols));
  }
  throw Error("unknown trunk kind '" + kind + "'");
}

void momentum_update(const NamedParams& query, const NamedParams& key, double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw Error("momentum must be in [0, 1]");
  if (query.size() != key.size()) throw Error("momentum_update: parameter trees are not congruent");
  for (size_t i = 0; i < query.size(); ++i) {
    if (query[i].first != key[i].first || query[i].second.shape() != key[i].second.shape()) {
      throw Error("momentum_update: parameter trees are not congruent at '" + query[i].first + "'");
    }
  }
  for (size_t i = 0; i < query.size(); ++i) {
    const auto& q = query[i].second.value();
    auto& k = key[i].second.mutable_value();
    for (int64_t e = 0; e < k.size(); ++e) k[e] = m * k[e] + (1.0 - m) * q[e];
  }
}

}  // namespace multissl::nn
