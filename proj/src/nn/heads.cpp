#include "multissl/nn/heads.hpp"

#include <nlohmann/json.hpp>

#include "multissl/core/error.hpp"

namespace multissl::nn {

namespace {

constexpr std::pair<HeadKind, const char*> kHeadNames[] = {
    {HeadKind::kRotationClassifier, "rotation_classifier"},
    {HeadKind::kGapRegressor, "gap_regressor"},
    {HeadKind::kProjection, "projection"},
    {HeadKind::kDenseProjection, "dense_projection"},
    {HeadKind::kSemanticDecoder, "semantic_decoder"},
    {HeadKind::kS3rDecoder, "s3r_decoder"},
};

}  // namespace

const char* head_kind_name(HeadKind k) {
  for (const auto& [kind, name] : kHeadNames) {
    if (kind == k) return name;
  }
  return "?";
}

HeadKind parse_head_kind(const std::string& s) {
  for (const auto& [kind, name] : kHeadNames) {
    if (s == name) return kind;
  }
  throw ConfigError("unknown head kind '" + s + "'");
}

bool HeadSpec::is_map_head() const {
  return kind == HeadKind::kDenseProjection || kind == HeadKind::kSemanticDecoder ||
         kind == HeadKind::kS3rDecoder;
}

void HeadSpec::validate() const {
  if (widths.size() < 2) throw ConfigError(std::string(head_kind_name(kind)) + ": needs at least one layer");
  for (int w : widths) {
    if (w < 1) throw ConfigError(std::string(head_kind_name(kind)) + ": widths must be positive");
  }
  if (kind == HeadKind::kGapRegressor && (widths.size() != 3 || widths[1] != kGapHiddenSize || widths[2] != 1)) {
    throw ConfigError("gap_regressor must be input -> 64 -> 1");
  }
  if ((kind == HeadKind::kSemanticDecoder || kind == HeadKind::kS3rDecoder) && widths.size() != 4) {
    throw ConfigError(std::string(head_kind_name(kind)) + " must have three layers");
  }
}

HeadSpec HeadSpec::rotation_classifier(int input_dim, int hidden, int bins) {
  return {HeadKind::kRotationClassifier, {input_dim, hidden, bins}};
}
HeadSpec HeadSpec::gap_regressor(int input_dim) {
  return {HeadKind::kGapRegressor, {input_dim, kGapHiddenSize, 1}};
}
HeadSpec HeadSpec::projection(int dim) { return {HeadKind::kProjection, {dim, dim, dim}}; }
HeadSpec HeadSpec::dense_projection(int dim) { return {HeadKind::kDenseProjection, {dim, dim, dim}}; }
HeadSpec HeadSpec::semantic_decoder(int dim, int hidden, int outputs) {
  return {HeadKind::kSemanticDecoder, {dim, hidden, hidden, outputs}};
}
HeadSpec HeadSpec::s3r_decoder(int dim, int hidden, int outputs) {
  return {HeadKind::kS3rDecoder, {dim, hidden, hidden, outputs}};
}

void to_json(nlohmann::json& j, const HeadSpec& s) {
  j = nlohmann::json{{"kind", head_kind_name(s.kind)}, {"widths", s.widths}};
}

void from_json(const nlohmann::json& j, HeadSpec& s) {
  s.kind = parse_head_kind(j.at("kind").get<std::string>());
  j.at("widths").get_to(s.widths);
}

Head::Head(HeadSpec spec, Rng& rng) : spec_(std::move(spec)) {
  spec_.validate();
  for (size_t i = 0; i + 1 < spec_.widths.size(); ++i) {
    if (spec_.is_map_head()) {
      convs_.emplace_back(spec_.widths[i], spec_.widths[i + 1], 1, 1, 0, rng);
    } else {
      linears_.emplace_back(spec_.widths[i], spec_.widths[i + 1], rng);
    }
  }
}

Var Head::operator()(const Var& x) const {
  Var h = x;
  const size_t n = spec_.is_map_head() ? convs_.size() : linears_.size();
  for (size_t i = 0; i < n; ++i) {
    h = spec_.is_map_head() ? convs_[i](h) : linears_[i](h);
    if (i + 1 < n) h = silu(h);
  }
  return h;
}

NamedParams Head::parameters() const {
  NamedParams p;
  for (size_t i = 0; i < linears_.size(); ++i) append_params(p, "fc" + std::to_string(i) + ".", linears_[i].parameters());
  for (size_t i = 0; i < convs_.size(); ++i) append_params(p, "conv" + std::to_string(i) + ".", convs_[i].parameters());
  return p;
}

Head Head::clone() const {
  Head h;
  h.spec_ = spec_;
  for (const auto& l : linears_) h.linears_.push_back(l.clone());
  for (const auto& c : convs_) h.convs_.push_back(c.clone());
  return h;
}

}  // namespace multissl::nn
