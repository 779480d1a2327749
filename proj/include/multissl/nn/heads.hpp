#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "multissl/nn/layers.hpp"

namespace multissl::nn {

enum class HeadKind {
  kRotationClassifier,
  kGapRegressor,
  kProjection,
  kDenseProjection,
  kSemanticDecoder,
  kS3rDecoder,
};
const char* head_kind_name(HeadKind k);
HeadKind parse_head_kind(const std::string& s);

inline constexpr int kGapHiddenSize = 64;

/// Layer widths of a head, input first. Vector heads are MLPs over [N, in];
/// map heads are stacks of 1x1 convolutions over [N, in, H, W].
struct HeadSpec {
  HeadKind kind = HeadKind::kProjection;
  std::vector<int> widths;

  void validate() const;
  bool is_map_head() const;

  static HeadSpec rotation_classifier(int input_dim, int hidden, int bins);
  static HeadSpec gap_regressor(int input_dim);
  static HeadSpec projection(int dim);
  static HeadSpec dense_projection(int dim);
  static HeadSpec semantic_decoder(int dim, int hidden, int outputs);
  static HeadSpec s3r_decoder(int dim, int hidden, int outputs);
};

void to_json(nlohmann::json& j, const HeadSpec& s);
void from_json(const nlohmann::json& j, HeadSpec& s);

/// Stack of linear layers (or 1x1 convolutions for map heads) with SiLU
/// between them and no activation after the last one.
class Head {
 public:
  Head() = default;
  Head(HeadSpec spec, Rng& rng);

  Var operator()(const Var& x) const;
  const HeadSpec& spec() const { return spec_; }
  NamedParams parameters() const;
  Head clone() const;
  int output_dim() const { return spec_.widths.back(); }

 private:
  HeadSpec spec_;
  std::vector<Linear> linears_;
  std::vector<Conv2d> convs_;
};

}  // namespace multissl::nn
