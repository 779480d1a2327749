#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "multissl/nn/layers.hpp"

namespace multissl::nn {

enum class EncoderKind { kSound, kVisual, kFlow };
const char* encoder_kind_name(EncoderKind k);
EncoderKind parse_encoder_kind(const std::string& s);

/// Conv backbone description: stride-2 3x3 stages with SiLU, then a 1x1
/// projection to the embedding dimension. Input height and width of 0 accept
/// any spatial size.
struct EncoderConfig {
  EncoderKind kind = EncoderKind::kSound;
  int input_channels = 2;
  int input_height = 0;
  int input_width = 0;
  std::vector<int> channels{16, 32, 64, 128};
  int kernel = 3;
  int stride = 2;
  int embedding_dim = 128;
  bool emit_dense = true;

  void validate() const;
  /// Spatial size of the dense map for a given input size.
  std::pair<int, int> dense_size(int height, int width) const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

struct TrunkOutput {
  Var pooled;  ///< [N, d]
  Var dense;   ///< [N, d, H', W'], undefined when emit_dense is off
};

/// Anything that maps an input grid to an embedding. Every combiner strategy
/// produces one, and every downstream harness consumes one.
class Trunk {
 public:
  virtual ~Trunk() = default;
  virtual TrunkOutput forward(const Var& input) const = 0;
  virtual int embedding_dim() const = 0;
  virtual const EncoderConfig& config() const = 0;
  virtual NamedParams parameters() const = 0;
  virtual std::unique_ptr<Trunk> clone() const = 0;
  /// Architecture description sufficient for make_trunk().
  virtual nlohmann::json describe() const = 0;
};

/// Per-stage activations of a column, used as laterals by later columns.
struct ColumnActivations {
  std::vector<Var> stages;
  Var dense;
};

class ConvTrunk final : public Trunk {
 public:
  /// lateral_widths[s] is the number of extra input channels stage s receives
  /// from previous progressive columns; index stages() is the projection.
  /// Own weights are drawn from `rng` in the same order regardless of laterals;
  /// lateral weights come from a derived stream.
  ConvTrunk(EncoderConfig config, Rng& rng, std::vector<int> lateral_widths = {});

  TrunkOutput forward(const Var& input) const override;
  int embedding_dim() const override { return config_.embedding_dim; }
  const EncoderConfig& config() const override { return config_; }
  NamedParams parameters() const override;
  std::unique_ptr<Trunk> clone() const override;
  nlohmann::json describe() const override;

  /// Column forward with laterals from previous columns, each scaled by
  /// lateral_scale (0 masks them out).
  ColumnActivations run(const Var& input, const std::vector<const ColumnActivations*>& previous,
                        double lateral_scale = 1.0) const;

  int stages() const { return static_cast<int>(stages_.size()); }
  const std::vector<int>& lateral_widths() const { return lateral_widths_; }
  /// Input channels of stage s including laterals.
  int stage_input_width(int s) const;
  /// Zero the final projection.
  void zero_projection();

 private:
  ConvTrunk() = default;
  void check_input(const Var& input) const;

  EncoderConfig config_;
  std::vector<Conv2d> stages_;
  Conv2d projection_;
  std::vector<int> lateral_widths_;
  std::vector<Var> lateral_weights_;  // undefined where width is 0
};

/// Frozen concatenation of K trunks: [f_1, ..., f_K].
class ConcatTrunk final : public Trunk {
 public:
  explicit ConcatTrunk(std::vector<std::unique_ptr<Trunk>> members);

  TrunkOutput forward(const Var& input) const override;
  int embedding_dim() const override;
  const EncoderConfig& config() const override { return members_.front()->config(); }
  NamedParams parameters() const override;
  std::unique_ptr<Trunk> clone() const override;
  nlohmann::json describe() const override;

  const Trunk& member(size_t k) const { return *members_.at(k); }
  size_t size() const { return members_.size(); }

 private:
  std::vector<std::unique_ptr<Trunk>> members_;
};

/// Progressive columns; all but the last are frozen. The output is the last
/// column's embedding, computed with laterals from every earlier column.
class ProgressiveTrunk final : public Trunk {
 public:
  explicit ProgressiveTrunk(std::vector<std::unique_ptr<ConvTrunk>> columns);

  TrunkOutput forward(const Var& input) const override;
  int embedding_dim() const override { return columns_.back()->embedding_dim(); }
  const EncoderConfig& config() const override { return columns_.front()->config(); }
  NamedParams parameters() const override;
  std::unique_ptr<Trunk> clone() const override;
  nlohmann::json describe() const override;

  size_t size() const { return columns_.size(); }
  const ConvTrunk& column(size_t k) const { return *columns_.at(k); }
  /// Forward with laterals scaled by lateral_scale.
  TrunkOutput forward_masked(const Var& input, double lateral_scale) const;
  /// Scale applied to laterals by forward(); 0 masks them out.
  void set_lateral_scale(double s) { lateral_scale_ = s; }
  double lateral_scale() const { return lateral_scale_; }

 private:
  std::vector<std::unique_ptr<ConvTrunk>> columns_;
  double lateral_scale_ = 1.0;
};

/// Lateral widths of progressive column `index` (0-based) for a config.
std::vector<int> progressive_lateral_widths(const EncoderConfig& config, int index);

/// Rebuilds a trunk from describe() output; parameter values are placeholders
/// until a checkpoint is loaded into them.
std::unique_ptr<Trunk> make_trunk(const nlohmann::json& description);

/// key = m * key + (1 - m) * query, elementwise over congruent parameter lists.
void momentum_update(const NamedParams& query, const NamedParams& key, double m);

}  // namespace multissl::nn
