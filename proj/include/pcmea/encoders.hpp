#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcmea/autodiff.hpp"
#include "pcmea/featurizers.hpp"
#include "pcmea/kg.hpp"
#include "pcmea/params.hpp"

namespace pcmea {

/// The six uni-modal channels, in fusion order.
enum class Modality : std::uint8_t { Structure, RelBow, RelText, AttrBow, AttrText, Visual };
inline constexpr std::size_t kNumModalities = 6;
inline constexpr std::array<Modality, kNumModalities> kAllModalities = {
    Modality::Structure, Modality::RelBow,   Modality::RelText,
    Modality::AttrBow,   Modality::AttrText, Modality::Visual};

/// Short stable name: g, r_bow, r_plm, a_bow, a_plm, v.
const char* modality_name(Modality m);

struct EncoderConfig {
  Eigen::Index modal_dim = 100;
  Eigen::Index segments = 4;
  Eigen::Index attention_heads = 2;
  Eigen::Index adaptor_bottleneck = 32;
  double adaptor_scale = 0.1;
  Eigen::Index gat_heads = 1;
  double gat_slope = 0.2;
  double gat_init_std = 0.02;

  /// Throws ConfigError on indivisible dims or a bottleneck not below modal_dim.
  void validate() const;
  Eigen::Index token_dim() const { return modal_dim / segments; }
};

/// Data-dependent sizes the parameter shapes are derived from.
struct ModelShape {
  Eigen::Index source_entities = 0;
  Eigen::Index target_entities = 0;
  Eigen::Index bow_rel_dim = 0;
  Eigen::Index bow_attr_dim = 0;
  Eigen::Index text_rel_dim = 0;
  Eigen::Index text_attr_dim = 0;
  Eigen::Index visual_dim = 0;

  static ModelShape from_features(const ModalFeatureBundle& source, const ModalFeatureBundle& target);
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Unit-norm embeddings of every entity of one graph.
struct EmbeddingSet {
  std::array<Matrix, kNumModalities> modal;
  Matrix joint;

  const Matrix& operator[](Modality m) const { return modal[static_cast<std::size_t>(m)]; }
};

/// Tape-level counterpart of EmbeddingSet.
struct EncodedSide {
  std::array<ad::Var, kNumModalities> modal;
  ad::Var joint;

  ad::Var operator[](Modality m) const { return modal[static_cast<std::size_t>(m)]; }
};

// ---------------------------------------------------------------------------
// Building blocks. Each takes tape variables so tests can drive them with
// hand-set weights.

struct GatHeadVars {
  ad::Var weight;   // d_in x d_out
  ad::Var att_src;  // d_out x 1
  ad::Var att_dst;  // d_out x 1
};

/// ELU(mean over heads of neighbor attention over x * W).
ad::Var gat_layer(ad::Var x, std::span<const GatHeadVars> heads, const Adjacency& adj, double slope);

/// Two stacked GAT layers followed by the affine map `out * proj_weight + proj_bias`.
ad::Var gat_forward(ad::Var x, std::span<const GatHeadVars> layer1, std::span<const GatHeadVars> layer2,
                    ad::Var proj_weight, ad::Var proj_bias, const Adjacency& adj, double slope);

struct AttentionVars {
  ad::Var query;   // token_dim x heads*token_dim
  ad::Var key;     // token_dim x heads*token_dim
  ad::Var value;   // token_dim x heads*token_dim
  ad::Var output;  // heads*token_dim x token_dim
};

/// Multi-head attention where each entity vector is cut into `segments`
/// tokens. Queries come from `query_source`, keys and values from
/// `kv_source`. Returns the re-flattened n x d output projection.
ad::Var segment_attention(ad::Var query_source, ad::Var kv_source, const AttentionVars& w,
                          Eigen::Index segments, Eigen::Index heads);

struct AdaptorVars {
  ad::Var down;       // d x b
  ad::Var down_bias;  // 1 x b
  ad::Var up;         // b x d
  ad::Var up_bias;    // 1 x d
  double scale = 0.1;
};

/// normalize(y + scale * Adaptor(y)) with y = self-attention over segment tokens.
ad::Var asm_forward(ad::Var h_inter, const AttentionVars& attention, const AdaptorVars& adaptor,
                    Eigen::Index segments, Eigen::Index heads);

/// normalize(h_bow + attention(query = h_plm tokens, key/value = h_bow tokens)).
ad::Var cam_forward(ad::Var h_bow, ad::Var h_plm, const AttentionVars& w, Eigen::Index segments,
                    Eigen::Index heads);

/// normalize(x * W + b).
ad::Var project_modality(ad::Var x, ad::Var weight, ad::Var bias);

/// normalize(concat_m softmax(alpha)_m * h^m). `alpha` is 1 x 6.
ad::Var fuse_joint(std::span<const ad::Var> modal, ad::Var alpha);

/// softmax(alpha) as plain values.
Vector fusion_weights(const Matrix& alpha);

// ---------------------------------------------------------------------------

/// The full multi-modal encoder. Parameters are shared by both graphs except
/// the free per-entity structure embeddings.
class Encoder {
 public:
  Encoder(EncoderConfig config, ModelShape shape);

  ParameterStore init_parameters(std::uint64_t seed) const;

  /// Records the forward pass of every entity of one graph on the tape.
  EncodedSide encode(const BoundParameters& params, GraphSide side, const ModalFeatureBundle& features,
                     const Adjacency& adj) const;

  /// Value-only forward pass.
  EmbeddingSet embed(const ParameterStore& params, GraphSide side, const ModalFeatureBundle& features,
                     const Adjacency& adj) const;

  const EncoderConfig& config() const { return config_; }
  const ModelShape& shape() const { return shape_; }

  /// Dimension of the joint embedding (six modal blocks).
  Eigen::Index joint_dim() const { return config_.modal_dim * static_cast<Eigen::Index>(kNumModalities); }

 private:
  std::vector<GatHeadVars> gat_heads(const BoundParameters& p, int layer) const;
  AttentionVars attention_vars(const BoundParameters& p, const std::string& prefix) const;

  EncoderConfig config_;
  ModelShape shape_;
};

/// Name of the free structure embedding table of a graph.
std::string structure_embedding_name(GraphSide side);

}  // namespace pcmea
