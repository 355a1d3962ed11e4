#include "pcmea/encoders.hpp"

#include <cmath>

#include "pcmea/error.hpp"

namespace pcmea {

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Structure: return "g";
    case Modality::RelBow: return "r_bow";
    case Modality::RelText: return "r_plm";
    case Modality::AttrBow: return "a_bow";
    case Modality::AttrText: return "a_plm";
    case Modality::Visual: return "v";
  }
  return "?";
}

void EncoderConfig::validate() const {
  if (modal_dim < 1 || segments < 1 || attention_heads < 1 || gat_heads < 1) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (modal_dim % segments != 0) throw ConfigError("modal_dim must be divisible by segments");
  if (modal_dim % attention_heads != 0) throw ConfigError("modal_dim must be divisible by attention_heads");
  if (adaptor_bottleneck < 1 || adaptor_bottleneck >= modal_dim) {
    throw ConfigError("adaptor_bottleneck must lie in [1, modal_dim)");
  }
}

ModelShape ModelShape::from_features(const ModalFeatureBundle& source, const ModalFeatureBundle& target) {
  if (source.bow_rel.cols() != target.bow_rel.cols() || source.bow_attr.cols() != target.bow_attr.cols() ||
      source.text_rel.cols() != target.text_rel.cols() ||
      source.text_attr.cols() != target.text_attr.cols() || source.visual.cols() != target.visual.cols()) {
    throw FormatError("source and target feature dimensions differ");
  }
  return ModelShape{source.visual.rows(),  target.visual.rows(),   source.bow_rel.cols(),
                    source.bow_attr.cols(), source.text_rel.cols(), source.text_attr.cols(),
                    source.visual.cols()};
}

std::string structure_embedding_name(GraphSide side) {
  return side == GraphSide::Source ? "gat.embedding.source" : "gat.embedding.target";
}

// ---------------------------------------------------------------------------

ad::Var gat_layer(ad::Var x, std::span<const GatHeadVars> heads, const Adjacency& adj, double slope) {
  if (heads.empty()) throw ConfigError("GAT layer needs at least one head");
  ad::Var acc{};
  for (const auto& h : heads) {
    const auto wh = ad::matmul(x, h.weight);
    const auto src = ad::matmul(wh, h.att_src);
    const auto dst = ad::matmul(wh, h.att_dst);
    const auto out = ad::neighbor_attention(wh, src, dst, adj, slope);
    acc = acc.tape == nullptr ? out : ad::add(acc, out);
  }
  if (heads.size() > 1) acc = ad::scale(acc, 1.0 / static_cast<double>(heads.size()));
  return ad::elu(acc);
}

ad::Var gat_forward(ad::Var x, std::span<const GatHeadVars> layer1, std::span<const GatHeadVars> layer2,
                    ad::Var proj_weight, ad::Var proj_bias, const Adjacency& adj, double slope) {
  const auto h1 = gat_layer(x, layer1, adj, slope);
  const auto h2 = gat_layer(h1, layer2, adj, slope);
  return ad::add_row(ad::matmul(h2, proj_weight), proj_bias);
}

ad::Var segment_attention(ad::Var query_source, ad::Var kv_source, const AttentionVars& w,
                          Eigen::Index segments, Eigen::Index heads) {
  const auto n = query_source.rows();
  const auto d = query_source.cols();
  if (kv_source.rows() != n || kv_source.cols() != d) {
    throw FormatError("attention query and key/value sources differ in shape");
  }
  if (d % segments != 0) throw ConfigError("embedding dim not divisible by segment count");
  const auto dt = d / segments;
  const auto q_tokens = ad::reshape(query_source, n * segments, dt);
  const auto kv_tokens = query_source.id == kv_source.id ? q_tokens : ad::reshape(kv_source, n * segments, dt);
  const auto q = ad::matmul(q_tokens, w.query);
  const auto k = ad::matmul(kv_tokens, w.key);
  const auto v = ad::matmul(kv_tokens, w.value);
  const auto mixed = ad::grouped_attention(q, k, v, segments, heads);
  return ad::reshape(ad::matmul(mixed, w.output), n, d);
}

ad::Var asm_forward(ad::Var h_inter, const AttentionVars& attention, const AdaptorVars& adaptor,
                    Eigen::Index segments, Eigen::Index heads) {
  const auto y = segment_attention(h_inter, h_inter, attention, segments, heads);
  const auto hidden = ad::gelu(ad::add_row(ad::matmul(y, adaptor.down), adaptor.down_bias));
  const auto adapt = ad::add_row(ad::matmul(hidden, adaptor.up), adaptor.up_bias);
  return ad::row_normalize(ad::add(y, ad::scale(adapt, adaptor.scale)));
}

ad::Var cam_forward(ad::Var h_bow, ad::Var h_plm, const AttentionVars& w, Eigen::Index segments,
                    Eigen::Index heads) {
  const auto attended = segment_attention(h_plm, h_bow, w, segments, heads);
  return ad::row_normalize(ad::add(h_bow, attended));
}

ad::Var project_modality(ad::Var x, ad::Var weight, ad::Var bias) {
  if (x.cols() != weight.rows()) {
    throw FormatError("modality input has dim " + std::to_string(x.cols()) + ", projection expects " +
                      std::to_string(weight.rows()));
  }
  return ad::row_normalize(ad::add_row(ad::matmul(x, weight), bias));
}

ad::Var fuse_joint(std::span<const ad::Var> modal, ad::Var alpha) {
  if (modal.size() != kNumModalities) throw ConfigError("joint fusion needs all six modalities");
  if (alpha.rows() != 1 || alpha.cols() != static_cast<Eigen::Index>(kNumModalities)) {
    throw ConfigError("fusion weights must be 1 x 6");
  }
  const auto rows = modal.front().rows();
  for (const auto& m : modal) {
    if (m.rows() != rows) throw FormatError("modal embeddings differ in entity count");
  }
  const auto weights = ad::row_softmax(alpha);
  std::vector<ad::Var> blocks;
  blocks.reserve(modal.size());
  for (std::size_t m = 0; m < modal.size(); ++m) {
    blocks.push_back(ad::mul_scalar(modal[m], ad::entry(weights, 0, static_cast<Eigen::Index>(m))));
  }
  return ad::row_normalize(ad::concat_cols(blocks));
}

Vector fusion_weights(const Matrix& alpha) {
  Vector w = alpha.row(0).transpose();
  w = (w.array() - w.maxCoeff()).exp();
  return w / w.sum();
}

// ---------------------------------------------------------------------------

Encoder::Encoder(EncoderConfig config, ModelShape shape) : config_(config), shape_(shape) {
  config_.validate();
}

ParameterStore Encoder::init_parameters(std::uint64_t seed) const {
  Rng rng(seed);
  const auto d = config_.modal_dim;
  const auto dt = config_.token_dim();
  const auto h = config_.attention_heads;
  const auto b = config_.adaptor_bottleneck;
  ParameterStore p(StoreRole::Online);

  p.add(structure_embedding_name(GraphSide::Source),
        normal_matrix(rng, shape_.source_entities, d, config_.gat_init_std));
  p.add(structure_embedding_name(GraphSide::Target),
        normal_matrix(rng, shape_.target_entities, d, config_.gat_init_std));
  for (int layer = 1; layer <= 2; ++layer) {
    for (Eigen::Index k = 0; k < config_.gat_heads; ++k) {
      const auto prefix = "gat.l" + std::to_string(layer) + ".h" + std::to_string(k);
      p.add(prefix + ".weight", glorot_uniform(rng, d, d));
      p.add(prefix + ".att_src", glorot_uniform(rng, d, 1));
      p.add(prefix + ".att_dst", glorot_uniform(rng, d, 1));
    }
  }
  p.add("structure.weight", glorot_uniform(rng, d, d));
  p.add("structure.bias", Matrix::Zero(1, d));

  auto add_attention = [&](const std::string& prefix) {
    p.add(prefix + ".query", glorot_uniform(rng, dt, h * dt));
    p.add(prefix + ".key", glorot_uniform(rng, dt, h * dt));
    p.add(prefix + ".value", glorot_uniform(rng, dt, h * dt));
    p.add(prefix + ".output", glorot_uniform(rng, h * dt, dt));
  };
  add_attention("asm");
  p.add("asm.adaptor.down", glorot_uniform(rng, d, b));
  p.add("asm.adaptor.down_bias", Matrix::Zero(1, b));
  p.add("asm.adaptor.up", glorot_uniform(rng, b, d));
  p.add("asm.adaptor.up_bias", Matrix::Zero(1, d));

  auto add_projection = [&](const std::string& prefix, Eigen::Index in) {
    p.add(prefix + ".weight", glorot_uniform(rng, in, d));
    p.add(prefix + ".bias", Matrix::Zero(1, d));
  };
  add_projection("rel_bow", shape_.bow_rel_dim);
  add_projection("rel_text", shape_.text_rel_dim);
  add_projection("attr_bow", shape_.bow_attr_dim);
  add_projection("attr_text", shape_.text_attr_dim);
  add_projection("visual", shape_.visual_dim);
  add_attention("rel_cam");
  add_attention("attr_cam");

  p.add("fusion.alpha", Matrix::Zero(1, static_cast<Eigen::Index>(kNumModalities)));
  return p;
}

std::vector<GatHeadVars> Encoder::gat_heads(const BoundParameters& p, int layer) const {
  std::vector<GatHeadVars> heads;
  for (Eigen::Index k = 0; k < config_.gat_heads; ++k) {
    const auto prefix = "gat.l" + std::to_string(layer) + ".h" + std::to_string(k);
    heads.push_back({p[prefix + ".weight"], p[prefix + ".att_src"], p[prefix + ".att_dst"]});
  }
  return heads;
}

AttentionVars Encoder::attention_vars(const BoundParameters& p, const std::string& prefix) const {
  return {p[prefix + ".query"], p[prefix + ".key"], p[prefix + ".value"], p[prefix + ".output"]};
}

EncodedSide Encoder::encode(const BoundParameters& p, GraphSide side, const ModalFeatureBundle& features,
                            const Adjacency& adj) const {
  const auto n = side == GraphSide::Source ? shape_.source_entities : shape_.target_entities;
  features.validate(static_cast<std::size_t>(n));
  if (static_cast<Eigen::Index>(adj.num_nodes()) != n) throw FormatError("adjacency size differs from graph");
  auto& tape = *p[structure_embedding_name(side)].tape;
  const auto segments = config_.segments;
  const auto heads = config_.attention_heads;

  EncodedSide out;
  const auto l1 = gat_heads(p, 1);
  const auto l2 = gat_heads(p, 2);
  const auto inter = gat_forward(p[structure_embedding_name(side)], l1, l2, p["structure.weight"],
                                 p["structure.bias"], adj, config_.gat_slope);
  const AdaptorVars adaptor{p["asm.adaptor.down"], p["asm.adaptor.down_bias"], p["asm.adaptor.up"],
                            p["asm.adaptor.up_bias"], config_.adaptor_scale};
  out.modal[0] = asm_forward(inter, attention_vars(p, "asm"), adaptor, segments, heads);

  auto project = [&](const Matrix& x, const std::string& prefix) {
    return project_modality(tape.constant(x), p[prefix + ".weight"], p[prefix + ".bias"]);
  };
  const auto rel_text = project(features.text_rel, "rel_text");
  const auto attr_text = project(features.text_attr, "attr_text");
  out.modal[1] = cam_forward(project(features.bow_rel, "rel_bow"), rel_text, attention_vars(p, "rel_cam"),
                             segments, heads);
  out.modal[2] = rel_text;
  out.modal[3] = cam_forward(project(features.bow_attr, "attr_bow"), attr_text,
                             attention_vars(p, "attr_cam"), segments, heads);
  out.modal[4] = attr_text;
  out.modal[5] = project(features.visual, "visual");
  out.joint = fuse_joint(out.modal, p["fusion.alpha"]);
  return out;
}

EmbeddingSet Encoder::embed(const ParameterStore& params, GraphSide side, const ModalFeatureBundle& features,
                            const Adjacency& adj) const {
  ad::Tape tape;
  BoundParameters bound(tape, params, false);
  const auto enc = encode(bound, side, features, adj);
  EmbeddingSet out;
  for (std::size_t m = 0; m < kNumModalities; ++m) out.modal[m] = enc.modal[m].value();
  out.joint = enc.joint.value();
  return out;
}

}  // namespace pcmea
