#include "sso/nn/model.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "sso/perm.hpp"
#include "sso/rng.hpp"

namespace sso::nn {

void ModelConfig::validate() const {
  if (k < 2) throw RangeError("ModelConfig: k must be >= 2");
  if (segments_per_shot < 1) throw RangeError("ModelConfig: segments_per_shot must be >= 1");
  if (frame_height < 1 || frame_width < 1 || channels < 1) {
    throw RangeError("ModelConfig: frame extents must be positive");
  }
  if (patch_size < 1 || frame_height % patch_size != 0 || frame_width % patch_size != 0) {
    throw DimensionError("ModelConfig: patch_size must divide frame dimensions");
  }
  if (embed_dim < 1 || num_heads < 1 || embed_dim % num_heads != 0) {
    throw DimensionError("ModelConfig: embed_dim must be divisible by num_heads");
  }
  if (num_layers < 0) throw RangeError("ModelConfig: num_layers must be >= 0");
  if (mlp_hidden() < 1) throw RangeError("ModelConfig: mlp_ratio too small");
  for (int c : category_cardinalities) {
    if (c < 1) throw RangeError("ModelConfig: category cardinalities must be >= 1");
  }
  if (num_genres < 1) throw RangeError("ModelConfig: num_genres must be >= 1");
}

int ModelConfig::num_classes() const { return static_cast<int>(perm::factorial(k)); }

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["segments_per_shot"] = segments_per_shot;
  j["frame_height"] = frame_height;
  j["frame_width"] = frame_width;
  j["channels"] = channels;
  j["patch_size"] = patch_size;
  j["embed_dim"] = embed_dim;
  j["num_heads"] = num_heads;
  j["num_layers"] = num_layers;
  j["mlp_ratio"] = mlp_ratio;
  j["category_cardinalities"] = category_cardinalities;
  j["num_genres"] = num_genres;
  j["use_cinematology"] = use_cinematology;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.k = j.at("k").get<int>();
  c.segments_per_shot = j.at("segments_per_shot").get<int>();
  c.frame_height = j.at("frame_height").get<int>();
  c.frame_width = j.at("frame_width").get<int>();
  c.channels = j.at("channels").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<double>();
  c.category_cardinalities = j.at("category_cardinalities").get<std::array<int, kNumCategories>>();
  c.num_genres = j.at("num_genres").get<int>();
  c.use_cinematology = j.at("use_cinematology").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void CinematologyInput::validate(const ModelConfig& config) const {
  if (static_cast<int>(shot_vectors.size()) != config.k) {
    throw DimensionError("CinematologyInput: expected one vector set per shot");
  }
  for (const auto& shot : shot_vectors) {
    for (int c = 0; c < kNumCategories; ++c) {
      const auto& vec = shot[static_cast<std::size_t>(c)];
      if (static_cast<int>(vec.size()) !=
          config.category_cardinalities[static_cast<std::size_t>(c)]) {
        throw DimensionError("CinematologyInput: category vector cardinality mismatch");
      }
      double sum = 0.0;
      for (double v : vec) sum += v;
      if (std::abs(sum - 1.0) > 1e-6) {
        throw RangeError("CinematologyInput: category vector must sum to 1");
      }
    }
  }
  if (static_cast<int>(genre_vector.size()) != config.num_genres) {
    throw DimensionError("CinematologyInput: genre vector size mismatch");
  }
  double gsum = 0.0;
  for (double v : genre_vector) gsum += v;
  if (std::abs(gsum - 1.0) > 1e-6) throw RangeError("CinematologyInput: genre vector must sum to 1");
}

CinematologyInput CinematologyInput::uniform(const ModelConfig& config) {
  CinematologyInput in;
  in.shot_vectors.resize(static_cast<std::size_t>(config.k));
  for (auto& shot : in.shot_vectors) {
    for (int c = 0; c < kNumCategories; ++c) {
      const int card = config.category_cardinalities[static_cast<std::size_t>(c)];
      shot[static_cast<std::size_t>(c)].assign(static_cast<std::size_t>(card), 1.0 / card);
    }
  }
  in.genre_vector.assign(static_cast<std::size_t>(config.num_genres), 1.0 / config.num_genres);
  return in;
}

DenseArray extract_patches(const DenseArray& frames, const ModelConfig& config) {
  const int batch = frames.dim(0);
  const int nframes = config.frames_per_sample();
  const int H = config.frame_height;
  const int W = config.frame_width;
  const int C = config.channels;
  if (frames.ndim() != 5 || frames.dim(1) != nframes || frames.dim(2) != H ||
      frames.dim(3) != W || frames.dim(4) != C) {
    throw DimensionError("extract_patches: frames shape does not match config");
  }
  const int ps = config.patch_size;
  const int grid_w = W / ps;
  const int ppf = config.patches_per_frame();
  const int pdim = config.patch_dim();
  DenseArray out({batch * nframes * ppf, pdim});
  const double* src = frames.data();
  for (int b = 0; b < batch; ++b) {
    for (int f = 0; f < nframes; ++f) {
      const std::size_t frame_off =
          (static_cast<std::size_t>(b) * nframes + f) * H * W * C;
      for (int p = 0; p < ppf; ++p) {
        const int py = p / grid_w;
        const int px = p % grid_w;
        double* dst =
            out.data() +
            ((static_cast<std::size_t>(b) * nframes + f) * ppf + p) * pdim;
        int idx = 0;
        for (int y = 0; y < ps; ++y) {
          const std::size_t row_off =
              frame_off + (static_cast<std::size_t>(py * ps + y) * W + px * ps) * C;
          for (int x = 0; x < ps * C; ++x) dst[idx++] = src[row_off + x];
        }
      }
    }
  }
  return out;
}

int OrderTransformer::add_param(const std::string& name, std::vector<int> shape) {
  params_.push_back(Parameter{name, DenseArray(std::move(shape))});
  return static_cast<int>(params_.size()) - 1;
}

OrderTransformer::OrderTransformer(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.embed_dim;
  patch_w_ = add_param("patch_proj_w", {config_.patch_dim(), d});
  patch_b_ = add_param("patch_proj_b", {d});
  class_token_ = add_param("class_token", {1, d});
  pos_embed_ = add_param("pos_embed", {config_.tokens_per_sample(), d});
  if (config_.use_cinematology) {
    for (int c = 0; c < kNumCategories; ++c) {
      cine_w_[static_cast<std::size_t>(c)] =
          add_param("cine_proj_w" + std::to_string(c), {config_.cine_input_width(c), d});
      cine_b_[static_cast<std::size_t>(c)] =
          add_param("cine_proj_b" + std::to_string(c), {d});
    }
  }
  const int hidden = config_.mlp_hidden();
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    layer_slots_.push_back(add_param(p + "ln1_g", {d}));
    layer_slots_.push_back(add_param(p + "ln1_b", {d}));
    layer_slots_.push_back(add_param(p + "attn_q_w", {d, d}));
    layer_slots_.push_back(add_param(p + "attn_q_b", {d}));
    layer_slots_.push_back(add_param(p + "attn_k_w", {d, d}));
    layer_slots_.push_back(add_param(p + "attn_k_b", {d}));
    layer_slots_.push_back(add_param(p + "attn_v_w", {d, d}));
    layer_slots_.push_back(add_param(p + "attn_v_b", {d}));
    layer_slots_.push_back(add_param(p + "attn_out_w", {d, d}));
    layer_slots_.push_back(add_param(p + "attn_out_b", {d}));
    layer_slots_.push_back(add_param(p + "ln2_g", {d}));
    layer_slots_.push_back(add_param(p + "ln2_b", {d}));
    layer_slots_.push_back(add_param(p + "mlp_in_w", {d, hidden}));
    layer_slots_.push_back(add_param(p + "mlp_in_b", {hidden}));
    layer_slots_.push_back(add_param(p + "mlp_out_w", {hidden, d}));
    layer_slots_.push_back(add_param(p + "mlp_out_b", {d}));
  }
  final_ln_g_ = add_param("final_ln_g", {d});
  final_ln_b_ = add_param("final_ln_b", {d});
  head_w_ = add_param("head_w", {d, config_.num_classes()});
  head_b_ = add_param("head_b", {config_.num_classes()});
  init_weights();
}

void OrderTransformer::init_weights() {
  Rng rng(seed_mix(config_.seed, 0x6d6f64656cULL));
  for (Parameter& p : params_) {
    const bool is_gamma = p.name.ends_with("ln1_g") || p.name.ends_with("ln2_g") ||
                          p.name == "final_ln_g";
    if (is_gamma) {
      p.value.fill(1.0);
    } else if (p.value.ndim() == 2) {
      for (std::int64_t i = 0; i < p.value.size(); ++i) {
        p.value.data()[i] = rng.truncated_normal(0.0, 0.02);
      }
    }
    // 1-d biases and LN betas stay zero.
  }
}

std::int64_t OrderTransformer::num_parameters() const {
  std::int64_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

std::vector<DenseArray> OrderTransformer::zero_like_parameters() const {
  std::vector<DenseArray> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.emplace_back(p.value.shape());
  return out;
}

Tape::NodeId OrderTransformer::build_graph(Tape& tape, const ModelBatch& batch,
                                           std::vector<DenseArray>* attention_capture) const {
  const int B = batch.batch_size();
  if (B < 1) throw DimensionError("OrderTransformer: batch must contain at least one sample");
  if (config_.use_cinematology && static_cast<int>(batch.cine.size()) != B) {
    throw DimensionError("OrderTransformer: cinematology inputs required for every sample");
  }

  auto leaf = [&](int slot) { return tape.param(&params_[static_cast<std::size_t>(slot)].value, slot); };

  const Tape::NodeId patches_in = tape.input_owned(extract_patches(batch.frames, config_));
  const Tape::NodeId vis = tape.linear(patches_in, leaf(patch_w_), leaf(patch_b_));

  std::vector<Tape::NodeId> cine_nodes;
  if (config_.use_cinematology) {
    for (int c = 0; c < kNumCategories; ++c) {
      const int width = config_.cine_input_width(c);
      const int card = config_.category_cardinalities[static_cast<std::size_t>(c)];
      DenseArray xc({B, width});
      for (int b = 0; b < B; ++b) {
        const CinematologyInput& ci = batch.cine[static_cast<std::size_t>(b)];
        if (static_cast<int>(ci.shot_vectors.size()) != config_.k ||
            static_cast<int>(ci.genre_vector.size()) != config_.num_genres) {
          throw DimensionError("OrderTransformer: cinematology input shape mismatch");
        }
        double* row = xc.data() + static_cast<std::size_t>(b) * width;
        int off = 0;
        for (int s = 0; s < config_.k; ++s) {
          const auto& vec = ci.shot_vectors[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)];
          if (static_cast<int>(vec.size()) != card) {
            throw DimensionError("OrderTransformer: category cardinality mismatch with config");
          }
          for (double v : vec) row[off++] = v;
        }
        for (double v : ci.genre_vector) row[off++] = v;
      }
      cine_nodes.push_back(
          tape.linear(tape.input_owned(std::move(xc)), leaf(cine_w_[static_cast<std::size_t>(c)]),
                      leaf(cine_b_[static_cast<std::size_t>(c)])));
    }
  }

  Tape::NodeId x = tape.assemble_tokens(leaf(class_token_), vis, cine_nodes, leaf(pos_embed_), B);

  const int T = config_.tokens_per_sample();
  if (attention_capture) attention_capture->resize(static_cast<std::size_t>(config_.num_layers));
  for (int l = 0; l < config_.num_layers; ++l) {
    const int* s = layer_slots_.data() + static_cast<std::size_t>(l) * 16;
    const Tape::NodeId normed = tape.layer_norm(x, leaf(s[0]), leaf(s[1]));
    const Tape::NodeId q = tape.linear(normed, leaf(s[2]), leaf(s[3]));
    const Tape::NodeId k = tape.linear(normed, leaf(s[4]), leaf(s[5]));
    const Tape::NodeId v = tape.linear(normed, leaf(s[6]), leaf(s[7]));
    DenseArray* cap = attention_capture ? &(*attention_capture)[static_cast<std::size_t>(l)] : nullptr;
    const Tape::NodeId att = tape.attention(q, k, v, B, T, config_.num_heads, cap);
    const Tape::NodeId att_out = tape.linear(att, leaf(s[8]), leaf(s[9]));
    x = tape.add(x, att_out);
    const Tape::NodeId normed2 = tape.layer_norm(x, leaf(s[10]), leaf(s[11]));
    const Tape::NodeId h1 = tape.gelu(tape.linear(normed2, leaf(s[12]), leaf(s[13])));
    const Tape::NodeId mlp_out = tape.linear(h1, leaf(s[14]), leaf(s[15]));
    x = tape.add(x, mlp_out);
  }

  const Tape::NodeId final_norm = tape.layer_norm(x, leaf(final_ln_g_), leaf(final_ln_b_));
  const Tape::NodeId cls = tape.select_first_token(final_norm, B, T);
  const Tape::NodeId logits = tape.linear(cls, leaf(head_w_), leaf(head_b_));

  for (std::int64_t i = 0; i < tape.value(logits).size(); ++i) {
    if (!std::isfinite(tape.value(logits).data()[i])) {
      throw NumericError("OrderTransformer: non-finite logits at output head");
    }
  }
  return logits;
}

DenseArray OrderTransformer::forward(const ModelBatch& batch,
                                     std::vector<DenseArray>* attention_capture) const {
  Tape tape;
  const Tape::NodeId logits = build_graph(tape, batch, attention_capture);
  return tape.value(logits);
}

}  // namespace sso::nn
