#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sso/nn/tape.hpp"
#include "sso/nn/tensor.hpp"

namespace sso::nn {

inline constexpr int kNumCategories = 4;  // shot size, angle, motion, type

struct ModelConfig {
  int k = 3;
  int segments_per_shot = 8;
  int frame_height = 32;
  int frame_width = 32;
  int channels = 1;
  int patch_size = 8;
  int embed_dim = 64;
  int num_heads = 4;
  int num_layers = 2;
  double mlp_ratio = 2.0;
  std::array<int, kNumCategories> category_cardinalities{5, 4, 4, 6};
  int num_genres = 10;
  bool use_cinematology = true;
  std::uint64_t seed = 0;

  void validate() const;

  int patches_per_frame() const {
    return (frame_height / patch_size) * (frame_width / patch_size);
  }
  int frames_per_sample() const { return k * segments_per_shot; }
  int num_visual_tokens() const { return frames_per_sample() * patches_per_frame(); }
  int num_cine_tokens() const { return use_cinematology ? kNumCategories : 0; }
  int tokens_per_sample() const { return 1 + num_visual_tokens() + num_cine_tokens(); }
  int num_classes() const;
  int patch_dim() const { return patch_size * patch_size * channels; }
  int mlp_hidden() const { return static_cast<int>(embed_dim * mlp_ratio); }
  // Width of the concatenated input for one cinematology token.
  int cine_input_width(int category) const {
    return k * category_cardinalities[static_cast<std::size_t>(category)] + num_genres;
  }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig& other) const = default;
};

// Per-shot probability vectors over the four categories (presentation order)
// plus a normalized genre vector.
struct CinematologyInput {
  std::vector<std::array<std::vector<double>, kNumCategories>> shot_vectors;
  std::vector<double> genre_vector;

  // Cardinalities and sum-to-one (within 1e-6) checks; loaders call this,
  // the forward path accepts any finite values.
  void validate(const ModelConfig& config) const;

  static CinematologyInput uniform(const ModelConfig& config);
};

struct ModelBatch {
  DenseArray frames;  // {batch, k*segments, H, W, C}
  std::vector<CinematologyInput> cine;  // one per sample, or empty
  std::vector<int> truths;              // may be empty for pure inference

  int batch_size() const { return frames.ndim() ? frames.dim(0) : 0; }
};

struct Parameter {
  std::string name;
  DenseArray value;
};

// Pre-norm transformer encoder over [class | visual patches | cinematology]
// tokens with a classification head on the class token.
class OrderTransformer {
 public:
  explicit OrderTransformer(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::int64_t num_parameters() const;

  std::vector<DenseArray> zero_like_parameters() const;

  // Builds the differentiable graph for a batch; returns the logits node
  // (batch x k!). The batch (frames, cine) must outlive the tape.
  // attention_capture, when non-null, receives one
  // {batch*heads*tokens, tokens} array per layer.
  Tape::NodeId build_graph(Tape& tape, const ModelBatch& batch,
                           std::vector<DenseArray>* attention_capture = nullptr) const;

  // Convenience forward pass; returns logits by value.
  DenseArray forward(const ModelBatch& batch,
                     std::vector<DenseArray>* attention_capture = nullptr) const;

 private:
  struct Slots;

  int add_param(const std::string& name, std::vector<int> shape);
  void init_weights();

  ModelConfig config_;
  std::vector<Parameter> params_;
  // Named slot indices resolved once at construction.
  std::vector<int> layer_slots_;  // 16 per layer
  int patch_w_, patch_b_, class_token_, pos_embed_;
  std::array<int, kNumCategories> cine_w_{}, cine_b_{};
  int final_ln_g_, final_ln_b_, head_w_, head_b_;
};

// Extracts non-overlapping patches: {batch*frames*patches_per_frame, patch_dim}.
DenseArray extract_patches(const DenseArray& frames, const ModelConfig& config);

}  // namespace sso::nn
