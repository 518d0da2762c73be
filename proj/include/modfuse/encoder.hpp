#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modfuse/autodiff.hpp"
#include "modfuse/corpus.hpp"
#include "modfuse/features.hpp"

namespace modfuse {

// Perceiver-style token classifier: per-modality input projection plus a
// learned type embedding, a latent array reading the token sequence through
// masked cross-attention, `depth` blocks of latent self-attention and
// feed-forward (pre-norm, residual), mean-pooled latents, scalar head.
struct ModelConfig {
    int depth = 2;
    int n_latents = 32;
    int latent_dim = 128;
    int cross_heads = 1;
    int self_heads = 8;
    int self_head_dim = 32;
    int ff_mult = 4;  // feed-forward hidden = ff_mult * latent_dim
    std::map<Modality, int> input_dims;
    std::optional<int> max_tokens;

    bool operator==(const ModelConfig&) const = default;
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

struct NamedTensor {
    std::string name;
    ad::Mat value;
};

struct EncoderParams {
    ModelConfig config;
    std::vector<NamedTensor> tensors;

    const ad::Mat& find(const std::string& name) const;
};

// One modality's token rows for a single clip. An empty `valid` vector means
// every row is live; padded rows are flagged false and contribute nothing.
struct ModalityInput {
    Modality modality;
    ad::Mat tokens;
    std::vector<bool> valid;
};

// Weight matrices use uniform init with bound sqrt(6 / (fan_in + fan_out));
// latents and type embeddings are 0.02-scaled normal draws; layer norm is
// identity; head bias zero. Deterministic in (config, seed).
EncoderParams init_encoder(const ModelConfig& config, std::uint64_t seed);

std::int64_t param_count(const EncoderParams& params);

// Parameter leaves pushed onto a tape, aligned with EncoderParams::tensors.
struct ParamRefs {
    std::vector<ad::Ref> refs;
    std::map<std::string, ad::Ref> by_name;

    ad::Ref at(const std::string& name) const;
};

ParamRefs push_params(ad::Tape& tape, const EncoderParams& params);

// Builds the classifier graph for one clip and returns the 1x1 logit node.
// Shared by inference (fresh tape) and training (tape with shared leaves).
ad::Ref encode_on_tape(ad::Tape& tape, const ParamRefs& refs, const ModelConfig& config,
                       const std::vector<ModalityInput>& inputs);

double encode_classify(const EncoderParams& params, const std::vector<ModalityInput>& inputs);

double predict_proba(const EncoderParams& params, const std::vector<ModalityInput>& inputs);

// Gathers this model's input modalities for a clip from the feature store.
std::vector<ModalityInput> gather_inputs(const EncoderParams& params, const FeatureStore& store,
                                         const std::string& clip_id);

// Checkpoint layout: <dir>/index.json mapping tensor name to MTNS file,
// plus <dir>/config.json. Tensors are stored float32.
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& dir);
EncoderParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace modfuse
