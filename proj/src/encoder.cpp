#include "modfuse/encoder.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "modfuse/errors.hpp"
#include "modfuse/rng.hpp"

namespace modfuse {

using ad::Mat;
using ad::Ref;
using ad::Tape;
using nlohmann::json;

namespace {

constexpr double kMaskBias = -1e30;  // additive score bias; softmax weight underflows to 0

Mat uniform_init(int rows, int cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(rows) + static_cast<double>(cols)));
    Mat m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            m(r, c) = bound * (2.0 * rng.next_double() - 1.0);
        }
    }
    return m;
}

Mat normal_init(int rows, int cols, double scale, Rng& rng) {
    Mat m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            m(r, c) = scale * rng.next_gaussian();
        }
    }
    return m;
}

void validate_config(const ModelConfig& config) {
    if (config.depth < 1 || config.n_latents < 1 || config.latent_dim < 1 ||
        config.cross_heads < 1 || config.self_heads < 1 || config.self_head_dim < 1 ||
        config.ff_mult < 1) {
        raise(ErrorKind::InvalidConfig, "all model dimensions must be >= 1");
    }
    if (config.latent_dim % config.cross_heads != 0) {
        raise(ErrorKind::InvalidConfig, "latent_dim must be divisible by cross_heads");
    }
    if (config.input_dims.empty()) {
        raise(ErrorKind::InvalidConfig, "at least one input modality is required");
    }
    for (const auto& [modality, dim] : config.input_dims) {
        if (dim < 1) {
            raise(ErrorKind::InvalidConfig,
                  std::string("input dim for ") + modality_name(modality) + " must be >= 1");
        }
    }
    if (config.max_tokens && *config.max_tokens < 1) {
        raise(ErrorKind::InvalidConfig, "max_tokens must be >= 1 when set");
    }
}

struct TensorSpec {
    std::string name;
    int rows;
    int cols;
    enum class Init { Uniform, Normal02, Ones, Zeros } init;
};

std::vector<TensorSpec> tensor_layout(const ModelConfig& config) {
    using Init = TensorSpec::Init;
    std::vector<TensorSpec> layout;
    const int d = config.latent_dim;
    const int cross_head_dim = d / config.cross_heads;
    const int self_inner = config.self_heads * config.self_head_dim;
    const int ff_hidden = config.ff_mult * d;

    layout.push_back({"latents", config.n_latents, d, Init::Normal02});
    for (const auto& [modality, input_dim] : config.input_dims) {
        const std::string m = modality_name(modality);
        layout.push_back({"proj/" + m, input_dim, d, Init::Uniform});
        layout.push_back({"type/" + m, 1, d, Init::Normal02});
    }
    layout.push_back({"cross/ln_q/gain", 1, d, Init::Ones});
    layout.push_back({"cross/ln_q/bias", 1, d, Init::Zeros});
    layout.push_back({"cross/ln_kv/gain", 1, d, Init::Ones});
    layout.push_back({"cross/ln_kv/bias", 1, d, Init::Zeros});
    for (int h = 0; h < config.cross_heads; ++h) {
        const std::string p = "cross/h" + std::to_string(h) + "/";
        layout.push_back({p + "wq", d, cross_head_dim, Init::Uniform});
        layout.push_back({p + "wk", d, cross_head_dim, Init::Uniform});
        layout.push_back({p + "wv", d, cross_head_dim, Init::Uniform});
    }
    layout.push_back({"cross/wo", d, d, Init::Uniform});
    for (int layer = 0; layer < config.depth; ++layer) {
        const std::string p = "layer" + std::to_string(layer) + "/";
        layout.push_back({p + "ln1/gain", 1, d, Init::Ones});
        layout.push_back({p + "ln1/bias", 1, d, Init::Zeros});
        for (int h = 0; h < config.self_heads; ++h) {
            const std::string q = p + "h" + std::to_string(h) + "/";
            layout.push_back({q + "wq", d, config.self_head_dim, Init::Uniform});
            layout.push_back({q + "wk", d, config.self_head_dim, Init::Uniform});
            layout.push_back({q + "wv", d, config.self_head_dim, Init::Uniform});
        }
        layout.push_back({p + "wo", self_inner, d, Init::Uniform});
        layout.push_back({p + "ln2/gain", 1, d, Init::Ones});
        layout.push_back({p + "ln2/bias", 1, d, Init::Zeros});
        layout.push_back({p + "ff/w1", d, ff_hidden, Init::Uniform});
        layout.push_back({p + "ff/w2", ff_hidden, d, Init::Uniform});
    }
    layout.push_back({"final_ln/gain", 1, d, Init::Ones});
    layout.push_back({"final_ln/bias", 1, d, Init::Zeros});
    layout.push_back({"head/w", d, 1, Init::Uniform});
    layout.push_back({"head/b", 1, 1, Init::Zeros});
    return layout;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) {
    json root;
    root["depth"] = config.depth;
    root["n_latents"] = config.n_latents;
    root["latent_dim"] = config.latent_dim;
    root["cross_heads"] = config.cross_heads;
    root["self_heads"] = config.self_heads;
    root["self_head_dim"] = config.self_head_dim;
    root["ff_mult"] = config.ff_mult;
    root["input_dims"] = json::object();
    for (const auto& [modality, dim] : config.input_dims) {
        root["input_dims"][modality_name(modality)] = dim;
    }
    if (config.max_tokens) {
        root["max_tokens"] = *config.max_tokens;
    } else {
        root["max_tokens"] = nullptr;
    }
    return root.dump(2) + "\n";
}

ModelConfig model_config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }
    ModelConfig config;
    config.depth = root.value("depth", config.depth);
    config.n_latents = root.value("n_latents", config.n_latents);
    config.latent_dim = root.value("latent_dim", config.latent_dim);
    config.cross_heads = root.value("cross_heads", config.cross_heads);
    config.self_heads = root.value("self_heads", config.self_heads);
    config.self_head_dim = root.value("self_head_dim", config.self_head_dim);
    config.ff_mult = root.value("ff_mult", config.ff_mult);
    config.input_dims.clear();
    if (root.contains("input_dims")) {
        for (const auto& [name, dim] : root["input_dims"].items()) {
            const auto modality = modality_from_name(name);
            if (!modality) {
                raise(ErrorKind::InvalidConfig, "unknown modality '" + name + "' in input_dims");
            }
            config.input_dims[*modality] = dim.get<int>();
        }
    }
    if (root.contains("max_tokens") && !root["max_tokens"].is_null()) {
        config.max_tokens = root["max_tokens"].get<int>();
    }
    validate_config(config);
    return config;
}

const ad::Mat& EncoderParams::find(const std::string& name) const {
    for (const auto& tensor : tensors) {
        if (tensor.name == name) return tensor.value;
    }
    raise(ErrorKind::MissingEntry, "no tensor named '" + name + "'");
}

EncoderParams init_encoder(const ModelConfig& config, std::uint64_t seed) {
    validate_config(config);
    EncoderParams params;
    params.config = config;
    for (const auto& spec : tensor_layout(config)) {
        // one substream per tensor: layout changes never reshuffle others
        Rng rng(derive_seed(seed, spec.name));
        Mat value;
        switch (spec.init) {
            case TensorSpec::Init::Uniform: value = uniform_init(spec.rows, spec.cols, rng); break;
            case TensorSpec::Init::Normal02: value = normal_init(spec.rows, spec.cols, 0.02, rng); break;
            case TensorSpec::Init::Ones: value = Mat::Ones(spec.rows, spec.cols); break;
            case TensorSpec::Init::Zeros: value = Mat::Zero(spec.rows, spec.cols); break;
        }
        params.tensors.push_back({spec.name, std::move(value)});
    }
    return params;
}

std::int64_t param_count(const EncoderParams& params) {
    std::int64_t total = 0;
    for (const auto& tensor : params.tensors) total += tensor.value.size();
    return total;
}

ad::Ref ParamRefs::at(const std::string& name) const {
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
        raise(ErrorKind::MissingEntry, "no parameter named '" + name + "'");
    }
    return it->second;
}

ParamRefs push_params(ad::Tape& tape, const EncoderParams& params) {
    ParamRefs refs;
    refs.refs.reserve(params.tensors.size());
    for (const auto& tensor : params.tensors) {
        const Ref ref = tape.leaf(tensor.value);
        refs.refs.push_back(ref);
        refs.by_name.emplace(tensor.name, ref);
    }
    return refs;
}

namespace {

// Multi-head attention from queries (rows of q_src) onto keys/values (rows
// of kv_src). mask_bias, when valid, is a 1 x kv_rows additive row of
// 0 / -1e30 applied before the softmax.
Ref attention(Tape& tape, const ParamRefs& refs, const std::string& prefix, int heads,
              int head_dim, Ref q_src, Ref kv_src, Ref mask_bias, const std::string& wo_name) {
    Ref merged;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (int h = 0; h < heads; ++h) {
        const std::string p = prefix + "h" + std::to_string(h) + "/";
        const Ref q = tape.matmul(q_src, refs.at(p + "wq"));
        const Ref k = tape.matmul(kv_src, refs.at(p + "wk"));
        const Ref v = tape.matmul(kv_src, refs.at(p + "wv"));
        Ref scores = tape.scale(tape.matmul_nt(q, k), inv_sqrt);
        if (mask_bias.valid()) {
            scores = tape.add(scores, mask_bias);
        }
        const Ref weights = tape.row_softmax(scores);
        const Ref head_out = tape.matmul(weights, v);
        merged = h == 0 ? head_out : tape.concat_cols(merged, head_out);
    }
    return tape.matmul(merged, refs.at(wo_name));
}

}  // namespace

Ref encode_on_tape(Tape& tape, const ParamRefs& refs, const ModelConfig& config,
                   const std::vector<ModalityInput>& inputs) {
    if (inputs.empty()) {
        raise(ErrorKind::EmptyInput, "encoder needs at least one modality input");
    }

    Ref token_block;
    std::vector<bool> mask;
    for (const auto& input : inputs) {
        const auto dim_it = config.input_dims.find(input.modality);
        if (dim_it == config.input_dims.end()) {
            raise(ErrorKind::UnknownModality,
                  std::string("model has no projection for ") + modality_name(input.modality));
        }
        Mat tokens = input.tokens;
        std::vector<bool> valid = input.valid;
        if (valid.empty()) {
            valid.assign(static_cast<std::size_t>(tokens.rows()), true);
        }
        if (tokens.rows() == 0) {
            raise(ErrorKind::EmptyInput,
                  std::string("no token rows for ") + modality_name(input.modality));
        }
        if (tokens.cols() != dim_it->second) {
            raise(ErrorKind::ShapeMismatch,
                  std::string("token dim mismatch for ") + modality_name(input.modality));
        }
        if (config.max_tokens && tokens.rows() > *config.max_tokens) {
            tokens = tokens.topRows(*config.max_tokens).eval();
            valid.resize(static_cast<std::size_t>(*config.max_tokens));
        }
        const std::string m = modality_name(input.modality);
        const Ref raw = tape.leaf(std::move(tokens));
        const Ref projected = tape.matmul(raw, refs.at("proj/" + m));
        const Ref typed = tape.add(projected, refs.at("type/" + m));
        token_block = token_block.valid() ? tape.concat_rows(token_block, typed) : typed;
        mask.insert(mask.end(), valid.begin(), valid.end());
    }

    bool any_valid = false;
    bool all_valid = true;
    for (const bool v : mask) {
        any_valid = any_valid || v;
        all_valid = all_valid && v;
    }
    if (!any_valid) {
        raise(ErrorKind::EmptyInput, "all token rows are masked out");
    }
    Ref mask_bias;  // stays invalid when nothing is masked
    if (!all_valid) {
        Mat bias(1, static_cast<Eigen::Index>(mask.size()));
        for (std::size_t i = 0; i < mask.size(); ++i) {
            bias(0, static_cast<Eigen::Index>(i)) = mask[i] ? 0.0 : kMaskBias;
        }
        mask_bias = tape.leaf(std::move(bias));
    }

    // cross-attention read: latents query the token rows
    const Ref latents = refs.at("latents");
    const Ref zq = tape.layer_norm(latents, refs.at("cross/ln_q/gain"), refs.at("cross/ln_q/bias"));
    const Ref xkv =
        tape.layer_norm(token_block, refs.at("cross/ln_kv/gain"), refs.at("cross/ln_kv/bias"));
    const int cross_head_dim = config.latent_dim / config.cross_heads;
    Ref z = tape.add(latents, attention(tape, refs, "cross/", config.cross_heads, cross_head_dim,
                                        zq, xkv, mask_bias, "cross/wo"));

    // latent transformer stack
    for (int layer = 0; layer < config.depth; ++layer) {
        const std::string p = "layer" + std::to_string(layer) + "/";
        const Ref normed = tape.layer_norm(z, refs.at(p + "ln1/gain"), refs.at(p + "ln1/bias"));
        z = tape.add(z, attention(tape, refs, p, config.self_heads, config.self_head_dim, normed,
                                  normed, Ref{}, p + "wo"));
        const Ref normed2 = tape.layer_norm(z, refs.at(p + "ln2/gain"), refs.at(p + "ln2/bias"));
        const Ref hidden = tape.gelu(tape.matmul(normed2, refs.at(p + "ff/w1")));
        z = tape.add(z, tape.matmul(hidden, refs.at(p + "ff/w2")));
    }

    const Ref final_normed =
        tape.layer_norm(z, refs.at("final_ln/gain"), refs.at("final_ln/bias"));
    const Ref pooled = tape.masked_mean_rows(
        final_normed, std::vector<bool>(static_cast<std::size_t>(config.n_latents), true));
    return tape.add(tape.matmul(pooled, refs.at("head/w")), refs.at("head/b"));
}

double encode_classify(const EncoderParams& params, const std::vector<ModalityInput>& inputs) {
    Tape tape;
    const ParamRefs refs = push_params(tape, params);
    const Ref logit = encode_on_tape(tape, refs, params.config, inputs);
    return tape.value(logit)(0, 0);
}

double predict_proba(const EncoderParams& params, const std::vector<ModalityInput>& inputs) {
    const double z = encode_classify(params, inputs);
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::vector<ModalityInput> gather_inputs(const EncoderParams& params, const FeatureStore& store,
                                         const std::string& clip_id) {
    std::vector<ModalityInput> inputs;
    for (const auto& [modality, dim] : params.config.input_dims) {
        if (!store.has(clip_id, modality)) {
            raise(ErrorKind::MissingFeature, "clip '" + clip_id + "' lacks " +
                                                 modality_name(modality) + " features");
        }
        inputs.push_back({modality, store.fetch(clip_id, modality).to_eigen(), {}});
    }
    return inputs;
}

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json index = json::object();
    int counter = 0;
    for (const auto& tensor : params.tensors) {
        const std::string file = "t" + std::to_string(counter++) + ".mtns";
        write_token_matrix(dir / file, TokenMatrix::from_eigen(tensor.value));
        index[tensor.name] = file;
    }
    std::ofstream out(dir / "index.json", std::ios::binary);
    if (!out) {
        raise(ErrorKind::IoError, "cannot write checkpoint index in " + dir.string());
    }
    out << index.dump(2) << "\n";
    std::ofstream config_out(dir / "config.json", std::ios::binary);
    config_out << model_config_to_json(params.config);
}

EncoderParams load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream config_in(dir / "config.json", std::ios::binary);
    if (!config_in) {
        raise(ErrorKind::MissingEntry, "no config.json in " + dir.string());
    }
    std::string config_text((std::istreambuf_iterator<char>(config_in)),
                            std::istreambuf_iterator<char>());
    EncoderParams params;
    params.config = model_config_from_json(config_text);

    std::ifstream index_in(dir / "index.json", std::ios::binary);
    if (!index_in) {
        raise(ErrorKind::MissingEntry, "no index.json in " + dir.string());
    }
    json index;
    try {
        index = json::parse(index_in);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }

    // reconstruct in canonical layout order so the tensor list is stable
    for (const auto& spec : tensor_layout(params.config)) {
        if (!index.contains(spec.name)) {
            raise(ErrorKind::MissingEntry, "checkpoint lacks tensor '" + spec.name + "'");
        }
        const TokenMatrix stored =
            read_token_matrix(dir / index[spec.name].get<std::string>());
        if (static_cast<int>(stored.rows) != spec.rows || static_cast<int>(stored.dim) != spec.cols) {
            raise(ErrorKind::ShapeMismatch, "checkpoint tensor '" + spec.name + "' has shape " +
                                                std::to_string(stored.rows) + "x" +
                                                std::to_string(stored.dim));
        }
        params.tensors.push_back({spec.name, stored.to_eigen()});
    }
    return params;
}

}  // namespace modfuse
