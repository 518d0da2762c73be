#include "modfuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "modfuse/errors.hpp"
#include "modfuse/metrics.hpp"
#include "modfuse/rng.hpp"

namespace modfuse {

using ad::Mat;
using ad::Ref;
using ad::Tape;
using nlohmann::json;

std::string train_config_to_json(const TrainConfig& config) {
    json root;
    root["learning_rate"] = config.learning_rate;
    root["beta1"] = config.beta1;
    root["beta2"] = config.beta2;
    root["epsilon"] = config.epsilon;
    root["batch_size"] = config.batch_size;
    root["max_epochs"] = config.max_epochs;
    root["patience"] = config.patience;
    root["seed"] = config.seed;
    return root.dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }
    TrainConfig config;
    config.learning_rate = root.value("learning_rate", config.learning_rate);
    config.beta1 = root.value("beta1", config.beta1);
    config.beta2 = root.value("beta2", config.beta2);
    config.epsilon = root.value("epsilon", config.epsilon);
    config.batch_size = root.value("batch_size", config.batch_size);
    config.max_epochs = root.value("max_epochs", config.max_epochs);
    config.patience = root.value("patience", config.patience);
    config.seed = root.value("seed", config.seed);
    if (config.patience < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0) ||
        config.max_epochs < 1) {
        raise(ErrorKind::InvalidConfig, "patience/batch_size/max_epochs >= 1 and lr > 0 required");
    }
    return config;
}

std::string TrainLog::to_csv() const {
    std::ostringstream out;
    out << "epoch,loss,val_auc_pr\n";
    for (std::size_t i = 0; i < train_loss.size(); ++i) {
        out << (i + 1) << "," << train_loss[i] << "," << val_auc_pr[i] << "\n";
    }
    return out.str();
}

std::string TrainLog::summary_json() const {
    json root;
    root["epochs"] = train_loss.size();
    root["best_epoch"] = best_epoch;
    root["best_val_auc_pr"] =
        best_epoch >= 1 ? val_auc_pr[static_cast<std::size_t>(best_epoch - 1)] : 0.0;
    root["stop_reason"] =
        stop_reason == StopReason::PatienceExhausted ? "patience_exhausted" : "max_epochs";
    return root.dump(2) + "\n";
}

void adam_step(std::vector<NamedTensor>& params, const std::vector<Mat>& grads, AdamState& state,
               const TrainConfig& hyper, std::int64_t t) {
    if (grads.size() != params.size()) {
        raise(ErrorKind::ShapeMismatch, "adam_step: gradient count != parameter count");
    }
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i] = Mat::Zero(params[i].value.rows(), params[i].value.cols());
            state.v[i] = Mat::Zero(params[i].value.rows(), params[i].value.cols());
        }
    }
    const double bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Mat& g = grads[i];
        if (g.rows() != params[i].value.rows() || g.cols() != params[i].value.cols()) {
            raise(ErrorKind::ShapeMismatch, "adam_step: gradient shape mismatch at tensor " +
                                                params[i].name);
        }
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i].array() = hyper.beta2 * state.v[i].array() + (1.0 - hyper.beta2) * g.array().square();
        const auto m_hat = state.m[i].array() / bias1;
        const auto v_hat = state.v[i].array() / bias2;
        params[i].value.array() -=
            hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
}

bool early_stop_check(const std::vector<double>& history, int patience) {
    if (history.empty()) {
        raise(ErrorKind::EmptyList, "early_stop_check needs a non-empty history");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i] > history[best]) best = i;  // strict: ties do not reset patience
    }
    return history.size() - 1 - best >= static_cast<std::size_t>(patience);
}

namespace {

struct PreparedEntry {
    std::vector<ModalityInput> inputs;
    double target = 0.0;
};

std::vector<PreparedEntry> prepare_entries(const EncoderParams& params, const LabeledView& view,
                                           const FeatureStore& features) {
    std::vector<PreparedEntry> prepared;
    prepared.reserve(view.entries.size());
    std::unordered_map<std::string, std::vector<ModalityInput>> cache;
    for (const auto& entry : view.entries) {
        auto it = cache.find(entry.clip_id);
        if (it == cache.end()) {
            it = cache.emplace(entry.clip_id, gather_inputs(params, features, entry.clip_id))
                     .first;
        }
        prepared.push_back({it->second, entry.label == LabelKind::Positive ? 1.0 : 0.0});
    }
    return prepared;
}

std::vector<double> score_prepared(const EncoderParams& params,
                                   const std::vector<PreparedEntry>& entries) {
    std::vector<double> probs;
    probs.reserve(entries.size());
    for (const auto& entry : entries) {
        probs.push_back(predict_proba(params, entry.inputs));
    }
    return probs;
}

}  // namespace

std::pair<EncoderParams, TrainLog> train(const EncoderParams& initial,
                                         const LabeledView& train_view,
                                         const LabeledView& val_view,
                                         const FeatureStore& features,
                                         const TrainConfig& config) {
    if (train_view.count(LabelKind::Positive) == 0 || train_view.count(LabelKind::Negative) == 0) {
        raise(ErrorKind::SingleClassTrainView, "training view must contain both classes");
    }
    if (val_view.entries.empty()) {
        raise(ErrorKind::EmptyList, "validation view is empty");
    }

    // drawn once per run: epoch composition stays fixed across epochs
    const LabeledView balanced = oversample(train_view, derive_seed(config.seed, "oversample"));

    EncoderParams current = initial;
    const auto train_entries = prepare_entries(current, balanced, features);
    const auto val_entries = prepare_entries(current, val_view, features);
    std::vector<int> val_labels;
    val_labels.reserve(val_view.entries.size());
    for (const auto& entry : val_view.entries) {
        val_labels.push_back(entry.label == LabelKind::Positive ? 1 : 0);
    }

    TrainLog log;
    EncoderParams best = current;
    double best_metric = -1.0;
    AdamState adam;
    std::int64_t step = 0;

    std::vector<std::size_t> order(train_entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t cursor = 0;
        int batch_index = 0;
        while (cursor < order.size()) {
            const std::size_t batch_end =
                std::min(order.size(), cursor + static_cast<std::size_t>(config.batch_size));
            const double batch_n = static_cast<double>(batch_end - cursor);
            try {
                Tape tape;
                const ParamRefs refs = push_params(tape, current);
                Ref total;
                for (std::size_t i = cursor; i < batch_end; ++i) {
                    const auto& sample = train_entries[order[i]];
                    const Ref logit = encode_on_tape(tape, refs, current.config, sample.inputs);
                    const Ref loss = tape.bce_with_logits(logit, sample.target);
                    total = total.valid() ? tape.add(total, loss) : loss;
                }
                const Ref mean_loss = tape.scale(total, 1.0 / batch_n);
                const double loss_value = tape.value(mean_loss)(0, 0);
                if (!std::isfinite(loss_value)) {
                    raise(ErrorKind::NonFiniteLoss, "batch loss is not finite");
                }
                tape.backward(mean_loss);

                std::vector<Mat> grads;
                grads.reserve(refs.refs.size());
                for (const Ref ref : refs.refs) grads.push_back(tape.grad(ref));
                adam_step(current.tensors, grads, adam, config, ++step);
                loss_sum += loss_value * batch_n;
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::NonFiniteDetected || e.kind() == ErrorKind::NonFiniteLoss) {
                    raise(ErrorKind::NonFiniteLoss,
                          "epoch " + std::to_string(epoch) + " batch " +
                              std::to_string(batch_index) + ": " + e.what());
                }
                throw;
            }
            cursor = batch_end;
            ++batch_index;
        }

        log.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
        const std::vector<double> val_probs = score_prepared(current, val_entries);
        const double val_metric = auc_pr(val_probs, val_labels);
        log.val_auc_pr.push_back(val_metric);

        if (val_metric > best_metric) {
            best_metric = val_metric;
            best = current;
            log.best_epoch = epoch;
        }
        if (early_stop_check(log.val_auc_pr, config.patience)) {
            log.stop_reason = StopReason::PatienceExhausted;
            return {std::move(best), std::move(log)};
        }
    }
    log.stop_reason = StopReason::MaxEpochs;
    return {std::move(best), std::move(log)};
}

std::vector<double> score_view(const EncoderParams& params, const LabeledView& view,
                               const FeatureStore& features) {
    const auto prepared = prepare_entries(params, view, features);
    return score_prepared(params, prepared);
}

}  // namespace modfuse
