#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "modfuse/encoder.hpp"
#include "modfuse/features.hpp"
#include "modfuse/splits.hpp"

namespace modfuse {

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 16;
    int max_epochs = 200;
    int patience = 15;
    std::uint64_t seed = 0;
};

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

enum class StopReason { PatienceExhausted, MaxEpochs };

struct TrainLog {
    std::vector<double> train_loss;   // one entry per epoch
    std::vector<double> val_auc_pr;   // one entry per epoch
    int best_epoch = 0;               // 1-based epoch attaining the max val AUC-PR
    StopReason stop_reason = StopReason::MaxEpochs;

    std::string to_csv() const;       // epoch,loss,val_auc_pr
    std::string summary_json() const;
};

struct AdamState {
    std::vector<ad::Mat> m;
    std::vector<ad::Mat> v;
};

// One Adam update with bias correction, applied in place. `t` is 1-based.
void adam_step(std::vector<NamedTensor>& params, const std::vector<ad::Mat>& grads,
               AdamState& state, const TrainConfig& hyper, std::int64_t t);

// True means stop: the best value (strict improvements only) is `patience`
// or more epochs behind the latest entry.
bool early_stop_check(const std::vector<double>& history, int patience);

// Minibatch BCE training with Adam, minority oversampling (drawn once per
// run), and early stopping on validation AUC-PR. Returns the parameters of
// the best validation epoch. Deterministic in (seed, data).
std::pair<EncoderParams, TrainLog> train(const EncoderParams& initial,
                                         const LabeledView& train_view,
                                         const LabeledView& val_view,
                                         const FeatureStore& features,
                                         const TrainConfig& config);

// Probability per view entry, in entry order.
std::vector<double> score_view(const EncoderParams& params, const LabeledView& view,
                               const FeatureStore& features);

}  // namespace modfuse
