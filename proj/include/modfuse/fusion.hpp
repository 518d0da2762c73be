#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "modfuse/encoder.hpp"
#include "modfuse/features.hpp"
#include "modfuse/splits.hpp"

namespace modfuse {

// The model flavors under comparison: single-modality encoders, a shared
// encoder over a modality pair, a max-fused ensemble of unimodal models, and
// the tri-modal early variant that max-fuses the (vision,text) and
// (vision,audio) pair models.
enum class SchemeKind { Unimodal, EarlyPair, LateEnsemble, EarlyTri };

struct FusionScheme {
    SchemeKind kind = SchemeKind::Unimodal;
    ModalitySet modalities;
};

const char* scheme_kind_name(SchemeKind kind);

struct Ensemble {
    FusionScheme scheme;
    std::vector<EncoderParams> components;
};

// Throws InvalidConfig unless the component modality sets match the scheme:
// one model over one modality (Unimodal), one model over the distinct pair
// (EarlyPair), one unimodal model per member (LateEnsemble), or the two
// vision-anchored pair models (EarlyTri).
void validate_ensemble(const Ensemble& ensemble);

double max_fuse(const std::vector<double>& probabilities);

double predict(const Ensemble& ensemble, const FeatureStore& features,
               const std::string& clip_id);

enum class Decision { Negative, Positive };

// Positive at p >= threshold (ties go positive).
Decision decide(double probability, double threshold = 0.5);

// <dir>/ensemble.json plus one checkpoint directory per component.
void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& dir);
Ensemble load_ensemble(const std::filesystem::path& dir);

}  // namespace modfuse
