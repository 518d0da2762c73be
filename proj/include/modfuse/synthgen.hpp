#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "modfuse/corpus.hpp"
#include "modfuse/features.hpp"

namespace modfuse {

// Controls for the synthetic corpus. Each modality independently carries an
// objectifying signal with p_signal; positive clips may leak a scaled copy
// of the signal direction into their non-signaling modalities ("leakage"),
// which is what makes modality-agnostic supervision attribute labels to the
// wrong stream.
struct SynthSpec {
    int n_movies = 20;
    int clips_per_movie = 100;
    std::map<Modality, int> feature_dims = {{Modality::Visual, 16},
                                            {Modality::Textual, 16},
                                            {Modality::Audio, 16}};
    std::map<Modality, std::pair<int, int>> token_count_ranges = {
        {Modality::Visual, {4, 12}}, {Modality::Textual, {4, 12}}, {Modality::Audio, {4, 12}}};
    std::map<Modality, double> p_signal = {{Modality::Visual, 0.45},
                                           {Modality::Textual, 0.10},
                                           {Modality::Audio, 0.15}};
    double leakage = 0.0;             // rho: contamination probability
    double separation = 3.0;          // delta: cluster mean distance
    double noise = 1.0;               // sigma: token noise scale
    double contamination_scale = 0.5; // contaminated mean = scale * delta * u
    std::uint64_t seed = 0;
};

std::string synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const std::string& text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

// clip id -> the modalities that truly carry signal; empty for EN clips.
struct GroundTruthAttribution {
    std::map<std::string, std::set<Modality>> by_clip;
};

std::string attribution_to_json(const GroundTruthAttribution& gt);
GroundTruthAttribution attribution_from_json(const std::string& text);

struct SynthResult {
    Corpus corpus;
    FeatureStore store;
    GroundTruthAttribution attribution;
    // diagnostic: which (clip, modality) streams received leakage
    std::map<std::string, std::set<Modality>> contaminated;
};

// Deterministic in the spec: identical spec (seed included) gives
// bit-identical corpora, features and attribution. Structure, contamination
// decisions and token noise use independent substreams, so changing
// `leakage` alone never reshuffles levels or noise draws.
SynthResult generate_corpus(const SynthSpec& spec);

std::set<Modality> attribution_oracle(const GroundTruthAttribution& gt,
                                      const std::string& clip_id);

// Writes corpus.json, manifest.json + features/, and ground_truth.json.
void save_dataset(const SynthResult& result, const std::filesystem::path& out_dir);

}  // namespace modfuse
