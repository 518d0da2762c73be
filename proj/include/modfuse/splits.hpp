#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modfuse/corpus.hpp"

namespace modfuse {

// Non-empty subset of the three modalities.
class ModalitySet {
  public:
    ModalitySet() = default;
    ModalitySet(std::initializer_list<Modality> modalities);
    explicit ModalitySet(const std::set<Modality>& modalities);

    bool contains(Modality m) const;
    bool empty() const { return members_.empty(); }
    std::size_t size() const { return members_.size(); }
    const std::set<Modality>& members() const { return members_; }
    bool is_subset_of(const ModalitySet& other) const;
    std::string label() const;  // e.g. "visual+textual"

    bool operator==(const ModalitySet&) const = default;

  private:
    std::set<Modality> members_;
};

enum class LabelKind : std::uint8_t { Negative = 0, Positive = 1 };

struct ViewEntry {
    std::string clip_id;
    LabelKind label = LabelKind::Negative;

    bool operator==(const ViewEntry&) const = default;
};

struct Provenance {
    enum class Kind { Cmad, Cmsd } kind = Kind::Cmad;
    std::optional<ModalitySet> modalities;  // set for Cmsd

    bool operator==(const Provenance&) const = default;
};

struct LabeledView {
    Provenance provenance;
    std::vector<ViewEntry> entries;

    std::size_t count(LabelKind label) const;
    bool operator==(const LabeledView&) const = default;
};

struct Fold {
    std::vector<std::string> train_movies;
    std::vector<std::string> val_movies;
    std::vector<std::string> test_movies;
};

struct FoldPlan {
    std::vector<Fold> folds;
};

// Positives are every HN and S clip; negatives are the EN clips.
LabeledView build_cmad(const Corpus& corpus);

// Positives are HN/S clips with at least one concept in `modalities`; every
// other clip (EN plus out-of-modality positives) is negative.
LabeledView build_cmsd(const Corpus& corpus, const ModalitySet& modalities);

// Movie-level k-fold plan: movies are shuffled by the seed, test blocks are
// contiguous slices of the shuffle, and validation movies rotate with the
// fold index among the remaining movies.
FoldPlan make_folds(const Corpus& corpus, int k, int val_movies_per_fold, std::uint64_t seed);

// Duplicates uniformly drawn minority entries until the classes balance.
LabeledView oversample(const LabeledView& view, std::uint64_t seed);

LabeledView restrict_to_movies(const LabeledView& view, const Corpus& corpus,
                               const std::vector<std::string>& movies);

std::string view_to_json(const LabeledView& view);
LabeledView view_from_json(const std::string& text);

std::string fold_plan_to_json(const FoldPlan& plan);

}  // namespace modfuse
