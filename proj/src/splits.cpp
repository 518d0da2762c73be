#include "modfuse/splits.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "modfuse/errors.hpp"
#include "modfuse/rng.hpp"

namespace modfuse {

using nlohmann::json;

ModalitySet::ModalitySet(std::initializer_list<Modality> modalities)
    : members_(modalities) {}

ModalitySet::ModalitySet(const std::set<Modality>& modalities) : members_(modalities) {}

bool ModalitySet::contains(Modality m) const { return members_.count(m) > 0; }

bool ModalitySet::is_subset_of(const ModalitySet& other) const {
    return std::includes(other.members_.begin(), other.members_.end(), members_.begin(),
                         members_.end());
}

std::string ModalitySet::label() const {
    std::string out;
    for (const Modality m : members_) {
        if (!out.empty()) out += "+";
        out += modality_name(m);
    }
    return out;
}

std::size_t LabeledView::count(LabelKind label) const {
    std::size_t n = 0;
    for (const auto& entry : entries) {
        if (entry.label == label) ++n;
    }
    return n;
}

LabeledView build_cmad(const Corpus& corpus) {
    LabeledView view;
    view.provenance.kind = Provenance::Kind::Cmad;
    view.entries.reserve(corpus.clips.size());
    for (const auto& clip : corpus.clips) {
        view.entries.push_back(
            {clip.id, is_positive_level(clip.level) ? LabelKind::Positive : LabelKind::Negative});
    }
    return view;
}

LabeledView build_cmsd(const Corpus& corpus, const ModalitySet& modalities) {
    if (modalities.empty()) {
        raise(ErrorKind::InvalidConfig, "CMSD requires a non-empty modality set");
    }
    LabeledView view;
    view.provenance.kind = Provenance::Kind::Cmsd;
    view.provenance.modalities = modalities;
    view.entries.reserve(corpus.clips.size());
    for (const auto& clip : corpus.clips) {
        bool positive = false;
        if (is_positive_level(clip.level)) {
            for (const auto& concept : clip.concepts) {
                if (modalities.contains(concept.modality)) {
                    positive = true;
                    break;
                }
            }
        }
        view.entries.push_back({clip.id, positive ? LabelKind::Positive : LabelKind::Negative});
    }
    return view;
}

FoldPlan make_folds(const Corpus& corpus, int k, int val_movies_per_fold, std::uint64_t seed) {
    const int n_movies = static_cast<int>(corpus.movies.size());
    if (k < 2) {
        raise(ErrorKind::InvalidConfig, "k must be >= 2");
    }
    if (val_movies_per_fold < 0) {
        raise(ErrorKind::InvalidConfig, "val_movies_per_fold must be >= 0");
    }
    if (n_movies < k) {
        raise(ErrorKind::TooFewMovies,
              std::to_string(n_movies) + " movies cannot fill " + std::to_string(k) + " folds");
    }
    // every fold needs >= 1 training movie after removing test + val blocks
    const int max_test_block = (n_movies + k - 1) / k;
    if (n_movies - max_test_block - val_movies_per_fold < 1) {
        raise(ErrorKind::TooFewMovies, "no training movies left after test and validation blocks");
    }

    std::vector<std::string> shuffled = corpus.movies;
    Rng rng(derive_seed(seed, "folds"));
    rng.shuffle(shuffled);

    // contiguous test blocks whose sizes differ by at most one
    FoldPlan plan;
    const int base = n_movies / k;
    const int remainder = n_movies % k;
    int cursor = 0;
    for (int fold_index = 0; fold_index < k; ++fold_index) {
        const int block = base + (fold_index < remainder ? 1 : 0);
        Fold fold;
        fold.test_movies.assign(shuffled.begin() + cursor, shuffled.begin() + cursor + block);
        std::vector<std::string> rest;
        rest.reserve(n_movies - block);
        rest.insert(rest.end(), shuffled.begin(), shuffled.begin() + cursor);
        rest.insert(rest.end(), shuffled.begin() + cursor + block, shuffled.end());
        // validation rotates with the fold index over the non-test movies
        const int rest_size = static_cast<int>(rest.size());
        const int offset = val_movies_per_fold > 0
                               ? (fold_index * val_movies_per_fold) % rest_size
                               : 0;
        std::vector<bool> in_val(rest.size(), false);
        for (int v = 0; v < val_movies_per_fold; ++v) {
            const int idx = (offset + v) % rest_size;
            in_val[idx] = true;
            fold.val_movies.push_back(rest[idx]);
        }
        for (int i = 0; i < rest_size; ++i) {
            if (!in_val[i]) fold.train_movies.push_back(rest[i]);
        }
        plan.folds.push_back(std::move(fold));
        cursor += block;
    }
    return plan;
}

LabeledView oversample(const LabeledView& view, std::uint64_t seed) {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < view.entries.size(); ++i) {
        (view.entries[i].label == LabelKind::Positive ? positives : negatives).push_back(i);
    }
    if (positives.empty() || negatives.empty()) {
        raise(ErrorKind::SingleClassView, "oversampling needs both classes present");
    }
    if (positives.size() == negatives.size()) {
        return view;
    }
    const auto& minority = positives.size() < negatives.size() ? positives : negatives;
    const std::size_t deficit =
        std::max(positives.size(), negatives.size()) - minority.size();

    LabeledView out = view;
    Rng rng(derive_seed(seed, "oversample"));
    for (std::size_t i = 0; i < deficit; ++i) {
        const std::size_t pick = static_cast<std::size_t>(rng.next_below(minority.size()));
        out.entries.push_back(view.entries[minority[pick]]);
    }
    return out;
}

LabeledView restrict_to_movies(const LabeledView& view, const Corpus& corpus,
                               const std::vector<std::string>& movies) {
    std::unordered_set<std::string> corpus_movies(corpus.movies.begin(), corpus.movies.end());
    std::unordered_set<std::string> keep;
    for (const auto& movie : movies) {
        if (!corpus_movies.count(movie)) {
            raise(ErrorKind::UnknownMovie, "movie '" + movie + "' not in corpus");
        }
        keep.insert(movie);
    }
    std::unordered_map<std::string, const Clip*> clip_by_id;
    for (const auto& clip : corpus.clips) clip_by_id[clip.id] = &clip;

    LabeledView out;
    out.provenance = view.provenance;
    for (const auto& entry : view.entries) {
        const auto it = clip_by_id.find(entry.clip_id);
        if (it == clip_by_id.end()) {
            raise(ErrorKind::UnknownClip, "view entry '" + entry.clip_id + "' not in corpus");
        }
        if (keep.count(it->second->movie_id)) {
            out.entries.push_back(entry);
        }
    }
    return out;
}

std::string view_to_json(const LabeledView& view) {
    json provenance;
    if (view.provenance.kind == Provenance::Kind::Cmad) {
        provenance["kind"] = "CMAD";
    } else {
        provenance["kind"] = "CMSD";
        json modalities = json::array();
        for (const Modality m : view.provenance.modalities->members()) {
            modalities.push_back(modality_name(m));
        }
        provenance["modalities"] = std::move(modalities);
    }
    json entries = json::array();
    for (const auto& entry : view.entries) {
        entries.push_back({{"clip", entry.clip_id},
                           {"label", entry.label == LabelKind::Positive ? "pos" : "neg"}});
    }
    return json{{"provenance", std::move(provenance)}, {"entries", std::move(entries)}}.dump(2) +
           "\n";
}

LabeledView view_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }
    LabeledView view;
    if (!root.contains("provenance") || !root.contains("entries")) {
        raise(ErrorKind::SchemaViolation, "view JSON needs 'provenance' and 'entries'");
    }
    const auto& provenance = root["provenance"];
    const std::string kind = provenance.value("kind", "");
    if (kind == "CMAD") {
        view.provenance.kind = Provenance::Kind::Cmad;
    } else if (kind == "CMSD") {
        view.provenance.kind = Provenance::Kind::Cmsd;
        std::set<Modality> members;
        for (const auto& name : provenance["modalities"]) {
            const auto modality = modality_from_name(name.get<std::string>());
            if (!modality) {
                raise(ErrorKind::SchemaViolation, "unknown modality in view provenance");
            }
            members.insert(*modality);
        }
        view.provenance.modalities = ModalitySet(members);
    } else {
        raise(ErrorKind::SchemaViolation, "provenance kind must be CMAD or CMSD");
    }
    for (const auto& entry : root["entries"]) {
        const std::string label = entry.value("label", "");
        if (label != "pos" && label != "neg") {
            raise(ErrorKind::SchemaViolation, "entry label must be 'pos' or 'neg'");
        }
        view.entries.push_back({entry.value("clip", std::string{}),
                                label == "pos" ? LabelKind::Positive : LabelKind::Negative});
    }
    return view;
}

std::string fold_plan_to_json(const FoldPlan& plan) {
    json folds = json::array();
    for (const auto& fold : plan.folds) {
        folds.push_back({{"train_movies", fold.train_movies},
                         {"val_movies", fold.val_movies},
                         {"test_movies", fold.test_movies}});
    }
    return json{{"folds", std::move(folds)}}.dump(2) + "\n";
}

}  // namespace modfuse
