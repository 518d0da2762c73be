#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace modfuse {

enum class Modality : std::uint8_t { Visual = 0, Textual = 1, Audio = 2 };

constexpr std::array<Modality, 3> kAllModalities = {Modality::Visual, Modality::Textual,
                                                    Modality::Audio};

const char* modality_name(Modality m);                       // "visual" | "textual" | "audio"
std::optional<Modality> modality_from_name(const std::string& name);

enum class Level : std::uint8_t { EasyNegative, HardNegative, Sure };

const char* level_name(Level level);                         // "EN" | "HN" | "S"
std::optional<Level> level_from_name(const std::string& name);

// A positive-eligible clip is HN or S; both count as positive downstream.
inline bool is_positive_level(Level level) {
    return level == Level::HardNegative || level == Level::Sure;
}

struct Concept {
    std::string name;
    Modality modality = Modality::Visual;

    auto operator<=>(const Concept&) const = default;
};

struct Clip {
    std::string id;
    std::string movie_id;
    double start_s = 0.0;
    double end_s = 0.0;
    Level level = Level::EasyNegative;
    std::set<Concept> concepts;

    double duration_s() const { return end_s - start_s; }
    std::set<Modality> concept_modalities() const;

    bool operator==(const Clip&) const = default;
};

struct Corpus {
    std::vector<std::string> movies;
    std::vector<Clip> clips;
    std::vector<Concept> taxonomy;

    bool operator==(const Corpus&) const = default;
};

// Per-movie aggregates backing the distribution reports.
struct MovieStats {
    std::map<Level, std::int64_t> level_counts;
    std::map<Level, double> level_durations_s;
    // fraction of this movie's concept annotations per modality; sums to 1
    // for movies with at least one annotation, all-zero otherwise
    std::map<Modality, double> modality_fractions;
    std::int64_t concept_annotations = 0;
};

struct StatsReport {
    std::map<std::string, MovieStats> per_movie;
    std::map<Level, std::int64_t> total_counts;
    std::map<Level, double> total_durations_s;
};

// Parses and validates the UTF-8 JSON annotation format. Unknown fields are
// ignored (a warning is printed to stderr once per load).
Corpus load_corpus(const std::filesystem::path& annotation_file);
Corpus parse_corpus_json(const std::string& text);

std::string corpus_to_json(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& annotation_file);

StatsReport corpus_stats(const Corpus& corpus);
std::string stats_to_json(const StatsReport& report);

// Empty result means every invariant holds; each entry names the offending
// clip (or movie/concept) and the violated rule.
std::vector<std::string> validate_corpus(const Corpus& corpus);

}  // namespace modfuse
