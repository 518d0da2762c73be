#include "modfuse/corpus.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "modfuse/errors.hpp"

namespace modfuse {

using nlohmann::json;

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::Visual: return "visual";
        case Modality::Textual: return "textual";
        case Modality::Audio: return "audio";
    }
    return "?";
}

std::optional<Modality> modality_from_name(const std::string& name) {
    if (name == "visual") return Modality::Visual;
    if (name == "textual") return Modality::Textual;
    if (name == "audio") return Modality::Audio;
    return std::nullopt;
}

const char* level_name(Level level) {
    switch (level) {
        case Level::EasyNegative: return "EN";
        case Level::HardNegative: return "HN";
        case Level::Sure: return "S";
    }
    return "?";
}

std::optional<Level> level_from_name(const std::string& name) {
    if (name == "EN") return Level::EasyNegative;
    if (name == "HN") return Level::HardNegative;
    if (name == "S") return Level::Sure;
    return std::nullopt;
}

std::set<Modality> Clip::concept_modalities() const {
    std::set<Modality> out;
    for (const auto& concept : concepts) out.insert(concept.modality);
    return out;
}

namespace {

void require_field(const json& object, const char* field, const char* where) {
    if (!object.contains(field)) {
        raise(ErrorKind::SchemaViolation,
              std::string("missing field '") + field + "' in " + where);
    }
}

std::string get_string(const json& object, const char* field, const char* where) {
    require_field(object, field, where);
    if (!object[field].is_string()) {
        raise(ErrorKind::SchemaViolation,
              std::string("field '") + field + "' in " + where + " must be a string");
    }
    return object[field].get<std::string>();
}

double get_number(const json& object, const char* field, const char* where) {
    require_field(object, field, where);
    if (!object[field].is_number()) {
        raise(ErrorKind::SchemaViolation,
              std::string("field '") + field + "' in " + where + " must be a number");
    }
    return object[field].get<double>();
}

void warn_unknown_fields(const json& object, std::initializer_list<const char*> known,
                         const char* where, std::unordered_set<std::string>& warned) {
    for (const auto& [key, _] : object.items()) {
        bool is_known = false;
        for (const char* k : known) {
            if (key == k) {
                is_known = true;
                break;
            }
        }
        if (!is_known && warned.insert(std::string(where) + "." + key).second) {
            std::cerr << "warning: ignoring unknown field '" << key << "' in " << where << "\n";
        }
    }
}

}  // namespace

Corpus parse_corpus_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }
    if (!root.is_object()) {
        raise(ErrorKind::SchemaViolation, "top level must be a JSON object");
    }

    std::unordered_set<std::string> warned;
    warn_unknown_fields(root, {"taxonomy", "movies", "clips"}, "corpus", warned);

    require_field(root, "taxonomy", "corpus");
    require_field(root, "movies", "corpus");
    require_field(root, "clips", "corpus");
    if (!root["taxonomy"].is_array() || !root["movies"].is_array() || !root["clips"].is_array()) {
        raise(ErrorKind::SchemaViolation, "'taxonomy', 'movies' and 'clips' must be arrays");
    }

    Corpus corpus;
    std::unordered_map<std::string, Modality> concept_modality;
    for (const auto& entry : root["taxonomy"]) {
        if (!entry.is_object()) raise(ErrorKind::SchemaViolation, "taxonomy entries must be objects");
        warn_unknown_fields(entry, {"name", "modality"}, "taxonomy entry", warned);
        Concept concept;
        concept.name = get_string(entry, "name", "taxonomy entry");
        const std::string modality = get_string(entry, "modality", "taxonomy entry");
        const auto parsed = modality_from_name(modality);
        if (!parsed) {
            raise(ErrorKind::SchemaViolation, "unknown modality '" + modality + "' in taxonomy");
        }
        concept.modality = *parsed;
        if (!concept_modality.emplace(concept.name, concept.modality).second) {
            raise(ErrorKind::ConsistencyError,
                  "duplicate concept name '" + concept.name + "' in taxonomy");
        }
        corpus.taxonomy.push_back(std::move(concept));
    }

    for (const auto& movie : root["movies"]) {
        if (!movie.is_string()) raise(ErrorKind::SchemaViolation, "movie ids must be strings");
        corpus.movies.push_back(movie.get<std::string>());
    }

    for (const auto& entry : root["clips"]) {
        if (!entry.is_object()) raise(ErrorKind::SchemaViolation, "clip entries must be objects");
        warn_unknown_fields(entry, {"id", "movie", "start_s", "end_s", "level", "concepts"},
                            "clip entry", warned);
        Clip clip;
        clip.id = get_string(entry, "id", "clip entry");
        clip.movie_id = get_string(entry, "movie", "clip entry");
        clip.start_s = get_number(entry, "start_s", "clip entry");
        clip.end_s = get_number(entry, "end_s", "clip entry");
        const std::string level = get_string(entry, "level", "clip entry");
        const auto parsed_level = level_from_name(level);
        if (!parsed_level) {
            raise(ErrorKind::SchemaViolation,
                  "unknown level '" + level + "' in clip '" + clip.id + "'");
        }
        clip.level = *parsed_level;
        require_field(entry, "concepts", "clip entry");
        if (!entry["concepts"].is_array()) {
            raise(ErrorKind::SchemaViolation, "clip 'concepts' must be an array");
        }
        for (const auto& name : entry["concepts"]) {
            if (!name.is_string()) {
                raise(ErrorKind::SchemaViolation, "clip concepts must be strings");
            }
            const std::string concept_name = name.get<std::string>();
            const auto it = concept_modality.find(concept_name);
            if (it == concept_modality.end()) {
                raise(ErrorKind::ConsistencyError, "clip '" + clip.id + "' references concept '" +
                                                       concept_name + "' absent from taxonomy");
            }
            clip.concepts.insert(Concept{concept_name, it->second});
        }
        corpus.clips.push_back(std::move(clip));
    }

    const auto violations = validate_corpus(corpus);
    if (!violations.empty()) {
        std::ostringstream message;
        message << violations.size() << " violation(s); first: " << violations.front();
        raise(ErrorKind::ConsistencyError, message.str());
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& annotation_file) {
    std::ifstream in(annotation_file, std::ios::binary);
    if (!in) {
        raise(ErrorKind::MalformedFile, "cannot open " + annotation_file.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_corpus_json(buffer.str());
}

std::string corpus_to_json(const Corpus& corpus) {
    json root;
    root["taxonomy"] = json::array();
    for (const auto& concept : corpus.taxonomy) {
        root["taxonomy"].push_back(
            {{"name", concept.name}, {"modality", modality_name(concept.modality)}});
    }
    root["movies"] = corpus.movies;
    root["clips"] = json::array();
    for (const auto& clip : corpus.clips) {
        json concepts = json::array();
        for (const auto& concept : clip.concepts) concepts.push_back(concept.name);
        root["clips"].push_back({{"id", clip.id},
                                 {"movie", clip.movie_id},
                                 {"start_s", clip.start_s},
                                 {"end_s", clip.end_s},
                                 {"level", level_name(clip.level)},
                                 {"concepts", std::move(concepts)}});
    }
    return root.dump(2) + "\n";
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& annotation_file) {
    std::ofstream out(annotation_file, std::ios::binary);
    if (!out) {
        raise(ErrorKind::IoError, "cannot write " + annotation_file.string());
    }
    out << corpus_to_json(corpus);
}

StatsReport corpus_stats(const Corpus& corpus) {
    StatsReport report;
    for (const auto& movie : corpus.movies) {
        MovieStats stats;
        for (const Level level : {Level::EasyNegative, Level::HardNegative, Level::Sure}) {
            stats.level_counts[level] = 0;
            stats.level_durations_s[level] = 0.0;
        }
        for (const Modality modality : kAllModalities) stats.modality_fractions[modality] = 0.0;
        report.per_movie.emplace(movie, std::move(stats));
    }
    for (const Level level : {Level::EasyNegative, Level::HardNegative, Level::Sure}) {
        report.total_counts[level] = 0;
        report.total_durations_s[level] = 0.0;
    }

    std::map<std::string, std::map<Modality, std::int64_t>> concept_counts;
    for (const auto& clip : corpus.clips) {
        auto& stats = report.per_movie.at(clip.movie_id);
        stats.level_counts[clip.level] += 1;
        stats.level_durations_s[clip.level] += clip.duration_s();
        report.total_counts[clip.level] += 1;
        report.total_durations_s[clip.level] += clip.duration_s();
        for (const auto& concept : clip.concepts) {
            concept_counts[clip.movie_id][concept.modality] += 1;
            stats.concept_annotations += 1;
        }
    }

    for (auto& [movie, stats] : report.per_movie) {
        if (stats.concept_annotations == 0) continue;
        const double total = static_cast<double>(stats.concept_annotations);
        for (const Modality modality : kAllModalities) {
            stats.modality_fractions[modality] =
                static_cast<double>(concept_counts[movie][modality]) / total;
        }
    }
    return report;
}

std::string stats_to_json(const StatsReport& report) {
    json root;
    json totals;
    for (const auto& [level, count] : report.total_counts) {
        totals["counts"][level_name(level)] = count;
        totals["durations_s"][level_name(level)] = report.total_durations_s.at(level);
    }
    root["totals"] = std::move(totals);
    root["movies"] = json::object();
    for (const auto& [movie, stats] : report.per_movie) {
        json entry;
        for (const auto& [level, count] : stats.level_counts) {
            entry["counts"][level_name(level)] = count;
            entry["durations_s"][level_name(level)] = stats.level_durations_s.at(level);
        }
        for (const auto& [modality, fraction] : stats.modality_fractions) {
            entry["modality_fractions"][modality_name(modality)] = fraction;
        }
        entry["concept_annotations"] = stats.concept_annotations;
        root["movies"][movie] = std::move(entry);
    }
    return root.dump(2) + "\n";
}

std::vector<std::string> validate_corpus(const Corpus& corpus) {
    std::vector<std::string> violations;
    std::unordered_set<std::string> movie_set(corpus.movies.begin(), corpus.movies.end());
    std::unordered_map<std::string, Modality> taxonomy;
    for (const auto& concept : corpus.taxonomy) {
        if (!taxonomy.emplace(concept.name, concept.modality).second) {
            violations.push_back("taxonomy: duplicate concept name '" + concept.name + "'");
        }
    }

    std::unordered_set<std::string> seen_ids;
    for (const auto& clip : corpus.clips) {
        if (!seen_ids.insert(clip.id).second) {
            violations.push_back("clip '" + clip.id + "': duplicate clip id");
        }
        if (!(clip.end_s > clip.start_s)) {
            violations.push_back("clip '" + clip.id + "': end_s must exceed start_s");
        }
        if (!movie_set.count(clip.movie_id)) {
            violations.push_back("clip '" + clip.id + "': unknown movie '" + clip.movie_id + "'");
        }
        if (clip.level == Level::EasyNegative && !clip.concepts.empty()) {
            violations.push_back("clip '" + clip.id + "': EN clips must carry no concepts");
        }
        if (is_positive_level(clip.level) && clip.concepts.empty()) {
            violations.push_back("clip '" + clip.id +
                                 "': HN/S clips must carry at least one concept");
        }
        for (const auto& concept : clip.concepts) {
            const auto it = taxonomy.find(concept.name);
            if (it == taxonomy.end()) {
                violations.push_back("clip '" + clip.id + "': concept '" + concept.name +
                                     "' not in taxonomy");
            } else if (it->second != concept.modality) {
                violations.push_back("clip '" + clip.id + "': concept '" + concept.name +
                                     "' modality disagrees with taxonomy");
            }
        }
    }
    return violations;
}

}  // namespace modfuse
