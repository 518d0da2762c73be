#include "modfuse/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "modfuse/errors.hpp"
#include "modfuse/rng.hpp"

namespace modfuse {

using nlohmann::json;

namespace {

void validate_spec(const SynthSpec& spec) {
    if (spec.n_movies < 1 || spec.clips_per_movie < 1) {
        raise(ErrorKind::InvalidSpec, "n_movies and clips_per_movie must be >= 1");
    }
    if (!(spec.separation > 0.0) || !(spec.noise > 0.0)) {
        raise(ErrorKind::InvalidSpec, "separation and noise must be > 0");
    }
    if (spec.leakage < 0.0 || spec.leakage > 1.0) {
        raise(ErrorKind::InvalidSpec, "leakage must lie in [0, 1]");
    }
    if (spec.contamination_scale < 0.0) {
        raise(ErrorKind::InvalidSpec, "contamination_scale must be >= 0");
    }
    for (const Modality m : kAllModalities) {
        if (!spec.feature_dims.count(m) || !spec.token_count_ranges.count(m) ||
            !spec.p_signal.count(m)) {
            raise(ErrorKind::InvalidSpec,
                  std::string("spec must cover modality ") + modality_name(m));
        }
        if (spec.feature_dims.at(m) < 1) {
            raise(ErrorKind::InvalidSpec, "feature dims must be >= 1");
        }
        const auto [lo, hi] = spec.token_count_ranges.at(m);
        if (lo < 1 || hi < lo) {
            raise(ErrorKind::InvalidSpec, "token count ranges must satisfy 1 <= min <= max");
        }
        const double p = spec.p_signal.at(m);
        if (p < 0.0 || p > 1.0) {
            raise(ErrorKind::InvalidSpec, "p_signal must lie in [0, 1]");
        }
    }
}

std::string pad_number(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

double round_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

}  // namespace

std::string synth_spec_to_json(const SynthSpec& spec) {
    json root;
    root["n_movies"] = spec.n_movies;
    root["clips_per_movie"] = spec.clips_per_movie;
    for (const Modality m : kAllModalities) {
        const char* name = modality_name(m);
        root["feature_dims"][name] = spec.feature_dims.at(m);
        root["token_count_ranges"][name] = {spec.token_count_ranges.at(m).first,
                                            spec.token_count_ranges.at(m).second};
        root["p_signal"][name] = spec.p_signal.at(m);
    }
    root["leakage"] = spec.leakage;
    root["separation"] = spec.separation;
    root["noise"] = spec.noise;
    root["contamination_scale"] = spec.contamination_scale;
    root["seed"] = spec.seed;
    return root.dump(2) + "\n";
}

SynthSpec synth_spec_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }
    SynthSpec spec;
    spec.n_movies = root.value("n_movies", spec.n_movies);
    spec.clips_per_movie = root.value("clips_per_movie", spec.clips_per_movie);
    for (const Modality m : kAllModalities) {
        const char* name = modality_name(m);
        if (root.contains("feature_dims") && root["feature_dims"].contains(name)) {
            spec.feature_dims[m] = root["feature_dims"][name].get<int>();
        }
        if (root.contains("token_count_ranges") && root["token_count_ranges"].contains(name)) {
            const auto& range = root["token_count_ranges"][name];
            if (!range.is_array() || range.size() != 2) {
                raise(ErrorKind::InvalidSpec, "token count ranges must be [min, max]");
            }
            spec.token_count_ranges[m] = {range[0].get<int>(), range[1].get<int>()};
        }
        if (root.contains("p_signal") && root["p_signal"].contains(name)) {
            spec.p_signal[m] = root["p_signal"][name].get<double>();
        }
    }
    spec.leakage = root.value("leakage", spec.leakage);
    spec.separation = root.value("separation", spec.separation);
    spec.noise = root.value("noise", spec.noise);
    spec.contamination_scale = root.value("contamination_scale", spec.contamination_scale);
    spec.seed = root.value("seed", spec.seed);
    validate_spec(spec);
    return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorKind::MalformedFile, "cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return synth_spec_from_json(buffer.str());
}

std::string attribution_to_json(const GroundTruthAttribution& gt) {
    json root = json::object();
    for (const auto& [clip, modalities] : gt.by_clip) {
        json list = json::array();
        for (const Modality m : modalities) list.push_back(modality_name(m));
        root[clip] = std::move(list);
    }
    return root.dump(2) + "\n";
}

GroundTruthAttribution attribution_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }
    GroundTruthAttribution gt;
    for (const auto& [clip, list] : root.items()) {
        std::set<Modality> modalities;
        for (const auto& name : list) {
            const auto modality = modality_from_name(name.get<std::string>());
            if (!modality) {
                raise(ErrorKind::SchemaViolation, "unknown modality in ground truth");
            }
            modalities.insert(*modality);
        }
        gt.by_clip[clip] = std::move(modalities);
    }
    return gt;
}

SynthResult generate_corpus(const SynthSpec& spec) {
    validate_spec(spec);

    SynthResult result;
    result.corpus.taxonomy = {{"synthetic_visual", Modality::Visual},
                              {"synthetic_textual", Modality::Textual},
                              {"synthetic_audio", Modality::Audio}};

    // fixed unit direction per modality, shared by every clip of the run
    std::map<Modality, Eigen::VectorXd> directions;
    for (const Modality m : kAllModalities) {
        Rng rng(derive_seed(spec.seed, std::string("direction/") + modality_name(m)));
        Eigen::VectorXd u(spec.feature_dims.at(m));
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.next_gaussian();
        u.normalize();
        directions[m] = std::move(u);
    }

    for (int movie = 0; movie < spec.n_movies; ++movie) {
        result.corpus.movies.push_back("movie_" + pad_number(movie, 3));
    }

    std::map<std::string, double> movie_cursor;
    const std::int64_t total_clips =
        static_cast<std::int64_t>(spec.n_movies) * spec.clips_per_movie;
    for (std::int64_t index = 0; index < total_clips; ++index) {
        const int movie = static_cast<int>(index / spec.clips_per_movie);
        const int within = static_cast<int>(index % spec.clips_per_movie);
        Clip clip;
        clip.movie_id = result.corpus.movies[static_cast<std::size_t>(movie)];
        clip.id = "m" + pad_number(movie, 3) + "_c" + pad_number(within, 4);

        Rng structure(derive_seed(spec.seed, "structure", static_cast<std::uint64_t>(index)));
        std::set<Modality> signals;
        for (const Modality m : kAllModalities) {
            if (structure.next_bernoulli(spec.p_signal.at(m))) signals.insert(m);
        }
        if (signals.empty()) {
            clip.level = Level::EasyNegative;
        } else {
            clip.level = structure.next_bernoulli(0.5) ? Level::Sure : Level::HardNegative;
            for (const Modality m : signals) {
                clip.concepts.insert(
                    {std::string("synthetic_") + modality_name(m), m});
            }
        }
        const double duration = round_ms(2.0 + 8.0 * structure.next_double());
        double& cursor = movie_cursor[clip.movie_id];
        clip.start_s = round_ms(cursor);
        clip.end_s = round_ms(cursor + duration);
        cursor = clip.end_s;

        Rng contam(derive_seed(spec.seed, "contam", static_cast<std::uint64_t>(index)));
        std::set<Modality> contaminated;
        if (!signals.empty()) {
            for (const Modality m : kAllModalities) {
                if (!signals.count(m) && contam.next_bernoulli(spec.leakage)) {
                    contaminated.insert(m);
                }
            }
        }

        for (const Modality m : kAllModalities) {
            Rng tokens(derive_seed(spec.seed, std::string("tokens/") + modality_name(m),
                                   static_cast<std::uint64_t>(index)));
            const auto [lo, hi] = spec.token_count_ranges.at(m);
            const int count = static_cast<int>(tokens.next_int(lo, hi));
            double mean_scale = 0.0;
            if (signals.count(m)) {
                mean_scale = spec.separation;
            } else if (contaminated.count(m)) {
                mean_scale = spec.contamination_scale * spec.separation;
            }
            const Eigen::VectorXd mean = mean_scale * directions.at(m);
            Eigen::MatrixXd matrix(count, spec.feature_dims.at(m));
            for (int r = 0; r < count; ++r) {
                for (int c = 0; c < spec.feature_dims.at(m); ++c) {
                    matrix(r, c) = mean(c) + spec.noise * tokens.next_gaussian();
                }
            }
            result.store.add(clip.id, m, TokenMatrix::from_eigen(matrix));
        }

        result.attribution.by_clip[clip.id] = signals;
        if (!contaminated.empty()) {
            result.contaminated[clip.id] = contaminated;
        }
        result.corpus.clips.push_back(std::move(clip));
    }

    return result;
}

std::set<Modality> attribution_oracle(const GroundTruthAttribution& gt,
                                      const std::string& clip_id) {
    const auto it = gt.by_clip.find(clip_id);
    if (it == gt.by_clip.end()) {
        raise(ErrorKind::UnknownClip, "no attribution for clip '" + clip_id + "'");
    }
    return it->second;
}

void save_dataset(const SynthResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    save_corpus(result.corpus, out_dir / "corpus.json");
    result.store.save(out_dir);
    std::ofstream out(out_dir / "ground_truth.json", std::ios::binary);
    if (!out) {
        raise(ErrorKind::IoError, "cannot write ground truth in " + out_dir.string());
    }
    out << attribution_to_json(result.attribution);
}

}  // namespace modfuse
