#include "modfuse/fusion.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "modfuse/errors.hpp"

namespace modfuse {

using nlohmann::json;

const char* scheme_kind_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::Unimodal: return "unimodal";
        case SchemeKind::EarlyPair: return "early_pair";
        case SchemeKind::LateEnsemble: return "late_ensemble";
        case SchemeKind::EarlyTri: return "early_tri";
    }
    return "?";
}

namespace {

ModalitySet model_modalities(const EncoderParams& params) {
    std::set<Modality> members;
    for (const auto& [modality, dim] : params.config.input_dims) members.insert(modality);
    return ModalitySet(members);
}

}  // namespace

void validate_ensemble(const Ensemble& ensemble) {
    const auto& scheme = ensemble.scheme;
    const auto& components = ensemble.components;
    std::set<Modality> covered;
    for (const auto& component : components) {
        for (const Modality m : model_modalities(component).members()) covered.insert(m);
    }
    if (ModalitySet(covered) != scheme.modalities) {
        raise(ErrorKind::InvalidConfig,
              "component modalities do not union to the scheme's modality set");
    }
    switch (scheme.kind) {
        case SchemeKind::Unimodal:
            if (scheme.modalities.size() != 1 || components.size() != 1) {
                raise(ErrorKind::InvalidConfig, "unimodal scheme needs one single-modality model");
            }
            break;
        case SchemeKind::EarlyPair:
            if (scheme.modalities.size() != 2 || components.size() != 1 ||
                model_modalities(components[0]).size() != 2) {
                raise(ErrorKind::InvalidConfig,
                      "early pair scheme needs one model over two distinct modalities");
            }
            break;
        case SchemeKind::LateEnsemble:
            if (scheme.modalities.empty() || components.size() != scheme.modalities.size()) {
                raise(ErrorKind::InvalidConfig,
                      "late ensemble needs one unimodal model per modality");
            }
            for (const auto& component : components) {
                if (model_modalities(component).size() != 1) {
                    raise(ErrorKind::InvalidConfig, "late ensemble components must be unimodal");
                }
            }
            break;
        case SchemeKind::EarlyTri: {
            if (components.size() != 2) {
                raise(ErrorKind::InvalidConfig, "tri-modal early fusion uses two pair models");
            }
            const ModalitySet expected{Modality::Visual, Modality::Textual, Modality::Audio};
            if (scheme.modalities != expected) {
                raise(ErrorKind::InvalidConfig, "tri-modal scheme must cover all modalities");
            }
            const ModalitySet vt{Modality::Visual, Modality::Textual};
            const ModalitySet va{Modality::Visual, Modality::Audio};
            const ModalitySet m0 = model_modalities(components[0]);
            const ModalitySet m1 = model_modalities(components[1]);
            const bool ok = (m0 == vt && m1 == va) || (m0 == va && m1 == vt);
            if (!ok) {
                raise(ErrorKind::InvalidConfig,
                      "tri-modal early fusion pairs are (vision,text) and (vision,audio)");
            }
            break;
        }
    }
}

double max_fuse(const std::vector<double>& probabilities) {
    if (probabilities.empty()) {
        raise(ErrorKind::EmptyList, "max_fuse needs at least one probability");
    }
    double best = 0.0;
    bool first = true;
    for (const double p : probabilities) {
        if (p < 0.0 || p > 1.0) {
            raise(ErrorKind::OutOfRange, "probability outside [0, 1]");
        }
        best = first ? p : std::max(best, p);
        first = false;
    }
    return best;
}

double predict(const Ensemble& ensemble, const FeatureStore& features,
               const std::string& clip_id) {
    switch (ensemble.scheme.kind) {
        case SchemeKind::Unimodal:
        case SchemeKind::EarlyPair: {
            const auto& model = ensemble.components.front();
            return predict_proba(model, gather_inputs(model, features, clip_id));
        }
        case SchemeKind::LateEnsemble:
        case SchemeKind::EarlyTri: {
            std::vector<double> probabilities;
            probabilities.reserve(ensemble.components.size());
            for (const auto& model : ensemble.components) {
                probabilities.push_back(
                    predict_proba(model, gather_inputs(model, features, clip_id)));
            }
            return max_fuse(probabilities);
        }
    }
    raise(ErrorKind::InvalidConfig, "unknown fusion scheme");
}

Decision decide(double probability, double threshold) {
    return probability >= threshold ? Decision::Positive : Decision::Negative;
}

void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["scheme"] = {{"kind", scheme_kind_name(ensemble.scheme.kind)},
                          {"modalities", json::array()}};
    for (const Modality m : ensemble.scheme.modalities.members()) {
        manifest["scheme"]["modalities"].push_back(modality_name(m));
    }
    manifest["components"] = json::array();
    for (std::size_t i = 0; i < ensemble.components.size(); ++i) {
        const std::string sub = "component_" + std::to_string(i);
        save_checkpoint(ensemble.components[i], dir / sub);
        json entry;
        entry["checkpoint"] = sub;
        entry["modalities"] = json::array();
        for (const Modality m : model_modalities(ensemble.components[i]).members()) {
            entry["modalities"].push_back(modality_name(m));
        }
        manifest["components"].push_back(std::move(entry));
    }
    std::ofstream out(dir / "ensemble.json", std::ios::binary);
    if (!out) {
        raise(ErrorKind::IoError, "cannot write ensemble manifest in " + dir.string());
    }
    out << manifest.dump(2) << "\n";
}

Ensemble load_ensemble(const std::filesystem::path& dir) {
    std::ifstream in(dir / "ensemble.json", std::ios::binary);
    if (!in) {
        raise(ErrorKind::MissingEntry, "no ensemble.json in " + dir.string());
    }
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }

    Ensemble ensemble;
    const std::string kind = manifest["scheme"].value("kind", "");
    if (kind == "unimodal") {
        ensemble.scheme.kind = SchemeKind::Unimodal;
    } else if (kind == "early_pair") {
        ensemble.scheme.kind = SchemeKind::EarlyPair;
    } else if (kind == "late_ensemble") {
        ensemble.scheme.kind = SchemeKind::LateEnsemble;
    } else if (kind == "early_tri") {
        ensemble.scheme.kind = SchemeKind::EarlyTri;
    } else {
        raise(ErrorKind::SchemaViolation, "unknown scheme kind '" + kind + "'");
    }
    std::set<Modality> members;
    for (const auto& name : manifest["scheme"]["modalities"]) {
        const auto modality = modality_from_name(name.get<std::string>());
        if (!modality) {
            raise(ErrorKind::SchemaViolation, "unknown modality in ensemble scheme");
        }
        members.insert(*modality);
    }
    ensemble.scheme.modalities = ModalitySet(members);
    for (const auto& entry : manifest["components"]) {
        ensemble.components.push_back(
            load_checkpoint(dir / entry["checkpoint"].get<std::string>()));
    }
    validate_ensemble(ensemble);
    return ensemble;
}

}  // namespace modfuse
