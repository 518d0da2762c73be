#include "modfuse/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "modfuse/errors.hpp"

namespace modfuse {

using nlohmann::json;

namespace {

constexpr std::uint8_t kMagic[4] = {0x4D, 0x54, 0x4E, 0x53};  // "MTNS"
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeFloat32 = 1;

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float float_from_le(const std::uint8_t* p) {
    const std::uint32_t bits = get_u32_le(p);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

void put_float_le(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32_le(out, bits);
}

void check_finite(const std::vector<float>& values, const std::string& origin) {
    for (const float v : values) {
        if (!std::isfinite(v)) {
            raise(ErrorKind::NonFiniteValue, "non-finite value in " + origin);
        }
    }
}

std::string feature_file_name(const std::string& clip, Modality modality) {
    std::string name = clip;
    for (char& c : name) {
        if (c == '/' || c == '\\' || c == ':') c = '_';
    }
    return name + "__" + modality_name(modality) + ".mtns";
}

}  // namespace

Eigen::MatrixXd TokenMatrix::to_eigen() const {
    Eigen::MatrixXd m(rows, dim);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < dim; ++c) {
            m(r, c) = static_cast<double>(values[static_cast<std::size_t>(r) * dim + c]);
        }
    }
    return m;
}

TokenMatrix TokenMatrix::from_eigen(const Eigen::MatrixXd& m) {
    TokenMatrix out;
    out.rows = static_cast<std::uint32_t>(m.rows());
    out.dim = static_cast<std::uint32_t>(m.cols());
    out.values.resize(static_cast<std::size_t>(out.rows) * out.dim);
    for (std::uint32_t r = 0; r < out.rows; ++r) {
        for (std::uint32_t c = 0; c < out.dim; ++c) {
            out.values[static_cast<std::size_t>(r) * out.dim + c] = static_cast<float>(m(r, c));
        }
    }
    return out;
}

Tensor read_tensor_bytes(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() < 8) {
        raise(ErrorKind::TruncatedPayload, "header truncated in " + origin);
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        raise(ErrorKind::BadMagic, "bad magic in " + origin);
    }
    if (bytes[4] != kVersion) {
        raise(ErrorKind::UnsupportedVersion,
              "version " + std::to_string(bytes[4]) + " in " + origin);
    }
    if (bytes[5] != kDtypeFloat32) {
        raise(ErrorKind::UnsupportedVersion, "dtype " + std::to_string(bytes[5]) + " in " + origin);
    }
    const std::uint8_t rank = bytes[6];
    if (rank == 0 || rank > 8) {
        raise(ErrorKind::TruncatedPayload, "invalid rank in " + origin);
    }
    const std::size_t header_size = 8 + static_cast<std::size_t>(rank) * 4;
    if (bytes.size() < header_size) {
        raise(ErrorKind::TruncatedPayload, "dims truncated in " + origin);
    }

    Tensor tensor;
    std::size_t count = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
        const std::uint32_t d = get_u32_le(bytes.data() + 8 + i * 4);
        tensor.dims.push_back(d);
        count *= d;
    }
    if (bytes.size() != header_size + count * 4) {
        raise(ErrorKind::TruncatedPayload,
              "payload holds " + std::to_string((bytes.size() - header_size) / 4) +
                  " floats, header promises " + std::to_string(count) + " in " + origin);
    }
    tensor.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        tensor.values[i] = float_from_le(bytes.data() + header_size + i * 4);
    }
    check_finite(tensor.values, origin);
    return tensor;
}

std::vector<std::uint8_t> write_tensor_bytes(const Tensor& tensor) {
    if (tensor.dims.empty() || tensor.dims.size() > 8) {
        raise(ErrorKind::ShapeMismatch, "tensor rank must be 1..8");
    }
    std::size_t count = 1;
    for (const std::uint32_t d : tensor.dims) count *= d;
    if (count != tensor.values.size()) {
        raise(ErrorKind::ShapeMismatch, "tensor dims do not match value count");
    }
    check_finite(tensor.values, "tensor write");

    std::vector<std::uint8_t> out;
    out.reserve(8 + tensor.dims.size() * 4 + tensor.values.size() * 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kVersion);
    out.push_back(kDtypeFloat32);
    out.push_back(static_cast<std::uint8_t>(tensor.dims.size()));
    out.push_back(0);  // reserved
    for (const std::uint32_t d : tensor.dims) put_u32_le(out, d);
    for (const float v : tensor.values) put_float_le(out, v);
    return out;
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorKind::MissingEntry, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_tensor_bytes(bytes, path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    const auto bytes = write_tensor_bytes(tensor);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        raise(ErrorKind::IoError, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

TokenMatrix read_token_matrix(const std::filesystem::path& path) {
    const Tensor tensor = read_tensor(path);
    if (tensor.dims.size() != 2) {
        raise(ErrorKind::ShapeMismatch, "expected rank-2 tensor in " + path.string());
    }
    TokenMatrix matrix;
    matrix.rows = tensor.dims[0];
    matrix.dim = tensor.dims[1];
    matrix.values = tensor.values;
    return matrix;
}

void write_token_matrix(const std::filesystem::path& path, const TokenMatrix& matrix) {
    write_tensor(path, Tensor{{matrix.rows, matrix.dim}, matrix.values});
}

FeatureStore FeatureStore::load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
        raise(ErrorKind::MalformedFile, "cannot open " + manifest_path.string());
    }
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::MalformedFile, e.what());
    }
    if (!root.is_array()) {
        raise(ErrorKind::SchemaViolation, "manifest must be a JSON array");
    }

    FeatureStore store;
    store.base_dir_ = manifest_path.parent_path();
    for (const auto& item : root) {
        Entry entry;
        if (!item.is_object() || !item.contains("clip") || !item.contains("modality") ||
            !item.contains("path") || !item.contains("rows") || !item.contains("dim")) {
            raise(ErrorKind::SchemaViolation, "manifest entries need clip/modality/path/rows/dim");
        }
        entry.clip = item["clip"].get<std::string>();
        const auto modality = modality_from_name(item["modality"].get<std::string>());
        if (!modality) {
            raise(ErrorKind::SchemaViolation,
                  "unknown modality in manifest entry for clip '" + entry.clip + "'");
        }
        entry.modality = *modality;
        entry.path = item["path"].get<std::string>();
        entry.rows = item["rows"].get<std::uint32_t>();
        entry.dim = item["dim"].get<std::uint32_t>();
        store.index_[{entry.clip, entry.modality}] = std::move(entry);
    }
    return store;
}

void FeatureStore::add(const std::string& clip, Modality modality, TokenMatrix matrix) {
    check_finite(matrix.values, "feature matrix for clip '" + clip + "'");
    Entry entry;
    entry.clip = clip;
    entry.modality = modality;
    entry.rows = matrix.rows;
    entry.dim = matrix.dim;
    index_[{clip, modality}] = std::move(entry);
    cache_[{clip, modality}] = std::move(matrix);
}

bool FeatureStore::has(const std::string& clip, Modality modality) const {
    return index_.count({clip, modality}) > 0;
}

TokenMatrix FeatureStore::fetch(const std::string& clip, Modality modality) const {
    const auto it = index_.find({clip, modality});
    if (it == index_.end()) {
        raise(ErrorKind::MissingEntry, "no features for clip '" + clip + "' modality '" +
                                           modality_name(modality) + "'");
    }
    const auto cached = cache_.find({clip, modality});
    if (cached != cache_.end()) {
        return cached->second;
    }
    const Entry& entry = it->second;
    TokenMatrix matrix = read_token_matrix(base_dir_ / entry.path);
    if (matrix.rows != entry.rows || matrix.dim != entry.dim) {
        raise(ErrorKind::ShapeMismatch,
              "manifest says " + std::to_string(entry.rows) + "x" + std::to_string(entry.dim) +
                  " but file holds " + std::to_string(matrix.rows) + "x" +
                  std::to_string(matrix.dim) + " for clip '" + clip + "'");
    }
    return matrix;
}

void FeatureStore::preload() {
    for (const auto& [key, entry] : index_) {
        if (!cache_.count(key)) {
            cache_[key] = fetch(key.first, key.second);
        }
    }
}

void FeatureStore::save(const std::filesystem::path& dir) const {
    const auto feature_dir = dir / "features";
    std::filesystem::create_directories(feature_dir);

    json manifest = json::array();
    for (const auto& [key, entry] : index_) {
        const std::string file_name = feature_file_name(entry.clip, entry.modality);
        const TokenMatrix matrix = fetch(entry.clip, entry.modality);
        write_token_matrix(feature_dir / file_name, matrix);
        manifest.push_back({{"clip", entry.clip},
                            {"modality", modality_name(entry.modality)},
                            {"path", "features/" + file_name},
                            {"rows", entry.rows},
                            {"dim", entry.dim}});
    }
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) {
        raise(ErrorKind::IoError, "cannot write manifest in " + dir.string());
    }
    out << manifest.dump(2) << "\n";
}

std::vector<FeatureStore::Entry> FeatureStore::entries() const {
    std::vector<Entry> out;
    out.reserve(index_.size());
    for (const auto& [key, entry] : index_) out.push_back(entry);
    return out;
}

PaddedBatch pad_batch(const std::vector<TokenMatrix>& matrices) {
    PaddedBatch batch;
    if (matrices.empty()) {
        return batch;
    }
    batch.dim = matrices.front().dim;
    for (const auto& m : matrices) {
        if (m.dim != batch.dim) {
            raise(ErrorKind::DimMismatch, "pad_batch requires a shared feature dimension");
        }
        batch.rows = std::max(batch.rows, m.rows);
    }
    for (const auto& m : matrices) {
        TokenMatrix padded;
        padded.rows = batch.rows;
        padded.dim = batch.dim;
        padded.values.assign(static_cast<std::size_t>(batch.rows) * batch.dim, 0.0f);
        std::copy(m.values.begin(), m.values.end(), padded.values.begin());
        std::vector<bool> mask(batch.rows, false);
        for (std::uint32_t r = 0; r < m.rows; ++r) mask[r] = true;
        batch.items.push_back(std::move(padded));
        batch.masks.push_back(std::move(mask));
    }
    return batch;
}

}  // namespace modfuse
