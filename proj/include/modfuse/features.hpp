#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modfuse/corpus.hpp"

namespace modfuse {

// Row-major float32 token sequence for one (clip, modality). Storage is
// 32-bit; compute happens in 64-bit (see to_eigen).
struct TokenMatrix {
    std::uint32_t rows = 0;
    std::uint32_t dim = 0;
    std::vector<float> values;  // rows * dim, row-major

    Eigen::MatrixXd to_eigen() const;
    static TokenMatrix from_eigen(const Eigen::MatrixXd& m);

    bool operator==(const TokenMatrix&) const = default;
};

// MTNS binary tensor file, little-endian:
//   magic 'M''T''N''S' | u8 version=1 | u8 dtype=1 (float32) | u8 rank |
//   u8 reserved=0 | rank x u32 dims | payload row-major float32
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

Tensor read_tensor_bytes(const std::vector<std::uint8_t>& bytes, const std::string& origin);
std::vector<std::uint8_t> write_tensor_bytes(const Tensor& tensor);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

TokenMatrix read_token_matrix(const std::filesystem::path& path);
void write_token_matrix(const std::filesystem::path& path, const TokenMatrix& matrix);

// Maps (clip, modality) to a token matrix. Two backings share the type: an
// in-memory store filled by the generator, and a manifest-backed store whose
// fetch reads MTNS files (preload() pulls everything into memory once).
// After loading/preloading the store is read-only and safe to share.
class FeatureStore {
  public:
    struct Entry {
        std::string clip;
        Modality modality;
        std::string path;  // relative to the manifest directory; empty for in-memory
        std::uint32_t rows = 0;
        std::uint32_t dim = 0;
    };

    FeatureStore() = default;

    static FeatureStore load_manifest(const std::filesystem::path& manifest_path);

    void add(const std::string& clip, Modality modality, TokenMatrix matrix);
    bool has(const std::string& clip, Modality modality) const;
    TokenMatrix fetch(const std::string& clip, Modality modality) const;

    // Reads every manifest entry into memory so later fetches are pure reads.
    void preload();

    // Writes <dir>/features/*.mtns plus <dir>/manifest.json. Deterministic:
    // entries sorted by (clip, modality), fixed file naming.
    void save(const std::filesystem::path& dir) const;

    std::vector<Entry> entries() const;
    std::size_t size() const { return index_.size(); }

  private:
    using Key = std::pair<std::string, Modality>;

    std::map<Key, Entry> index_;
    std::map<Key, TokenMatrix> cache_;
    std::filesystem::path base_dir_;
};

struct PaddedBatch {
    std::uint32_t rows = 0;  // padded row count (max over items)
    std::uint32_t dim = 0;
    std::vector<TokenMatrix> items;           // each rows x dim, zero-padded
    std::vector<std::vector<bool>> masks;     // per item, per row validity
};

PaddedBatch pad_batch(const std::vector<TokenMatrix>& matrices);

}  // namespace modfuse
