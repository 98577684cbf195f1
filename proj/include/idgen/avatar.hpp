#pragma once

#include <cstdint>
#include <vector>

#include "idgen/rng.hpp"
#include "idgen/tensor.hpp"

namespace idgen {

inline constexpr int kCanvas = 24;
inline constexpr int kCrop = 12;
inline constexpr int kStyleBins = 8;
inline constexpr int kAccessoryCount = 3;  // none, hat, glasses
// 4 quantized numeric fields * 8 bins, 3 accessory tokens, 1 padding token
inline constexpr int kVocabSize = 4 * kStyleBins + kAccessoryCount + 1;
inline constexpr int kPadToken = kVocabSize - 1;

struct IdentitySpec {
    float face_hue = 0.0f;      // [0,1)
    float eye_spacing = 0.35f;  // [0.2,0.5] of face width
    float eye_size = 0.1f;      // [0.05,0.15] of face width
    float mouth_curve = 0.0f;   // [-1,1]
    int skin_tone = 0;          // 0..7

    void validate() const;
    bool operator==(const IdentitySpec&) const = default;
};

struct StyleSpec {
    float bg_hue = 0.0f;     // [0,1)
    float cx = 0.5f;         // face center, canvas fractions [0.25,0.75]
    float cy = 0.5f;
    float face_scale = 0.3f; // [0.25,0.45] of canvas
    int accessory = 0;       // 0 none, 1 hat, 2 glasses

    float radius_px() const { return face_scale * kCanvas / 2.0f; }
    void validate() const;   // also checks the face disk fits with a 1px border
    std::vector<int> tokens() const;
    bool operator==(const StyleSpec&) const = default;
};

using Mask = std::vector<std::uint8_t>;  // kCanvas*kCanvas, row-major

struct AvatarSample {
    Tensor image;      // [3,24,24] in [0,1]
    Mask face_mask;
    Tensor face_crop;  // [3,12,12]
    std::vector<Mask> instance_masks;
    std::vector<IdentitySpec> identities;
    std::vector<int> identity_ids;  // pool indices, parallel to identities
    StyleSpec style;

    bool has_face() const { return !identities.empty(); }
};

struct TrainingPair {
    Tensor style_image;  // face region replaced by 0.5 gray
    Tensor face_crop;
    Tensor target;       // original image
    bool has_face = true;
};

IdentitySpec sample_identity(Rng& rng);
StyleSpec sample_style(Rng& rng);
std::vector<IdentitySpec> identity_pool(std::uint64_t seed, int count);

AvatarSample render_avatar(const IdentitySpec& identity, const StyleSpec& style);
TrainingPair make_training_pair(const AvatarSample& sample);
AvatarSample make_multi_human(const std::vector<IdentitySpec>& identities,
                              const std::vector<StyleSpec>& styles);

// Styles for a multi-human canvas whose masks stay disjoint after max-pool
// downsampling by `grid`. Deterministic rejection sampling.
std::vector<StyleSpec> sample_multi_styles(Rng& rng, int n, int grid = 4);

Mask downsample_mask(const Mask& m, int factor);
bool masks_disjoint(const std::vector<Mask>& masks);

// Crop the face disk (nearest resample of its bounding square to 12x12,
// off-disk pixels neutral gray). The disk geometry comes from the style, so
// the same crop works on generated images where no ground-truth mask exists,
// and feature positions land on scale-independent crop pixels.
Tensor crop_face(const Tensor& image, const StyleSpec& style);
Mask face_mask_from_style(const StyleSpec& style);

// Reproducible sample source drawn from a fixed identity pool. Value
// semantics: copying the stream forks it deterministically.
struct DatasetStream {
    static DatasetStream make(std::uint64_t seed, int n, int num_identities,
                              float nonhuman_fraction = 0.0f);
    AvatarSample next();
    bool done() const { return produced_ >= n_; }
    int size() const { return n_; }
    const std::vector<IdentitySpec>& pool() const { return pool_; }

private:
    std::vector<IdentitySpec> pool_;
    Rng rng_{0};
    int n_ = 0;
    int produced_ = 0;
    float nonhuman_fraction_ = 0.0f;
};

}  // namespace idgen
