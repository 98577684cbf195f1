#include "idgen/avatar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace idgen {

static void hsv_to_rgb(float h, float s, float v, float* rgb) {
    h = h - std::floor(h);
    const float c = v * s;
    const float hp = h * 6.0f;
    const float x = c * (1.0f - std::abs(std::fmod(hp, 2.0f) - 1.0f));
    float r = 0, g = 0, b = 0;
    if (hp < 1)      { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else             { r = c; b = x; }
    const float m = v - c;
    rgb[0] = r + m;
    rgb[1] = g + m;
    rgb[2] = b + m;
}

static constexpr float kSkinTones[8][3] = {
    {0.98f, 0.86f, 0.76f}, {0.94f, 0.78f, 0.66f}, {0.88f, 0.68f, 0.55f},
    {0.80f, 0.60f, 0.46f}, {0.70f, 0.50f, 0.38f}, {0.58f, 0.40f, 0.30f},
    {0.46f, 0.31f, 0.23f}, {0.35f, 0.23f, 0.17f},
};

void IdentitySpec::validate() const {
    if (face_hue < 0.0f || face_hue >= 1.0f) throw std::runtime_error("identity: face_hue out of [0,1)");
    if (eye_spacing < 0.2f || eye_spacing > 0.5f) throw std::runtime_error("identity: eye_spacing out of [0.2,0.5]");
    if (eye_size < 0.05f || eye_size > 0.15f) throw std::runtime_error("identity: eye_size out of [0.05,0.15]");
    if (mouth_curve < -1.0f || mouth_curve > 1.0f) throw std::runtime_error("identity: mouth_curve out of [-1,1]");
    if (skin_tone < 0 || skin_tone > 7) throw std::runtime_error("identity: skin_tone out of 0..7");
}

void StyleSpec::validate() const {
    if (bg_hue < 0.0f || bg_hue >= 1.0f) throw std::runtime_error("style: bg_hue out of [0,1)");
    if (cx < 0.25f || cx > 0.75f || cy < 0.25f || cy > 0.75f)
        throw std::runtime_error("style: face_center out of [0.25,0.75]^2");
    if (face_scale < 0.25f || face_scale > 0.45f)
        throw std::runtime_error("style: face_scale out of [0.25,0.45]");
    if (accessory < 0 || accessory >= kAccessoryCount) throw std::runtime_error("style: bad accessory");
    const float r = radius_px();
    // disk must keep a 1px clear border so instance masks never touch it
    if (cx * kCanvas - r < 1.0f || cx * kCanvas + r > kCanvas - 1.0f ||
        cy * kCanvas - r < 1.0f || cy * kCanvas + r > kCanvas - 1.0f)
        throw std::runtime_error("style: face disk does not fit inside canvas");
}

static int quantize(float v, float lo, float hi) {
    int bin = static_cast<int>((v - lo) / (hi - lo) * kStyleBins);
    return std::clamp(bin, 0, kStyleBins - 1);
}

std::vector<int> StyleSpec::tokens() const {
    return {
        0 * kStyleBins + quantize(bg_hue, 0.0f, 1.0f),
        1 * kStyleBins + quantize(cx, 0.25f, 0.75f),
        2 * kStyleBins + quantize(cy, 0.25f, 0.75f),
        3 * kStyleBins + quantize(face_scale, 0.25f, 0.45f),
        4 * kStyleBins + accessory,
    };
}

IdentitySpec sample_identity(Rng& rng) {
    IdentitySpec id;
    id.face_hue = rng.uniform();
    id.eye_spacing = rng.uniform(0.2f, 0.5f);
    id.eye_size = rng.uniform(0.05f, 0.15f);
    id.mouth_curve = rng.uniform(-1.0f, 1.0f);
    id.skin_tone = rng.uniform_int(8);
    return id;
}

static StyleSpec sample_style_scaled(Rng& rng, float scale_lo, float scale_hi) {
    StyleSpec st;
    st.bg_hue = rng.uniform();
    st.face_scale = rng.uniform(scale_lo, scale_hi);
    const float r = st.radius_px();
    const float lo = std::max(0.25f, (r + 1.0f) / kCanvas);
    const float hi = std::min(0.75f, 1.0f - (r + 1.0f) / kCanvas);
    st.cx = rng.uniform(lo, hi);
    st.cy = rng.uniform(lo, hi);
    st.accessory = rng.uniform_int(kAccessoryCount);
    st.validate();
    return st;
}

StyleSpec sample_style(Rng& rng) {
    return sample_style_scaled(rng, 0.25f, 0.45f);
}

std::vector<IdentitySpec> identity_pool(std::uint64_t seed, int count) {
    Rng rng(seed, 1);
    std::vector<IdentitySpec> pool;
    pool.reserve(count);
    for (int i = 0; i < count; ++i) pool.push_back(sample_identity(rng));
    return pool;
}

namespace {

struct Disk {
    float cx, cy, r;  // pixel coordinates
    bool contains(float x, float y) const {
        const float dx = x - cx, dy = y - cy;
        return dx * dx + dy * dy <= r * r;
    }
};

Disk face_disk(const StyleSpec& st) {
    return {st.cx * kCanvas, st.cy * kCanvas, st.radius_px()};
}

void set_px(Tensor& img, int x, int y, const float* rgb) {
    for (int c = 0; c < 3; ++c) (*img.data)[(c * kCanvas + y) * kCanvas + x] = rgb[c];
}

// Face content at a canvas point, or false when the point is outside the
// disk. Pure in (point - center, r, identity), so equal identities at
// integer-offset placements produce exact translates.
bool face_pixel(float x, float y, const Disk& d, const IdentitySpec& id, bool glasses,
                float* rgb) {
    if (!d.contains(x, y)) return false;
    const float dx = x - d.cx, dy = y - d.cy;

    float skin[3], tint[3];
    hsv_to_rgb(id.face_hue, 0.6f, 0.9f, tint);
    for (int c = 0; c < 3; ++c) skin[c] = 0.75f * kSkinTones[id.skin_tone][c] + 0.25f * tint[c];
    rgb[0] = skin[0]; rgb[1] = skin[1]; rgb[2] = skin[2];

    const float ex = id.eye_spacing * d.r;
    const float ey = -0.30f * d.r;
    // floor keeps eyes visible at the smallest face scale
    const float re = std::max(id.eye_size * 2.0f * d.r, 0.8f);
    const float dl = (dx + ex) * (dx + ex) + (dy - ey) * (dy - ey);
    const float dr = (dx - ex) * (dx - ex) + (dy - ey) * (dy - ey);
    if (dl <= re * re || dr <= re * re) {
        rgb[0] = 0.08f; rgb[1] = 0.08f; rgb[2] = 0.10f;
        return true;
    }
    if (glasses) {
        const float rg = re + 0.9f;
        const float band = 0.6f;
        const bool on_left = std::abs(std::sqrt(dl) - rg) <= band;
        const bool on_right = std::abs(std::sqrt(dr) - rg) <= band;
        const bool bridge = std::abs(dy - ey) <= 0.5f && std::abs(dx) <= std::max(ex - rg, 0.0f);
        if (on_left || on_right || bridge) {
            rgb[0] = 0.15f; rgb[1] = 0.15f; rgb[2] = 0.18f;
            return true;
        }
    }
    const float wm = 0.45f * d.r;
    if (std::abs(dx) <= wm) {
        const float t = dx / wm;
        const float my = 0.45f * d.r + id.mouth_curve * 0.22f * d.r * (t * t - 0.5f);
        if (std::abs(dy - my) <= 0.55f) {
            rgb[0] = 0.55f; rgb[1] = 0.15f; rgb[2] = 0.15f;
        }
    }
    return true;
}

void draw_hat(Tensor& img, const StyleSpec& st) {
    const Disk d = face_disk(st);
    float hat[3];
    hsv_to_rgb(st.bg_hue + 0.5f, 0.55f, 0.5f, hat);
    for (int y = 0; y < kCanvas; ++y) {
        for (int x = 0; x < kCanvas; ++x) {
            const float px = x + 0.5f, py = y + 0.5f;
            if (std::abs(px - d.cx) <= 0.9f * d.r && py >= d.cy - d.r - 2.4f && py < d.cy - d.r)
                set_px(img, x, y, hat);
        }
    }
}

void draw_face(Tensor& img, Mask& mask, const IdentitySpec& id, const StyleSpec& st) {
    const Disk d = face_disk(st);
    const bool glasses = st.accessory == 2;
    mask.assign(kCanvas * kCanvas, 0);
    float rgb[3];
    for (int y = 0; y < kCanvas; ++y) {
        for (int x = 0; x < kCanvas; ++x) {
            if (face_pixel(x + 0.5f, y + 0.5f, d, id, glasses, rgb)) {
                set_px(img, x, y, rgb);
                mask[y * kCanvas + x] = 1;
            }
        }
    }
}

Tensor background(float bg_hue) {
    float bg[3];
    hsv_to_rgb(bg_hue, 0.30f, 0.85f, bg);
    Tensor img = Tensor::zeros({3, kCanvas, kCanvas});
    for (int c = 0; c < 3; ++c)
        std::fill_n(img.data->begin() + static_cast<std::size_t>(c) * kCanvas * kCanvas,
                    kCanvas * kCanvas, bg[c]);
    return img;
}

}  // namespace

Tensor crop_face(const Tensor& image, const StyleSpec& style) {
    const Disk d = face_disk(style);
    Tensor crop = Tensor::full({3, kCrop, kCrop}, 0.5f);
    for (int i = 0; i < kCrop; ++i) {
        const float sy = d.cy + ((i + 0.5f) / kCrop * 2.0f - 1.0f) * d.r;
        const int py = std::clamp(static_cast<int>(sy), 0, kCanvas - 1);
        for (int j = 0; j < kCrop; ++j) {
            const float sx = d.cx + ((j + 0.5f) / kCrop * 2.0f - 1.0f) * d.r;
            const int px = std::clamp(static_cast<int>(sx), 0, kCanvas - 1);
            if (d.contains(px + 0.5f, py + 0.5f))
                for (int c = 0; c < 3; ++c)
                    (*crop.data)[(c * kCrop + i) * kCrop + j] =
                        (*image.data)[(c * kCanvas + py) * kCanvas + px];
        }
    }
    return crop;
}

AvatarSample render_avatar(const IdentitySpec& identity, const StyleSpec& style) {
    identity.validate();
    style.validate();
    AvatarSample s;
    s.style = style;
    s.identities = {identity};
    s.identity_ids = {-1};
    s.image = background(style.bg_hue);
    if (style.accessory == 1) draw_hat(s.image, style);
    Mask mask;
    draw_face(s.image, mask, identity, style);
    s.face_mask = mask;
    s.instance_masks = {mask};
    s.face_crop = crop_face(s.image, style);
    return s;
}

TrainingPair make_training_pair(const AvatarSample& sample) {
    if (sample.identities.size() > 1)
        throw std::runtime_error("make_training_pair: multi-identity sample");
    TrainingPair p;
    p.target = sample.image;
    p.style_image = sample.image.clone();
    p.has_face = sample.has_face();
    if (p.has_face) {
        for (int y = 0; y < kCanvas; ++y)
            for (int x = 0; x < kCanvas; ++x)
                if (sample.face_mask[y * kCanvas + x])
                    for (int c = 0; c < 3; ++c)
                        (*p.style_image.data)[(c * kCanvas + y) * kCanvas + x] = 0.5f;
        p.face_crop = sample.face_crop;
    } else {
        p.face_crop = Tensor::zeros({3, kCrop, kCrop});
    }
    return p;
}

AvatarSample make_multi_human(const std::vector<IdentitySpec>& identities,
                              const std::vector<StyleSpec>& styles) {
    const int n = static_cast<int>(identities.size());
    if (n < 2 || n > 3) throw std::runtime_error("make_multi_human: need 2 or 3 identities");
    if (styles.size() != identities.size())
        throw std::runtime_error("make_multi_human: identities/styles length mismatch");
    for (const auto& id : identities) id.validate();
    for (const auto& st : styles) st.validate();

    AvatarSample s;
    s.style = styles[0];
    s.identities = identities;
    s.identity_ids.assign(n, -1);
    s.image = background(styles[0].bg_hue);
    for (const StyleSpec& st : styles)
        if (st.accessory == 1) draw_hat(s.image, st);
    s.instance_masks.resize(n);
    for (int i = 0; i < n; ++i)
        draw_face(s.image, s.instance_masks[i], identities[i], styles[i]);
    if (!masks_disjoint(s.instance_masks))
        throw std::runtime_error("make_multi_human: overlapping placements");
    s.face_mask = s.instance_masks[0];
    s.face_crop = crop_face(s.image, styles[0]);
    return s;
}

Mask face_mask_from_style(const StyleSpec& style) {
    const Disk d = face_disk(style);
    Mask m(static_cast<std::size_t>(kCanvas) * kCanvas, 0);
    for (int y = 0; y < kCanvas; ++y)
        for (int x = 0; x < kCanvas; ++x)
            if (d.contains(x + 0.5f, y + 0.5f)) m[y * kCanvas + x] = 1;
    return m;
}

Mask downsample_mask(const Mask& m, int factor) {
    const int out = kCanvas / factor;
    Mask d(static_cast<std::size_t>(out) * out, 0);
    for (int y = 0; y < kCanvas; ++y)
        for (int x = 0; x < kCanvas; ++x)
            if (m[y * kCanvas + x]) d[(y / factor) * out + (x / factor)] = 1;
    return d;
}

bool masks_disjoint(const std::vector<Mask>& masks) {
    if (masks.empty()) return true;
    std::vector<int> count(masks[0].size(), 0);
    for (const Mask& m : masks)
        for (std::size_t i = 0; i < m.size(); ++i) count[i] += m[i];
    for (int c : count)
        if (c > 1) return false;
    return true;
}

std::vector<StyleSpec> sample_multi_styles(Rng& rng, int n, int grid) {
    if (n < 2 || n > 3) throw std::runtime_error("sample_multi_styles: n must be 2 or 3");
    for (int attempt = 0; attempt < 500; ++attempt) {
        std::vector<StyleSpec> styles;
        const float bg = rng.uniform();
        for (int i = 0; i < n; ++i) {
            StyleSpec st;
            st.bg_hue = bg;
            st.face_scale = rng.uniform(0.25f, 0.30f);
            const float r = st.radius_px();
            const float m = (r + 1.0f) / kCanvas;
            if (n == 2) {
                // left / right halves, clear of the block boundary at x=12
                st.cx = (i == 0) ? rng.uniform(std::max(0.25f, m), (11.0f - r) / kCanvas)
                                 : rng.uniform((13.0f + r) / kCanvas, std::min(0.75f, 1.0f - m));
                st.cy = rng.uniform(std::max(0.25f, m), std::min(0.75f, 1.0f - m));
            } else {
                // two on top, one below
                const float ylo = std::max(0.25f, m);
                if (i < 2) {
                    st.cx = (i == 0) ? rng.uniform(std::max(0.25f, m), (11.0f - r) / kCanvas)
                                     : rng.uniform((13.0f + r) / kCanvas, std::min(0.75f, 1.0f - m));
                    st.cy = rng.uniform(ylo, (11.0f - r) / kCanvas);
                } else {
                    st.cx = rng.uniform(0.4f, 0.6f);
                    st.cy = rng.uniform((13.0f + r) / kCanvas, std::min(0.75f, 1.0f - m));
                }
            }
            st.accessory = rng.uniform_int(kAccessoryCount);
            st.validate();
            styles.push_back(st);
        }
        // verify full-resolution and pooled disjointness before accepting
        std::vector<Mask> masks(n);
        Tensor scratch = Tensor::zeros({3, kCanvas, kCanvas});
        IdentitySpec probe;
        for (int i = 0; i < n; ++i) draw_face(scratch, masks[i], probe, styles[i]);
        std::vector<Mask> pooled;
        for (const Mask& mk : masks) pooled.push_back(downsample_mask(mk, grid));
        if (masks_disjoint(masks) && masks_disjoint(pooled)) return styles;
    }
    throw std::runtime_error("sample_multi_styles: could not place disjoint faces");
}

static AvatarSample render_pattern(Rng& rng, const StyleSpec& style) {
    AvatarSample s;
    s.style = style;
    s.image = Tensor::zeros({3, kCanvas, kCanvas});
    float c1[3], c2[3];
    hsv_to_rgb(rng.uniform(), 0.5f, 0.8f, c1);
    hsv_to_rgb(rng.uniform(), 0.5f, 0.4f, c2);
    const int w = 2 + rng.uniform_int(4);
    const int orient = rng.uniform_int(3);
    for (int y = 0; y < kCanvas; ++y)
        for (int x = 0; x < kCanvas; ++x) {
            const int k = (orient == 0) ? x : (orient == 1) ? y : x + y;
            const float* c = ((k / w) % 2 == 0) ? c1 : c2;
            set_px(s.image, x, y, c);
        }
    s.face_mask.assign(kCanvas * kCanvas, 0);
    s.face_crop = Tensor::zeros({3, kCrop, kCrop});
    return s;
}

DatasetStream DatasetStream::make(std::uint64_t seed, int n, int num_identities,
                                  float nonhuman_fraction) {
    if (n <= 0) throw std::runtime_error("dataset_stream: n must be positive");
    if (num_identities < 2) throw std::runtime_error("dataset_stream: need at least 2 identities");
    DatasetStream s;
    s.pool_ = identity_pool(seed, num_identities);
    s.rng_ = Rng(seed, 2);
    s.n_ = n;
    s.nonhuman_fraction_ = nonhuman_fraction;
    return s;
}

AvatarSample DatasetStream::next() {
    if (done()) throw std::runtime_error("dataset_stream: exhausted");
    ++produced_;
    const bool nonhuman = nonhuman_fraction_ > 0.0f && rng_.uniform() < nonhuman_fraction_;
    const int id_idx = rng_.uniform_int(static_cast<int>(pool_.size()));
    StyleSpec style = sample_style(rng_);
    if (nonhuman) return render_pattern(rng_, style);
    AvatarSample s = render_avatar(pool_[id_idx], style);
    s.identity_ids = {id_idx};
    return s;
}

}  // namespace idgen
