#pragma once

#include <scenesmith/image.hpp>
#include <scenesmith/retrieval.hpp>
#include <scenesmith/services.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scenesmith {

struct PixelRect {
    int x = 0, y = 0, w = 0, h = 0;
    long area() const { return static_cast<long>(w) * h; }
    bool operator==(const PixelRect&) const = default;
};

/// Largest axis-aligned all-true rectangle (row histograms + monotone stack).
/// Ties keep the first rectangle found scanning bottom rows top to bottom.
PixelRect largest_rectangle(const Mask& mask);

/// Mean Sobel gradient magnitude of the luma (scaled to [0, 1]) over a rectangle.
double mean_sobel(const Image& image, const PixelRect& rect);

/// Decodes {width, height, counts} run lengths over row-major pixels, starting with a run of zeros.
Mask decode_rle_mask(const json& j);
json encode_rle_mask(const Mask& mask);

struct PatchSource {
    std::string id;
    std::string frame_id;
    Mask mask;
    Image frame; // RGB frame the mask was cut from
};

struct MaskPatch {
    std::string id;
    std::string frame_id;
    PixelRect rect;
    double smoothness = 0.0; // lower is smoother
    long area_px = 0;
    double score = 0.0;      // area / (1 + smoothness)
    Vec3 mean_rgb = Vec3::Zero();
    Image pixels;            // RGB content of the rectangle
};

/// Inscribed rectangle per mask; rectangles under min_size on either side are dropped.
/// Returns the best `k` by score (ties by id). Throws MaterialError("no usable patches").
std::vector<MaskPatch> extract_patches(std::span<const PatchSource> sources, size_t k = 4, int min_size = 16);

struct MaterialRecord {
    std::string id;
    std::string category;
    std::filesystem::path dir;
    std::string albedo = "albedo.png";
    std::string roughness, metallic, normal;
    std::vector<std::string> tags;
    EmbeddingMatrix embeddings; // albedo embedding rows

    std::filesystem::path albedo_path() const { return dir / albedo; }
};

json manifest_json(const MaterialRecord& m);
MaterialRecord load_material(const std::filesystem::path& dir);

class MaterialDatabase {
public:
    MaterialDatabase() = default;
    explicit MaterialDatabase(std::vector<MaterialRecord> records);
    static MaterialDatabase load(const std::filesystem::path& root);
    const std::vector<MaterialRecord>& records() const { return records_; }
    const MaterialRecord* find(const std::string& id) const;
    bool empty() const { return records_.empty(); }

private:
    std::vector<MaterialRecord> records_;
};

struct MaterialTrace {
    std::string category;                 // oracle's category
    std::vector<std::string> stage_a;     // up to 10 candidates
    std::vector<ScoredId> stage_b;        // top 3 by embedding similarity
    std::string final_id;
    std::string rationale;
    std::vector<std::string> flags;

    bool subset_chain_holds() const;
};

json to_json(const MaterialTrace& t);

/// Category proposal, embedding re-rank, then confirmation among the top three.
MaterialTrace search_material(std::span<const Embedding> patch_embeddings, const MaterialDatabase& db, Oracle& oracle);

struct SegmentMapping {
    std::map<std::string, std::string> segment_to_patch;
    std::vector<std::string> flags;
};

/// Side-by-side canvas of images on a white background, 4 px apart, top-aligned.
Image stitch_images(std::span<const Image> images);

/// Asks the oracle to map each material segment onto a patch. A single segment with a single
/// patch skips the oracle; unmapped or invalid entries take the top-ranked patch.
SegmentMapping map_segments_to_patches(const AssetRecord& asset, std::span<const MaskPatch> patches, Oracle& oracle);

/// LAB pixel grid. Values sit on a 2^-32 lattice so that adding a lattice offset is exact.
struct AlbedoMap {
    int width = 0;
    int height = 0;
    std::vector<Vec3> lab;
};

double lab_quantize(double v);
AlbedoMap albedo_from_image(const Image& rgb);
Image albedo_to_image(const AlbedoMap& map);
/// Per-channel mean over all pixels.
Vec3 albedo_mean(const AlbedoMap& map);

bool lab_in_gamut(const Vec3& lab);

struct ShiftResult {
    AlbedoMap map;
    Vec3 delta = Vec3::Zero(); // offset added to every pixel
    double clamped_fraction = 0.0;
};

/// Adds (target - mean) to every pixel; optionally clamps to the LAB bounds
/// (L in [0, 100], a and b in [-128, 127]). Throws ValidationError for an out-of-gamut target.
ShiftResult albedo_shift(const AlbedoMap& map, const Vec3& target, bool clamp = true);

struct TargetColor {
    Vec3 rgb = Vec3::Zero(); // consensus in [0, 255]
    Vec3 lab = Vec3::Zero();
    std::vector<std::string> flags;
};

/// Per-patch colour from the oracle, channel-wise median, then sRGB to LAB.
TargetColor infer_target_color(std::span<const MaskPatch> patches, Oracle& oracle);

// ---- scene painting

struct PaintConfig {
    size_t top_k = 4;
    int min_patch = 16;
};

struct PaintResult {
    json assignments; // object id -> {asset, segments: {segment -> {...}}, flags}
};

/// Paints every object with a retrieved asset. Masks are read from `<masks>/<object>/<frame>.png|json`;
/// shifted albedo maps are written to `<out>/<object>/<segment>.png` and referenced relative to `out`.
PaintResult paint_scene(const Scan& scan, const std::filesystem::path& base, const RetrievalResult& retrieval,
                        const std::filesystem::path& masks, const AssetDatabase& assets, const MaterialDatabase& materials,
                        EmbeddingProvider& provider, Oracle& oracle, const PaintConfig& cfg,
                        const std::filesystem::path& out);

} // namespace scenesmith
