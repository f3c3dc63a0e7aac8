#pragma once

#include <scenesmith/image.hpp>
#include <scenesmith/scene_model.hpp>
#include <scenesmith/services.hpp>

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scenesmith {

using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// "SSEM" embedding file: magic, u32 rows, u32 cols, then row-major little-endian float32.
EmbeddingMatrix read_ssem(const std::filesystem::path& path);
void write_ssem(const std::filesystem::path& path, const EmbeddingMatrix& rows);

struct AssetView {
    std::string image; // relative to the asset directory
    json camera;       // free-form camera description
};

struct MaterialSegment {
    std::string id;
    int first_triangle = 0; // [first, last)
    int last_triangle = 0;
    std::string view;       // representative view image, relative to the asset directory
};

struct AssetRecord {
    std::string id;
    Category category = Category::chair;
    std::string subcategory;
    std::filesystem::path dir;
    std::string mesh = "mesh.obj";
    std::vector<AssetView> views;
    EmbeddingMatrix embeddings; // one unit row per view
    std::vector<MaterialSegment> segments;
    bool articulated = false;
    json joints = json::array();
    std::string front_axis = "+Y";

    std::filesystem::path mesh_path() const { return dir / mesh; }
};

json manifest_json(const AssetRecord& asset);

/// Loads `<dir>/manifest.json` and `<dir>/embeddings.bin` and checks the record invariants:
/// unit rows, one row per view, and segments that partition the mesh triangles.
AssetRecord load_asset(const std::filesystem::path& dir);

/// Read-only collection of assets, ordered by id.
class AssetDatabase {
public:
    AssetDatabase() = default;
    explicit AssetDatabase(std::vector<AssetRecord> assets);
    /// Every subdirectory holding a manifest.json is an asset.
    static AssetDatabase load(const std::filesystem::path& root);

    const std::vector<AssetRecord>& assets() const { return assets_; }
    const AssetRecord* find(const std::string& id) const;
    const AssetRecord& at(const std::string& id) const;

private:
    std::vector<AssetRecord> assets_;
    std::map<std::string, size_t> index_;
};

struct ScoredId {
    std::string id;
    double score = 0.0;
    bool operator==(const ScoredId&) const = default;
};

/// Subcategory matches, else category matches (sorted ids). Throws RetrievalError when empty.
std::vector<std::string> semantic_filter(const ObjectNode& object, const AssetDatabase& db);

/// Cosine similarity; zero vectors score 0.
double cosine(const Embedding& a, const Embedding& b);

/// score(asset) = mean over queries of max over the asset's view rows of the cosine.
double view_score(std::span<const Embedding> queries, const EmbeddingMatrix& views);

/// Highest `keep` candidates by view_score, ties broken by id.
std::vector<ScoredId> visual_rank(std::span<const Embedding> queries, std::span<const std::string> candidates,
                                  const AssetDatabase& db, size_t keep = 10);

/// Bytes of one crop: the crop's own image if given, else the bbox cut from the frame image, PNG-encoded.
std::vector<std::uint8_t> crop_bytes(const CropRef& crop, const Scan& scan, const std::filesystem::path& base);

/// Embeds each crop; provider failures are rethrown naming the crop.
std::vector<Embedding> embed_crops(const ObjectNode& object, const Scan& scan, const std::filesystem::path& base,
                                   EmbeddingProvider& provider);

/// Renders an asset posed in a box, as seen from a frame, cut to a crop rectangle. Returns PNG bytes.
class Renderer {
public:
    virtual ~Renderer() = default;
    virtual std::vector<std::uint8_t> render(const AssetRecord& asset, const OrientedBox& pose,
                                             const CameraFrame& frame, const CropRef& crop) = 0;
};

/// Runs `<command> <request.json> <out.png>`; the request holds the mesh path, pose, camera and crop.
class SubprocessRenderer : public Renderer {
public:
    SubprocessRenderer(std::string command, std::filesystem::path work_dir);
    std::vector<std::uint8_t> render(const AssetRecord& asset, const OrientedBox& pose, const CameraFrame& frame,
                                     const CropRef& crop) override;

private:
    std::string command_;
    std::filesystem::path work_dir_;
};

struct RetrievalTrace {
    std::string object_id;
    std::vector<std::string> members; // objects sharing this retrieval
    std::string query = "crops";      // "crops" or "cluster-mean"
    std::vector<std::string> stage1_pool;
    std::vector<ScoredId> stage2_top;
    std::vector<ScoredId> stage3_top;
    std::string final_id;
    std::string rationale;
    bool pose_stage_skipped = false;
    std::vector<std::string> notes;

    /// final in stage3 in stage2 in stage1.
    bool subset_chain_holds() const;
};

json to_json(const RetrievalTrace& trace);
RetrievalTrace retrieval_trace_from_json(const json& j);

/// Re-scores the top list by rendering each candidate into the frames that observed the object.
/// Without a renderer, returns the first four entries and marks the trace.
/// `queries` are the embeddings scored against the renders (normally the object's crop embeddings).
std::vector<ScoredId> pose_aware_rank(const ObjectNode& object, std::span<const Embedding> queries,
                                      std::span<const ScoredId> top10, const Scan& scan, const AssetDatabase& db,
                                      EmbeddingProvider& provider, Renderer* renderer, RetrievalTrace& trace,
                                      size_t keep = 4);

/// Asks the oracle to choose among the top four; an answer outside the list falls back to rank 1.
void contextual_select(const ObjectNode& object, std::span<const ScoredId> top4, const AssetDatabase& db,
                       Oracle& oracle, RetrievalTrace& trace);

// ---- identical-object clustering

struct KMeansResult {
    std::vector<int> labels;
    EmbeddingMatrix centroids;
    double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeds; best of `restarts` by inertia.
KMeansResult kmeans(const EmbeddingMatrix& points, int k, std::uint64_t seed, int restarts = 10, int max_iters = 100,
                    double tol = 1e-8);

/// Mean silhouette (Euclidean). Points in singleton clusters contribute 0.
double silhouette_score(const EmbeddingMatrix& points, std::span<const int> labels);

/// Chooses k in [2, min(n-1, 10)] by mean silhouette (smallest k on ties). n < 3 yields one cluster,
/// as do identical features.
std::vector<int> select_clusters(const EmbeddingMatrix& points, std::uint64_t seed);

/// Mode bin of a 4x4x4 RGB histogram, ties to the lowest bin index.
int dominant_color_bin(std::span<const Image> crops);

/// Groups objects of one subcategory into identical-object clusters (indices into `features`),
/// splitting KMeans clusters by dominant colour bin. Cluster order follows first member index.
std::vector<std::vector<size_t>> cluster_identical(const EmbeddingMatrix& features, std::span<const int> color_bins,
                                                   std::uint64_t seed);

// ---- whole-scene retrieval

struct RetrievalConfig {
    size_t stage2_keep = 10;
    size_t stage3_keep = 4;
    bool cluster = true;
    std::uint64_t kmeans_seed = 0;
    size_t threads = 1;
};

struct RetrievalResult {
    std::vector<RetrievalTrace> traces;            // one per cluster, by first member
    std::map<std::string, std::string> assignment; // object id -> asset id
    std::vector<std::vector<std::string>> clusters;
};

json to_json(const RetrievalResult& result);
RetrievalResult retrieval_result_from_json(const json& j);

/// Clusters identical objects, then runs the three stages once per cluster.
RetrievalResult retrieve_scene(const Scan& scan, const std::filesystem::path& base, const AssetDatabase& db,
                               EmbeddingProvider& provider, Oracle& oracle, Renderer* renderer,
                               const RetrievalConfig& cfg);

} // namespace scenesmith
