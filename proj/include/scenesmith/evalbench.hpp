#pragma once

#include <scenesmith/image.hpp>
#include <scenesmith/mesh.hpp>
#include <scenesmith/scene_model.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scenesmith {

struct PointCloud {
    std::vector<Vec3> points;
    std::string source; // mesh id
    std::uint64_t seed = 0;
};

/// Area-proportional uniform surface samples; bit-identical for a given seed.
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

/// Static 3-d tree answering nearest-neighbour queries under the L1 metric.
class L1KdTree {
public:
    explicit L1KdTree(std::span<const Vec3> points);
    /// Smallest |dx| + |dy| + |dz| from q to any stored point.
    double nearest(const Vec3& q) const;

private:
    struct Node {
        int begin, end;    // range in order_
        int axis = -1;     // -1 for leaves
        double split = 0.0;
        int left = -1, right = -1;
    };
    int build(int begin, int end, int depth);
    void search(int node, const Vec3& q, double& best) const;

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
};

/// Mean nearest L1 distance from a to b plus the same from b to a.
double chamfer_l1(const PointCloud& a, const PointCloud& b);

/// Up to `k` frames ranked by how many points reproject inside the image with positive depth
/// (ties by frame id). Throws BenchmarkError("object unobserved") if no frame sees a point.
std::vector<std::string> select_representative_views(std::span<const Vec3> points,
                                                     std::span<const CameraFrame> frames, std::size_t k = 4);

/// Root mean squared difference over all channels, pixel values scaled to [0, 1].
double image_rmse(const Image& a, const Image& b);
/// Mean SSIM over all 8x8 windows of the Rec.601 luma, with L = 1.
double image_ssim(const Image& a, const Image& b);
/// Rec.601 luma in [0, 1], row-major.
std::vector<double> luma(const Image& image);

/// Optional perceptual metric computed by an external command: `<cmd> <image a> <image b>` prints a float.
class ExternalMetric {
public:
    explicit ExternalMetric(std::string command) : command_(std::move(command)) {}
    double operator()(const std::filesystem::path& a, const std::filesystem::path& b) const;

private:
    std::string command_;
};

struct SimilarityPair {
    std::filesystem::path gt;
    std::filesystem::path retrieved;
    std::string category;
};

struct InstanceResult {
    std::string gt;
    std::string retrieved;
    std::string category;
    double cd_l1 = 0.0;
};

struct CategoryResult {
    std::string category;
    std::size_t count = 0;
    double mean = 0.0;
};

struct ExcludedPair {
    std::string gt;
    std::string retrieved;
    std::string error;
};

struct MetricReport {
    std::vector<InstanceResult> instances;
    std::vector<CategoryResult> categories; // sorted by name
    std::optional<double> avg_cad;          // mean over instances
    std::optional<double> avg_class;        // unweighted mean of category means
    std::vector<ExcludedPair> excluded;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

/// Reads `gt,retrieved,category` rows; relative paths resolve against the CSV's directory.
/// A header row starting with "gt" is skipped.
std::vector<SimilarityPair> read_similarity_pairs(const std::filesystem::path& csv);

MetricReport run_similarity_benchmark(std::span<const SimilarityPair> pairs, std::size_t n, std::uint64_t seed,
                                      std::size_t threads = 1);

json to_json(const MetricReport& report);
std::string to_markdown(const MetricReport& report);

struct ImagePair {
    std::filesystem::path scan;
    std::filesystem::path render;
};

struct ImageResult {
    std::string scan;
    std::string render;
    double rmse = 0.0;
    double ssim = 0.0;
    std::optional<double> lpips;
};

struct ImageReport {
    std::vector<ImageResult> pairs;
    std::optional<double> rmse, ssim, lpips; // means
};

/// Reads `scan,render` rows, header optional.
std::vector<ImagePair> read_image_pairs(const std::filesystem::path& csv);
ImageReport run_image_benchmark(std::span<const ImagePair> pairs, const ExternalMetric* lpips = nullptr);
json to_json(const ImageReport& report);
std::string to_markdown(const ImageReport& report);

} // namespace scenesmith
