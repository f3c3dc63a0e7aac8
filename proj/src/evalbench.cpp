#include <scenesmith/evalbench.hpp>
#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>
#include <scenesmith/parallel.hpp>
#include <scenesmith/process.hpp>
#include <scenesmith/random.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace scenesmith {

PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed)
{
    if (mesh.triangles.empty()) throw BenchmarkError("cannot sample an empty mesh");
    std::vector<double> cumulative;
    cumulative.reserve(mesh.triangles.size());
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        cumulative.push_back(total);
    }
    if (!(total > 0.0)) throw BenchmarkError("cannot sample a mesh with zero surface area");

    PointCloud cloud;
    cloud.seed = seed;
    cloud.points.reserve(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double pick = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        if (it == cumulative.end()) --it;
        const auto& t = mesh.triangles[static_cast<size_t>(it - cumulative.begin())];
        const double s = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        cloud.points.push_back((1.0 - s) * mesh.vertices[t[0]] + s * (1.0 - r2) * mesh.vertices[t[1]] +
                               s * r2 * mesh.vertices[t[2]]);
    }
    return cloud;
}

namespace {

constexpr int kLeafSize = 8;

double l1(const Vec3& a, const Vec3& b)
{
    return std::abs(a.x() - b.x()) + std::abs(a.y() - b.y()) + std::abs(a.z() - b.z());
}

} // namespace

L1KdTree::L1KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end())
{
    if (!points_.empty()) build(0, static_cast<int>(points_.size()), 0);
}

int L1KdTree::build(int begin, int end, int depth)
{
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;
    Vec3 lo = points_[begin], hi = points_[begin];
    for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[i]);
        hi = hi.cwiseMax(points_[i]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[mid][axis];
    (void)depth;
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void L1KdTree::search(int node_id, const Vec3& q, double& best) const
{
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) best = std::min(best, l1(q, points_[i]));
        return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    // every point across the split differs by at least |diff| on this axis
    if (std::abs(diff) <= best) search(far, q, best);
}

double L1KdTree::nearest(const Vec3& q) const
{
    if (nodes_.empty()) throw BenchmarkError("nearest neighbour query on an empty point set");
    double best = std::numeric_limits<double>::infinity();
    search(0, q, best);
    return best;
}

namespace {

double directed_mean(const std::vector<Vec3>& from, const std::vector<Vec3>& to)
{
    const L1KdTree tree(to);
    double sum = 0.0;
    for (const auto& p : from) sum += tree.nearest(p);
    return sum / static_cast<double>(from.size());
}

} // namespace

double chamfer_l1(const PointCloud& a, const PointCloud& b)
{
    if (a.points.empty() || b.points.empty()) throw BenchmarkError("chamfer distance needs non-empty clouds");
    return directed_mean(a.points, b.points) + directed_mean(b.points, a.points);
}

std::vector<std::string> select_representative_views(std::span<const Vec3> points,
                                                     std::span<const CameraFrame> frames, std::size_t k)
{
    std::vector<std::pair<std::size_t, std::string>> counts;
    for (const auto& f : frames) {
        std::size_t visible = 0;
        for (const auto& p : points) {
            const Vec3 c = f.rotation * p + f.translation;
            if (!(c.z() > 0.0)) continue;
            const double u = f.fx * c.x() / c.z() + f.cx;
            const double v = f.fy * c.y() / c.z() + f.cy;
            if (u >= 0.0 && u < f.width && v >= 0.0 && v < f.height) ++visible;
        }
        if (visible > 0) counts.emplace_back(visible, f.id);
    }
    if (counts.empty()) throw BenchmarkError("object unobserved");
    std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> out;
    for (size_t i = 0; i < counts.size() && i < k; ++i) out.push_back(counts[i].second);
    return out;
}

namespace {

void require_same_size(const Image& a, const Image& b)
{
    if (a.width != b.width || a.height != b.height || a.empty()) {
        throw BenchmarkError(fmt::format("image dimension mismatch: {}x{} vs {}x{}", a.width, a.height, b.width, b.height));
    }
}

} // namespace

double image_rmse(const Image& a, const Image& b)
{
    require_same_size(a, b);
    const Image& ra = a.channels == b.channels ? a : a.to_rgb();
    const Image rb_storage = a.channels == b.channels ? Image{} : b.to_rgb();
    const Image& rb = a.channels == b.channels ? b : rb_storage;
    double sum = 0.0;
    for (size_t i = 0; i < ra.data.size(); ++i) {
        const double d = (static_cast<double>(ra.data[i]) - static_cast<double>(rb.data[i])) / 255.0;
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(ra.data.size()));
}

std::vector<double> luma(const Image& image)
{
    std::vector<double> out(static_cast<size_t>(image.width) * image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double v;
            if (image.channels == 1) {
                v = image.at(x, y, 0);
            } else {
                v = 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2);
            }
            out[static_cast<size_t>(y) * image.width + x] = v / 255.0;
        }
    }
    return out;
}

namespace {

// Summed-area table with a zero first row and column.
struct Integral {
    int w, h;
    std::vector<double> s;
    Integral(const std::vector<double>& v, int width, int height) : w(width + 1), h(height + 1), s(static_cast<size_t>(w) * h, 0.0)
    {
        for (int y = 0; y < height; ++y) {
            double row = 0.0;
            for (int x = 0; x < width; ++x) {
                row += v[static_cast<size_t>(y) * width + x];
                s[static_cast<size_t>(y + 1) * w + x + 1] = s[static_cast<size_t>(y) * w + x + 1] + row;
            }
        }
    }
    double box(int x, int y, int bw, int bh) const
    {
        auto at = [&](int xx, int yy) { return s[static_cast<size_t>(yy) * w + xx]; };
        return at(x + bw, y + bh) - at(x, y + bh) - at(x + bw, y) + at(x, y);
    }
};

constexpr int kSsimWindow = 8;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

} // namespace

double image_ssim(const Image& a, const Image& b)
{
    require_same_size(a, b);
    const int w = a.width, h = a.height;
    const auto ya = luma(a);
    const auto yb = luma(b);
    std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
    for (size_t i = 0; i < ya.size(); ++i) {
        aa[i] = ya[i] * ya[i];
        bb[i] = yb[i] * yb[i];
        ab[i] = ya[i] * yb[i];
    }
    const Integral ia(ya, w, h), ib(yb, w, h), iaa(aa, w, h), ibb(bb, w, h), iab(ab, w, h);
    // images smaller than the window are scored as a single window
    const int ww = std::min(kSsimWindow, w);
    const int wh = std::min(kSsimWindow, h);
    const double count = static_cast<double>(ww) * wh;
    double total = 0.0;
    int windows = 0;
    for (int y = 0; y + wh <= h; ++y) {
        for (int x = 0; x + ww <= w; ++x) {
            const double ma = ia.box(x, y, ww, wh) / count;
            const double mb = ib.box(x, y, ww, wh) / count;
            const double va = iaa.box(x, y, ww, wh) / count - ma * ma;
            const double vb = ibb.box(x, y, ww, wh) / count - mb * mb;
            const double cov = iab.box(x, y, ww, wh) / count - ma * mb;
            total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
            ++windows;
        }
    }
    return total / windows;
}

double ExternalMetric::operator()(const std::filesystem::path& a, const std::filesystem::path& b) const
{
    const auto res = run_command(command_, {a.string(), b.string()});
    if (res.exit_code != 0) throw BenchmarkError(fmt::format("metric command failed with exit code {}", res.exit_code));
    try {
        return std::stod(res.output);
    } catch (const std::exception&) {
        throw BenchmarkError("metric command printed no number: " + res.output);
    }
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& csv, size_t min_cols)
{
    std::ifstream in(csv);
    if (!in) throw ValidationError("cannot open " + csv.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        size_t start = 0;
        while (true) {
            const size_t comma = line.find(',', start);
            std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            const auto first = cell.find_first_not_of(" \t");
            const auto last = cell.find_last_not_of(" \t");
            cols.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cols.size() < min_cols) throw ValidationError(fmt::format("{}: expected {} columns in '{}'", csv.string(), min_cols, line));
        rows.push_back(std::move(cols));
    }
    return rows;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace

std::vector<SimilarityPair> read_similarity_pairs(const std::filesystem::path& csv)
{
    const auto base = csv.parent_path();
    std::vector<SimilarityPair> out;
    for (const auto& row : read_csv_rows(csv, 3)) {
        if (out.empty() && row[0] == "gt") continue;
        out.push_back({resolve(base, row[0]), resolve(base, row[1]), row[2]});
    }
    return out;
}

MetricReport run_similarity_benchmark(std::span<const SimilarityPair> pairs, std::size_t n, std::uint64_t seed,
                                      std::size_t threads)
{
    MetricReport report;
    report.samples = n;
    report.seed = seed;
    struct Outcome {
        std::optional<double> cd;
        std::string error;
    };
    std::vector<Outcome> outcomes(pairs.size());
    parallel_for(pairs.size(), threads, [&](size_t i) {
        try {
            // both sides share the seed, so identical meshes give identical clouds
            const PointCloud gt = sample_surface(normalize_mesh(load_obj(pairs[i].gt)), n, seed);
            const PointCloud rt = sample_surface(normalize_mesh(load_obj(pairs[i].retrieved)), n, seed);
            outcomes[i].cd = chamfer_l1(gt, rt);
        } catch (const std::exception& e) {
            outcomes[i].error = e.what();
        }
    });

    std::map<std::string, std::pair<std::size_t, double>> per_cat;
    double total = 0.0;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (!outcomes[i].cd) {
            report.excluded.push_back({pairs[i].gt.string(), pairs[i].retrieved.string(), outcomes[i].error});
            continue;
        }
        const double cd = *outcomes[i].cd;
        report.instances.push_back({pairs[i].gt.string(), pairs[i].retrieved.string(), pairs[i].category, cd});
        auto& acc = per_cat[pairs[i].category];
        ++acc.first;
        acc.second += cd;
        total += cd;
    }
    if (report.instances.empty()) return report;
    double class_sum = 0.0;
    for (const auto& [cat, acc] : per_cat) {
        const double mean = acc.second / static_cast<double>(acc.first);
        report.categories.push_back({cat, acc.first, mean});
        class_sum += mean;
    }
    report.avg_cad = total / static_cast<double>(report.instances.size());
    report.avg_class = class_sum / static_cast<double>(report.categories.size());
    return report;
}

json to_json(const MetricReport& r)
{
    json inst = json::array();
    for (const auto& i : r.instances) {
        inst.push_back({{"gt", i.gt}, {"retrieved", i.retrieved}, {"category", i.category}, {"cd_l1", i.cd_l1}});
    }
    json cats = json::array();
    for (const auto& c : r.categories) cats.push_back({{"category", c.category}, {"count", c.count}, {"mean", c.mean}});
    json excl = json::array();
    for (const auto& e : r.excluded) excl.push_back({{"gt", e.gt}, {"retrieved", e.retrieved}, {"error", e.error}});
    json j = {{"instances", inst}, {"categories", cats}, {"excluded", excl}, {"samples", r.samples}, {"seed", r.seed}};
    j["avg_cad"] = r.avg_cad ? json(*r.avg_cad) : json(nullptr);
    j["avg_class"] = r.avg_class ? json(*r.avg_class) : json(nullptr);
    return j;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "-"; }

} // namespace

std::string to_markdown(const MetricReport& r)
{
    std::string head = "| Method | avg/CAD ↓ | avg/class ↓ |";
    std::string rule = "|---|---|---|";
    std::string row = fmt::format("| scenesmith | {} | {} |", cell(r.avg_cad), cell(r.avg_class));
    for (const auto& c : r.categories) {
        head += fmt::format(" {} ↓ |", c.category);
        rule += "---|";
        row += fmt::format(" {:.4f} |", c.mean);
    }
    std::string out = head + "\n" + rule + "\n" + row + "\n";
    out += fmt::format("\n{} pairs, {} samples per mesh, seed {}\n", r.instances.size(), r.samples, r.seed);
    if (!r.excluded.empty()) {
        out += "\nExcluded pairs:\n\n";
        for (const auto& e : r.excluded) out += fmt::format("- {} vs {}: {}\n", e.gt, e.retrieved, e.error);
    }
    return out;
}

std::vector<ImagePair> read_image_pairs(const std::filesystem::path& csv)
{
    const auto base = csv.parent_path();
    std::vector<ImagePair> out;
    for (const auto& row : read_csv_rows(csv, 2)) {
        if (out.empty() && row[0] == "scan") continue;
        out.push_back({resolve(base, row[0]), resolve(base, row[1])});
    }
    return out;
}

ImageReport run_image_benchmark(std::span<const ImagePair> pairs, const ExternalMetric* lpips)
{
    ImageReport report;
    double rmse = 0.0, ssim = 0.0, lp = 0.0;
    for (const auto& p : pairs) {
        const Image a = read_png(p.scan);
        const Image b = read_png(p.render);
        ImageResult res{p.scan.string(), p.render.string(), image_rmse(a, b), image_ssim(a, b), std::nullopt};
        if (lpips) res.lpips = (*lpips)(p.scan, p.render);
        rmse += res.rmse;
        ssim += res.ssim;
        if (res.lpips) lp += *res.lpips;
        report.pairs.push_back(std::move(res));
    }
    if (!pairs.empty()) {
        const double n = static_cast<double>(pairs.size());
        report.rmse = rmse / n;
        report.ssim = ssim / n;
        if (lpips) report.lpips = lp / n;
    }
    return report;
}

json to_json(const ImageReport& r)
{
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json rows = json::array();
    for (const auto& p : r.pairs) {
        rows.push_back({{"scan", p.scan}, {"render", p.render}, {"rmse", p.rmse}, {"ssim", p.ssim}, {"lpips", opt(p.lpips)}});
    }
    return {{"pairs", rows}, {"rmse", opt(r.rmse)}, {"ssim", opt(r.ssim)}, {"lpips", opt(r.lpips)}};
}

std::string to_markdown(const ImageReport& r)
{
    return fmt::format("| Method | RMSE ↓ | SSIM ↑ | LPIPS ↓ |\n|---|---|---|---|\n| scenesmith | {} | {} | {} |\n\n{} pairs\n",
                       cell(r.rmse), cell(r.ssim), cell(r.lpips), r.pairs.size());
}

} // namespace scenesmith
