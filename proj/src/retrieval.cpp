#include <scenesmith/retrieval.hpp>
#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>
#include <scenesmith/mesh.hpp>
#include <scenesmith/parallel.hpp>
#include <scenesmith/process.hpp>
#include <scenesmith/random.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

namespace fs = std::filesystem;

namespace scenesmith {

namespace {

constexpr char kSsemMagic[4] = {'S', 'S', 'E', 'M'};

std::uint32_t read_u32_le(const std::uint8_t* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

} // namespace

EmbeddingMatrix read_ssem(const fs::path& path)
{
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kSsemMagic, 4) != 0) {
        throw ValidationError(path.string() + ": not an SSEM embedding file");
    }
    const std::uint32_t rows = read_u32_le(bytes.data() + 4);
    const std::uint32_t cols = read_u32_le(bytes.data() + 8);
    if (bytes.size() != 12 + static_cast<size_t>(rows) * cols * 4) {
        throw ValidationError(fmt::format("{}: expected {}x{} floats", path.string(), rows, cols));
    }
    EmbeddingMatrix m(rows, cols);
    const std::uint8_t* p = bytes.data() + 12;
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c, p += 4) m(r, c) = std::bit_cast<float>(read_u32_le(p));
    }
    return m;
}

void write_ssem(const fs::path& path, const EmbeddingMatrix& rows)
{
    std::vector<std::uint8_t> out(kSsemMagic, kSsemMagic + 4);
    put_u32_le(out, static_cast<std::uint32_t>(rows.rows()));
    put_u32_le(out, static_cast<std::uint32_t>(rows.cols()));
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < rows.cols(); ++c) put_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(rows(r, c))));
    }
    write_file_bytes(path, out);
}

json manifest_json(const AssetRecord& a)
{
    json views = json::array();
    for (const auto& v : a.views) views.push_back({{"image", v.image}, {"camera", v.camera}});
    json segs = json::array();
    for (const auto& s : a.segments) {
        segs.push_back({{"id", s.id}, {"triangles", {s.first_triangle, s.last_triangle}}, {"view", s.view}});
    }
    return {{"id", a.id},
            {"category", to_string(a.category)},
            {"subcategory", a.subcategory},
            {"mesh", a.mesh},
            {"views", views},
            {"material_segments", segs},
            {"articulated", a.articulated},
            {"joints", a.joints},
            {"front_axis", a.front_axis}};
}

AssetRecord load_asset(const fs::path& dir)
{
    const auto where = dir.string();
    AssetRecord a;
    a.dir = dir;
    try {
        const json m = json::parse(read_text_file(dir / "manifest.json"));
        a.id = m.at("id").get<std::string>();
        const auto cat = parse_category(m.at("category").get<std::string>());
        if (!cat) throw ValidationError("unknown category " + m.at("category").get<std::string>());
        a.category = *cat;
        a.subcategory = m.value("subcategory", "");
        a.mesh = m.value("mesh", "mesh.obj");
        for (const auto& v : m.value("views", json::array())) {
            a.views.push_back({v.at("image").get<std::string>(), v.value("camera", json::object())});
        }
        for (const auto& s : m.value("material_segments", json::array())) {
            const auto& tri = s.at("triangles");
            a.segments.push_back({s.at("id").get<std::string>(), tri.at(0).get<int>(), tri.at(1).get<int>(),
                                  s.value("view", "")});
        }
        a.articulated = m.value("articulated", false);
        a.joints = m.value("joints", json::array());
        a.front_axis = m.value("front_axis", "+Y");
    } catch (const json::exception& e) {
        throw ValidationError(where + "/manifest.json: " + e.what());
    }
    a.embeddings = read_ssem(dir / "embeddings.bin");
    if (static_cast<size_t>(a.embeddings.rows()) != a.views.size()) {
        throw ValidationError(fmt::format("{}: {} embedding rows for {} views", where, a.embeddings.rows(), a.views.size()));
    }
    for (Eigen::Index r = 0; r < a.embeddings.rows(); ++r) {
        if (std::abs(a.embeddings.row(r).norm() - 1.0) > 1e-6) {
            throw ValidationError(fmt::format("{}: embedding row {} is not unit norm", where, r));
        }
    }
    if (!a.segments.empty()) {
        const int triangles = static_cast<int>(load_obj(a.mesh_path()).triangles.size());
        auto segs = a.segments;
        std::sort(segs.begin(), segs.end(), [](const auto& x, const auto& y) { return x.first_triangle < y.first_triangle; });
        int next = 0;
        for (const auto& s : segs) {
            if (s.first_triangle != next || s.last_triangle <= s.first_triangle) {
                throw ValidationError(fmt::format("{}: material segments do not partition the triangles at segment {}", where, s.id));
            }
            next = s.last_triangle;
        }
        if (next != triangles) {
            throw ValidationError(fmt::format("{}: material segments cover {} of {} triangles", where, next, triangles));
        }
    }
    return a;
}

AssetDatabase::AssetDatabase(std::vector<AssetRecord> assets) : assets_(std::move(assets))
{
    std::sort(assets_.begin(), assets_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (size_t i = 0; i < assets_.size(); ++i) {
        if (!index_.emplace(assets_[i].id, i).second) throw ValidationError("duplicate asset id " + assets_[i].id);
    }
}

AssetDatabase AssetDatabase::load(const fs::path& root)
{
    if (!fs::is_directory(root)) throw ValidationError("asset database not found: " + root.string());
    std::vector<AssetRecord> assets;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) assets.push_back(load_asset(entry.path()));
    }
    return AssetDatabase(std::move(assets));
}

const AssetRecord* AssetDatabase::find(const std::string& id) const
{
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &assets_[it->second];
}

const AssetRecord& AssetDatabase::at(const std::string& id) const
{
    if (const auto* a = find(id)) return *a;
    throw RetrievalError("unknown asset " + id);
}

std::vector<std::string> semantic_filter(const ObjectNode& object, const AssetDatabase& db)
{
    std::vector<std::string> by_sub, by_cat;
    for (const auto& a : db.assets()) {
        if (a.category != object.category) continue;
        by_cat.push_back(a.id);
        if (!object.subcategory.empty() && a.subcategory == object.subcategory) by_sub.push_back(a.id);
    }
    if (!by_sub.empty()) return by_sub;
    if (by_cat.empty()) throw RetrievalError(fmt::format("no assets for category {}", to_string(object.category)));
    return by_cat;
}

double cosine(const Embedding& a, const Embedding& b)
{
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

double view_score(std::span<const Embedding> queries, const EmbeddingMatrix& views)
{
    if (queries.empty() || views.rows() == 0) return -1.0;
    double total = 0.0;
    for (const auto& q : queries) {
        double best = -1.0;
        for (Eigen::Index r = 0; r < views.rows(); ++r) best = std::max(best, cosine(q, views.row(r).transpose()));
        total += best;
    }
    return total / static_cast<double>(queries.size());
}

namespace {

void rank_and_trim(std::vector<ScoredId>& list, size_t keep)
{
    std::sort(list.begin(), list.end(), [](const ScoredId& a, const ScoredId& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    if (list.size() > keep) list.resize(keep);
}

} // namespace

std::vector<ScoredId> visual_rank(std::span<const Embedding> queries, std::span<const std::string> candidates,
                                  const AssetDatabase& db, size_t keep)
{
    if (queries.empty()) throw RetrievalError("visual ranking needs at least one crop");
    if (candidates.empty()) throw RetrievalError("visual ranking needs at least one candidate");
    std::vector<ScoredId> out;
    for (const auto& id : candidates) out.push_back({id, view_score(queries, db.at(id).embeddings)});
    rank_and_trim(out, keep);
    return out;
}

std::vector<std::uint8_t> crop_bytes(const CropRef& crop, const Scan& scan, const fs::path& base)
{
    if (!crop.image.empty()) return read_file_bytes(base / crop.image);
    const CameraFrame* frame = nullptr;
    for (const auto& f : scan.frames) {
        if (f.id == crop.frame_id) frame = &f;
    }
    if (!frame || frame->image.empty()) throw RetrievalError("crop references frame without an image: " + crop.frame_id);
    const Image img = read_png(base / frame->image);
    const auto& b = crop.bbox_px;
    const Image cut = img.crop(b[0], b[1], b[2], b[3]);
    if (cut.empty()) throw RetrievalError("crop rectangle is empty in frame " + crop.frame_id);
    return encode_png(cut);
}

std::vector<Embedding> embed_crops(const ObjectNode& object, const Scan& scan, const fs::path& base,
                                   EmbeddingProvider& provider)
{
    std::vector<Embedding> out;
    for (size_t i = 0; i < object.crops.size(); ++i) {
        try {
            out.push_back(provider.embed(crop_bytes(object.crops[i], scan, base)));
        } catch (const ServiceError& e) {
            throw ServiceError(fmt::format("embedding crop {}#{} ({}): {}", object.id, i, object.crops[i].frame_id, e.what()));
        }
    }
    return out;
}

SubprocessRenderer::SubprocessRenderer(std::string command, fs::path work_dir)
    : command_(std::move(command))
    , work_dir_(std::move(work_dir))
{
}

std::vector<std::uint8_t> SubprocessRenderer::render(const AssetRecord& asset, const OrientedBox& pose,
                                                     const CameraFrame& frame, const CropRef& crop)
{
    const json request = {{"mesh", fs::absolute(asset.mesh_path()).string()},
                          {"asset", asset.id},
                          {"pose", to_json(pose)},
                          {"camera", to_json(frame)},
                          {"crop", {crop.bbox_px[0], crop.bbox_px[1], crop.bbox_px[2], crop.bbox_px[3]}}};
    const std::string text = request.dump();
    const std::string key = sha256_hex(text).substr(0, 16);
    const fs::path req = work_dir_ / ("render-" + key + ".json");
    const fs::path out = work_dir_ / ("render-" + key + ".png");
    write_text_file(req, text);
    const auto res = run_command(command_, {req.string(), out.string()});
    if (res.exit_code != 0 || !fs::exists(out)) {
        throw RetrievalError(fmt::format("renderer failed for {} (exit {})", asset.id, res.exit_code));
    }
    return read_file_bytes(out);
}

bool RetrievalTrace::subset_chain_holds() const
{
    auto contains = [](const auto& list, const std::string& id) {
        return std::any_of(list.begin(), list.end(), [&](const auto& x) {
            if constexpr (std::is_same_v<std::decay_t<decltype(x)>, ScoredId>) return x.id == id;
            else return x == id;
        });
    };
    if (!contains(stage3_top, final_id)) return false;
    for (const auto& s : stage3_top) {
        if (!contains(stage2_top, s.id)) return false;
    }
    for (const auto& s : stage2_top) {
        if (!contains(stage1_pool, s.id)) return false;
    }
    return true;
}

namespace {

json scored_json(std::span<const ScoredId> list)
{
    json out = json::array();
    for (const auto& s : list) out.push_back({{"id", s.id}, {"score", s.score}});
    return out;
}

std::vector<ScoredId> scored_from_json(const json& j)
{
    std::vector<ScoredId> out;
    for (const auto& s : j) out.push_back({s.at("id").get<std::string>(), s.at("score").get<double>()});
    return out;
}

} // namespace

json to_json(const RetrievalTrace& t)
{
    return {{"object_id", t.object_id},
            {"members", t.members},
            {"query", t.query},
            {"stage1_pool", t.stage1_pool},
            {"stage2_top", scored_json(t.stage2_top)},
            {"stage3_top", scored_json(t.stage3_top)},
            {"final", {{"id", t.final_id.empty() ? json(nullptr) : json(t.final_id)}, {"rationale", t.rationale}}},
            {"pose_stage_skipped", t.pose_stage_skipped},
            {"notes", t.notes}};
}

RetrievalTrace retrieval_trace_from_json(const json& j)
{
    RetrievalTrace t;
    t.object_id = j.at("object_id").get<std::string>();
    t.members = j.value("members", std::vector<std::string>{});
    t.query = j.value("query", "crops");
    t.stage1_pool = j.value("stage1_pool", std::vector<std::string>{});
    t.stage2_top = scored_from_json(j.value("stage2_top", json::array()));
    t.stage3_top = scored_from_json(j.value("stage3_top", json::array()));
    const json& fin = j.at("final");
    t.final_id = fin.at("id").is_null() ? "" : fin.at("id").get<std::string>();
    t.rationale = fin.value("rationale", "");
    t.pose_stage_skipped = j.value("pose_stage_skipped", false);
    t.notes = j.value("notes", std::vector<std::string>{});
    return t;
}

std::vector<ScoredId> pose_aware_rank(const ObjectNode& object, std::span<const Embedding> queries,
                                      std::span<const ScoredId> top10, const Scan& scan, const AssetDatabase& db,
                                      EmbeddingProvider& provider, Renderer* renderer, RetrievalTrace& trace,
                                      size_t keep)
{
    std::vector<ScoredId> ranked(top10.begin(), top10.end());
    std::vector<std::pair<const CameraFrame*, const CropRef*>> views;
    for (const auto& c : object.crops) {
        for (const auto& f : scan.frames) {
            if (f.id == c.frame_id) views.emplace_back(&f, &c);
        }
    }
    if (!renderer || views.empty()) {
        trace.pose_stage_skipped = true;
        trace.notes.push_back(!renderer ? "pose stage skipped: no renderer configured"
                                        : "pose stage skipped: no frame observes the object");
        if (ranked.size() > keep) ranked.resize(keep);
        return ranked;
    }
    for (auto& cand : ranked) {
        const AssetRecord& asset = db.at(cand.id);
        try {
            EmbeddingMatrix rendered(static_cast<Eigen::Index>(views.size()), queries.front().size());
            for (size_t v = 0; v < views.size(); ++v) {
                const auto bytes = renderer->render(asset, object.box, *views[v].first, *views[v].second);
                rendered.row(static_cast<Eigen::Index>(v)) = provider.embed(bytes).transpose();
            }
            cand.score = view_score(queries, rendered);
        } catch (const RetrievalError& e) {
            trace.notes.push_back(fmt::format("render failed for {}: kept visual score ({})", cand.id, e.what()));
        }
    }
    rank_and_trim(ranked, keep);
    return ranked;
}

void contextual_select(const ObjectNode& object, std::span<const ScoredId> top4, const AssetDatabase& db,
                       Oracle& oracle, RetrievalTrace& trace)
{
    if (top4.empty()) throw RetrievalError("contextual selection needs at least one candidate");
    json candidates = json::array();
    for (const auto& c : top4) {
        const AssetRecord& a = db.at(c.id);
        json images = json::array();
        for (const auto& v : a.views) images.push_back((a.dir / v.image).generic_string());
        candidates.push_back({{"id", c.id},
                              {"score", c.score},
                              {"images", images},
                              {"metadata", {{"category", to_string(a.category)}, {"subcategory", a.subcategory}}}});
    }
    json crops = json::array();
    for (const auto& c : object.crops) {
        crops.push_back({{"frame_id", c.frame_id}, {"bbox_px", c.bbox_px}, {"image", c.image}});
    }
    const json request = {{"task", "select_asset"},
                          {"instruction", "Pick the candidate that best matches the object's style and proportions."},
                          {"object", {{"id", object.id}, {"category", to_string(object.category)},
                                      {"subcategory", object.subcategory}, {"dims", vec_json(object.box.dims)}}},
                          {"candidates", candidates},
                          {"object_crops", crops}};
    const json reply = oracle.ask(request);
    const std::string chosen = reply.contains("chosen_id") && reply["chosen_id"].is_string() ? reply["chosen_id"].get<std::string>() : "";
    const bool valid = std::any_of(top4.begin(), top4.end(), [&](const ScoredId& s) { return s.id == chosen; });
    if (valid) {
        trace.final_id = chosen;
        trace.rationale = reply.value("rationale", "");
    } else {
        trace.final_id = top4.front().id;
        trace.rationale = "fallback to pose-stage rank 1";
        trace.notes.push_back(fmt::format("oracle chose '{}' outside the top {}; fell back to rank 1", chosen, top4.size()));
    }
}

// ---- clustering

namespace {

double sq_dist(const EmbeddingMatrix& m, Eigen::Index i, const EmbeddingMatrix& c, Eigen::Index j)
{
    return (m.row(i) - c.row(j)).squaredNorm();
}

KMeansResult lloyd(const EmbeddingMatrix& pts, int k, Rng& rng, int max_iters, double tol)
{
    const Eigen::Index n = pts.rows();
    EmbeddingMatrix centers(k, pts.cols());
    centers.row(0) = pts.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    std::vector<double> d2(static_cast<size_t>(n));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < c; ++j) best = std::min(best, sq_dist(pts, i, centers, j));
            d2[static_cast<size_t>(i)] = best;
            total += best;
        }
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            for (Eigen::Index i = 0; i < n; ++i) {
                r -= d2[static_cast<size_t>(i)];
                if (r < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        centers.row(c) = pts.row(pick);
    }

    KMeansResult res;
    res.labels.assign(static_cast<size_t>(n), 0);
    for (int it = 0; it < max_iters; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double bd = sq_dist(pts, i, centers, 0);
            for (int j = 1; j < k; ++j) {
                const double d = sq_dist(pts, i, centers, j);
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            res.labels[static_cast<size_t>(i)] = best;
        }
        EmbeddingMatrix next = EmbeddingMatrix::Zero(k, pts.cols());
        std::vector<int> counts(static_cast<size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            next.row(res.labels[static_cast<size_t>(i)]) += pts.row(i);
            ++counts[static_cast<size_t>(res.labels[static_cast<size_t>(i)])];
        }
        double shift = 0.0;
        for (int j = 0; j < k; ++j) {
            if (counts[static_cast<size_t>(j)] == 0) next.row(j) = centers.row(j); // empty cluster keeps its centre
            else next.row(j) /= counts[static_cast<size_t>(j)];
            shift = std::max(shift, (next.row(j) - centers.row(j)).norm());
        }
        centers = std::move(next);
        if (shift < tol) break;
    }
    res.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        // final assignment against the final centres
        int best = 0;
        double bd = sq_dist(pts, i, centers, 0);
        for (int j = 1; j < k; ++j) {
            const double d = sq_dist(pts, i, centers, j);
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        res.labels[static_cast<size_t>(i)] = best;
        res.inertia += bd;
    }
    res.centroids = std::move(centers);
    return res;
}

} // namespace

KMeansResult kmeans(const EmbeddingMatrix& points, int k, std::uint64_t seed, int restarts, int max_iters, double tol)
{
    if (k < 1 || k > points.rows()) throw ValidationError(fmt::format("kmeans: k = {} for {} points", k, points.rows()));
    Rng rng(seed);
    KMeansResult best;
    for (int r = 0; r < std::max(1, restarts); ++r) {
        KMeansResult cur = lloyd(points, k, rng, max_iters, tol);
        if (r == 0 || cur.inertia < best.inertia) best = std::move(cur);
    }
    return best;
}

double silhouette_score(const EmbeddingMatrix& points, std::span<const int> labels)
{
    const Eigen::Index n = points.rows();
    if (n == 0) return 0.0;
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<int> sizes(static_cast<size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<size_t>(l)];
    double total = 0.0;
    std::vector<double> sums(static_cast<size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) sums[static_cast<size_t>(labels[static_cast<size_t>(j)])] += (points.row(i) - points.row(j)).norm();
        }
        const int own = labels[static_cast<size_t>(i)];
        if (sizes[static_cast<size_t>(own)] <= 1) continue;
        const double a = sums[static_cast<size_t>(own)] / (sizes[static_cast<size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c != own && sizes[static_cast<size_t>(c)] > 0) b = std::min(b, sums[static_cast<size_t>(c)] / sizes[static_cast<size_t>(c)]);
        }
        if (!std::isfinite(b)) continue;
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

std::vector<int> select_clusters(const EmbeddingMatrix& points, std::uint64_t seed)
{
    const Eigen::Index n = points.rows();
    std::vector<int> one(static_cast<size_t>(n), 0);
    if (n < 3) return one;
    bool identical = true;
    for (Eigen::Index i = 1; i < n && identical; ++i) identical = points.row(i) == points.row(0);
    if (identical) return one;
    const int k_max = static_cast<int>(std::min<Eigen::Index>(n - 1, 10));
    std::vector<int> best_labels;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 2; k <= k_max; ++k) {
        const auto res = kmeans(points, k, seed);
        const double s = silhouette_score(points, res.labels);
        if (s > best) {
            best = s;
            best_labels = res.labels;
        }
    }
    return best_labels;
}

int dominant_color_bin(std::span<const Image> crops)
{
    std::array<std::size_t, 64> hist{};
    for (const auto& img : crops) {
        const Image rgb = img.to_rgb();
        for (size_t i = 0; i + 2 < rgb.data.size(); i += 3) {
            ++hist[static_cast<size_t>((rgb.data[i] >> 6) * 16 + (rgb.data[i + 1] >> 6) * 4 + (rgb.data[i + 2] >> 6))];
        }
    }
    return static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

std::vector<std::vector<size_t>> cluster_identical(const EmbeddingMatrix& features, std::span<const int> color_bins,
                                                   std::uint64_t seed)
{
    const auto labels = select_clusters(features, seed);
    std::map<std::pair<int, int>, std::vector<size_t>> groups;
    for (size_t i = 0; i < labels.size(); ++i) groups[{labels[i], color_bins[i]}].push_back(i);
    std::vector<std::vector<size_t>> out;
    for (auto& [key, members] : groups) out.push_back(std::move(members));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

// ---- whole scene

json to_json(const RetrievalResult& r)
{
    json traces = json::array();
    for (const auto& t : r.traces) traces.push_back(to_json(t));
    return {{"traces", traces}, {"assignment", r.assignment}, {"clusters", r.clusters}};
}

RetrievalResult retrieval_result_from_json(const json& j)
{
    RetrievalResult r;
    for (const auto& t : j.at("traces")) r.traces.push_back(retrieval_trace_from_json(t));
    r.assignment = j.at("assignment").get<std::map<std::string, std::string>>();
    r.clusters = j.value("clusters", std::vector<std::vector<std::string>>{});
    return r;
}

namespace {

struct ObjectEvidence {
    std::vector<Embedding> crops;
    Embedding feature;
    int color_bin = 0;
    std::string error;
};

} // namespace

RetrievalResult retrieve_scene(const Scan& scan, const fs::path& base, const AssetDatabase& db,
                               EmbeddingProvider& provider, Oracle& oracle, Renderer* renderer,
                               const RetrievalConfig& cfg)
{
    const auto& objects = scan.objects;
    std::vector<ObjectEvidence> ev(objects.size());
    parallel_for(objects.size(), cfg.threads, [&](size_t i) {
        const ObjectNode& o = objects[i];
        if (o.crops.empty()) {
            ev[i].error = "object has no crops";
            return;
        }
        std::vector<Image> images;
        for (const auto& c : o.crops) {
            const auto bytes = crop_bytes(c, scan, base);
            images.push_back(decode_png(bytes));
            ev[i].crops.push_back(provider.embed(bytes));
        }
        Embedding mean = Embedding::Zero(ev[i].crops.front().size());
        for (const auto& e : ev[i].crops) mean += e;
        ev[i].feature = mean / static_cast<double>(ev[i].crops.size());
        ev[i].color_bin = dominant_color_bin(images);
    });

    // clusters within each (category, subcategory); objects without evidence stay alone
    std::vector<std::vector<size_t>> clusters;
    std::map<std::pair<int, std::string>, std::vector<size_t>> groups;
    for (size_t i = 0; i < objects.size(); ++i) {
        if (!ev[i].error.empty() || !cfg.cluster) clusters.push_back({i});
        else groups[{static_cast<int>(objects[i].category), objects[i].subcategory}].push_back(i);
    }
    for (const auto& [key, members] : groups) {
        if (members.size() == 1) {
            clusters.push_back(members);
            continue;
        }
        EmbeddingMatrix feats(static_cast<Eigen::Index>(members.size()), ev[members.front()].feature.size());
        std::vector<int> bins;
        for (size_t m = 0; m < members.size(); ++m) {
            feats.row(static_cast<Eigen::Index>(m)) = ev[members[m]].feature.transpose();
            bins.push_back(ev[members[m]].color_bin);
        }
        for (const auto& c : cluster_identical(feats, bins, cfg.kmeans_seed)) {
            std::vector<size_t> mapped;
            for (size_t local : c) mapped.push_back(members[local]);
            clusters.push_back(std::move(mapped));
        }
    }
    std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

    std::vector<RetrievalTrace> traces(clusters.size());
    parallel_for(clusters.size(), cfg.threads, [&](size_t ci) {
        const auto& members = clusters[ci];
        // the representative is the member with the most visible crop
        size_t rep = members.front();
        for (size_t m : members) {
            const double vm = objects[m].crops.empty() ? -1.0 : objects[m].crops.front().visibility;
            const double vr = objects[rep].crops.empty() ? -1.0 : objects[rep].crops.front().visibility;
            if (vm > vr) rep = m;
        }
        RetrievalTrace& t = traces[ci];
        t.object_id = objects[rep].id;
        for (size_t m : members) t.members.push_back(objects[m].id);
        try {
            if (!ev[rep].error.empty()) throw RetrievalError(ev[rep].error);
            std::vector<Embedding> queries;
            if (members.size() == 1) {
                queries = ev[rep].crops;
            } else {
                Embedding mean = Embedding::Zero(ev[rep].feature.size());
                for (size_t m : members) mean += ev[m].feature;
                queries.push_back(mean / static_cast<double>(members.size()));
                t.query = "cluster-mean";
                t.notes.push_back(fmt::format("joint retrieval for {} identical objects with the mean feature", members.size()));
            }
            t.stage1_pool = semantic_filter(objects[rep], db);
            t.stage2_top = visual_rank(queries, t.stage1_pool, db, cfg.stage2_keep);
            t.stage3_top = pose_aware_rank(objects[rep], queries, t.stage2_top, scan, db, provider, renderer, t, cfg.stage3_keep);
            contextual_select(objects[rep], t.stage3_top, db, oracle, t);
        } catch (const RetrievalError& e) {
            t.final_id.clear();
            t.notes.push_back(std::string("retrieval failed: ") + e.what());
        }
    });

    RetrievalResult result;
    for (size_t ci = 0; ci < clusters.size(); ++ci) {
        std::vector<std::string> ids;
        for (size_t m : clusters[ci]) {
            ids.push_back(objects[m].id);
            if (!traces[ci].final_id.empty()) result.assignment[objects[m].id] = traces[ci].final_id;
        }
        result.clusters.push_back(std::move(ids));
    }
    result.traces = std::move(traces);
    return result;
}

} // namespace scenesmith
