#include <scenesmith/material.hpp>
#include <scenesmith/color.hpp>
#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>
#include <scenesmith/parallel.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace fs = std::filesystem;

namespace scenesmith {

PixelRect largest_rectangle(const Mask& mask)
{
    PixelRect best;
    std::vector<int> heights(static_cast<size_t>(mask.width), 0);
    std::vector<int> stack;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) heights[static_cast<size_t>(x)] = mask.at(x, y) ? heights[static_cast<size_t>(x)] + 1 : 0;
        stack.clear();
        for (int x = 0; x <= mask.width; ++x) {
            const int h = x < mask.width ? heights[static_cast<size_t>(x)] : 0;
            while (!stack.empty() && heights[static_cast<size_t>(stack.back())] >= h) {
                const int top = heights[static_cast<size_t>(stack.back())];
                stack.pop_back();
                const int left = stack.empty() ? 0 : stack.back() + 1;
                const long area = static_cast<long>(top) * (x - left);
                if (area > best.area()) best = {left, y - top + 1, x - left, top};
            }
            stack.push_back(x);
        }
    }
    return best;
}

double mean_sobel(const Image& image, const PixelRect& rect)
{
    if (rect.area() == 0) return 0.0;
    auto lum = [&](int x, int y) {
        x = std::clamp(x, 0, image.width - 1);
        y = std::clamp(y, 0, image.height - 1);
        if (image.channels == 1) return image.at(x, y, 0) / 255.0;
        return (0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2)) / 255.0;
    };
    double total = 0.0;
    for (int y = rect.y; y < rect.y + rect.h; ++y) {
        for (int x = rect.x; x < rect.x + rect.w; ++x) {
            const double gx = (lum(x + 1, y - 1) + 2 * lum(x + 1, y) + lum(x + 1, y + 1)) -
                              (lum(x - 1, y - 1) + 2 * lum(x - 1, y) + lum(x - 1, y + 1));
            const double gy = (lum(x - 1, y + 1) + 2 * lum(x, y + 1) + lum(x + 1, y + 1)) -
                              (lum(x - 1, y - 1) + 2 * lum(x, y - 1) + lum(x + 1, y - 1));
            total += std::hypot(gx, gy);
        }
    }
    return total / static_cast<double>(rect.area());
}

Mask decode_rle_mask(const json& j)
{
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    if (w <= 0 || h <= 0) throw ValidationError("rle mask: non-positive size");
    Mask m(w, h, false);
    size_t pos = 0;
    bool value = false;
    const size_t total = static_cast<size_t>(w) * h;
    for (const auto& c : j.at("counts")) {
        const long run = c.get<long>();
        if (run < 0 || pos + static_cast<size_t>(run) > total) throw ValidationError("rle mask: runs exceed the pixel count");
        if (value) std::fill_n(m.bits.begin() + static_cast<long>(pos), run, std::uint8_t{1});
        pos += static_cast<size_t>(run);
        value = !value;
    }
    if (pos != total) throw ValidationError("rle mask: runs do not cover the pixel count");
    return m;
}

json encode_rle_mask(const Mask& mask)
{
    json counts = json::array();
    std::uint8_t current = 0;
    long run = 0;
    for (auto b : mask.bits) {
        if ((b != 0) != (current != 0)) {
            counts.push_back(run);
            run = 0;
            current = b != 0;
        }
        ++run;
    }
    counts.push_back(run);
    return {{"width", mask.width}, {"height", mask.height}, {"counts", counts}};
}

std::vector<MaskPatch> extract_patches(std::span<const PatchSource> sources, size_t k, int min_size)
{
    if (sources.empty()) throw MaterialError("no masks given");
    std::vector<MaskPatch> out;
    for (const auto& src : sources) {
        if (src.mask.width != src.frame.width || src.mask.height != src.frame.height) {
            throw MaterialError(fmt::format("mask {} does not match its frame size", src.id));
        }
        const PixelRect r = largest_rectangle(src.mask);
        if (r.w < min_size || r.h < min_size) continue;
        MaskPatch p;
        p.id = src.id;
        p.frame_id = src.frame_id;
        p.rect = r;
        p.area_px = r.area();
        p.smoothness = mean_sobel(src.frame, r);
        p.score = static_cast<double>(p.area_px) / (1.0 + p.smoothness);
        p.pixels = src.frame.to_rgb().crop(r.x, r.y, r.w, r.h);
        Vec3 sum = Vec3::Zero();
        for (size_t i = 0; i + 2 < p.pixels.data.size(); i += 3) {
            sum += Vec3(p.pixels.data[i], p.pixels.data[i + 1], p.pixels.data[i + 2]);
        }
        p.mean_rgb = sum / static_cast<double>(p.area_px);
        out.push_back(std::move(p));
    }
    if (out.empty()) throw MaterialError("no usable patches");
    std::sort(out.begin(), out.end(), [](const MaskPatch& a, const MaskPatch& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

json manifest_json(const MaterialRecord& m)
{
    return {{"id", m.id},         {"category", m.category}, {"albedo", m.albedo}, {"roughness", m.roughness},
            {"metallic", m.metallic}, {"normal", m.normal},     {"tags", m.tags}};
}

MaterialRecord load_material(const fs::path& dir)
{
    MaterialRecord m;
    m.dir = dir;
    try {
        const json j = json::parse(read_text_file(dir / "manifest.json"));
        m.id = j.at("id").get<std::string>();
        m.category = j.at("category").get<std::string>();
        m.albedo = j.value("albedo", "albedo.png");
        m.roughness = j.value("roughness", "");
        m.metallic = j.value("metallic", "");
        m.normal = j.value("normal", "");
        m.tags = j.value("tags", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ValidationError(dir.string() + "/manifest.json: " + e.what());
    }
    m.embeddings = read_ssem(dir / "embeddings.bin");
    if (m.embeddings.rows() == 0) throw ValidationError(dir.string() + ": material has no albedo embedding");
    for (Eigen::Index r = 0; r < m.embeddings.rows(); ++r) {
        if (std::abs(m.embeddings.row(r).norm() - 1.0) > 1e-6) {
            throw ValidationError(fmt::format("{}: embedding row {} is not unit norm", dir.string(), r));
        }
    }
    return m;
}

MaterialDatabase::MaterialDatabase(std::vector<MaterialRecord> records) : records_(std::move(records))
{
    std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (size_t i = 1; i < records_.size(); ++i) {
        if (records_[i].id == records_[i - 1].id) throw ValidationError("duplicate material id " + records_[i].id);
    }
}

MaterialDatabase MaterialDatabase::load(const fs::path& root)
{
    if (!fs::is_directory(root)) throw ValidationError("material database not found: " + root.string());
    std::vector<MaterialRecord> records;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) records.push_back(load_material(entry.path()));
    }
    return MaterialDatabase(std::move(records));
}

const MaterialRecord* MaterialDatabase::find(const std::string& id) const
{
    const auto it = std::lower_bound(records_.begin(), records_.end(), id, [](const auto& r, const std::string& v) { return r.id < v; });
    return it != records_.end() && it->id == id ? &*it : nullptr;
}

bool MaterialTrace::subset_chain_holds() const
{
    const bool in_b = std::any_of(stage_b.begin(), stage_b.end(), [&](const ScoredId& s) { return s.id == final_id; });
    const bool b_in_a = std::all_of(stage_b.begin(), stage_b.end(), [&](const ScoredId& s) {
        return std::find(stage_a.begin(), stage_a.end(), s.id) != stage_a.end();
    });
    return in_b && b_in_a && stage_a.size() <= 10 && stage_b.size() <= 3;
}

json to_json(const MaterialTrace& t)
{
    json b = json::array();
    for (const auto& s : t.stage_b) b.push_back({{"id", s.id}, {"score", s.score}});
    return {{"category", t.category}, {"stage_a", t.stage_a}, {"stage_b", b},
            {"final", {{"id", t.final_id}, {"rationale", t.rationale}}}, {"flags", t.flags}};
}

MaterialTrace search_material(std::span<const Embedding> patch_embeddings, const MaterialDatabase& db, Oracle& oracle)
{
    if (db.empty()) throw MaterialError("material database is empty");
    if (patch_embeddings.empty()) throw MaterialError("material search needs at least one patch");
    std::map<std::string, double> score;
    for (const auto& m : db.records()) score[m.id] = view_score(patch_embeddings, m.embeddings);
    auto by_score = [&](std::vector<std::string> ids) {
        std::sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) {
            return score[a] != score[b] ? score[a] > score[b] : a < b;
        });
        return ids;
    };

    std::map<std::string, std::vector<std::string>> members;
    for (const auto& m : db.records()) members[m.category].push_back(m.id);
    json category_scores = json::object();
    json ranked = json::object();
    for (auto& [cat, ids] : members) {
        ids = by_score(ids);
        category_scores[cat] = score[ids.front()];
        ranked[cat] = ids;
    }

    MaterialTrace t;
    const json reply = oracle.ask({{"task", "material_category"},
                                   {"instruction", "Name the material category of the patches and list up to 10 candidates."},
                                   {"category_scores", category_scores},
                                   {"ranked", ranked}});
    t.category = reply.value("category", "");
    const auto it = members.find(t.category);
    if (it == members.end()) {
        t.flags.push_back(fmt::format("category '{}' matches no material; ranked the full database", t.category));
        std::vector<std::string> all;
        for (const auto& m : db.records()) all.push_back(m.id);
        all = by_score(all);
        t.stage_a.assign(all.begin(), all.begin() + static_cast<long>(std::min<size_t>(10, all.size())));
    } else {
        for (const auto& c : reply.value("candidates", json::array())) {
            if (!c.is_string()) continue;
            const std::string id = c.get<std::string>();
            const MaterialRecord* rec = db.find(id);
            if (rec && rec->category == t.category && std::find(t.stage_a.begin(), t.stage_a.end(), id) == t.stage_a.end() &&
                t.stage_a.size() < 10) {
                t.stage_a.push_back(id);
            }
        }
        if (t.stage_a.empty()) {
            t.flags.push_back("oracle listed no valid candidates; took the category's best 10");
            const auto& ids = it->second;
            t.stage_a.assign(ids.begin(), ids.begin() + static_cast<long>(std::min<size_t>(10, ids.size())));
        }
    }

    for (const auto& id : by_score(t.stage_a)) {
        if (t.stage_b.size() == 3) break;
        t.stage_b.push_back({id, score[id]});
    }

    json cands = json::array();
    for (const auto& s : t.stage_b) {
        cands.push_back({{"id", s.id}, {"score", s.score}, {"albedo", db.find(s.id)->albedo_path().generic_string()}});
    }
    const json confirm = oracle.ask({{"task", "material_confirm"},
                                     {"instruction", "Pick the albedo most visually compatible with the patches."},
                                     {"candidates", cands}});
    const std::string chosen = confirm.contains("chosen_id") && confirm["chosen_id"].is_string() ? confirm["chosen_id"].get<std::string>() : "";
    if (std::any_of(t.stage_b.begin(), t.stage_b.end(), [&](const ScoredId& s) { return s.id == chosen; })) {
        t.final_id = chosen;
        t.rationale = confirm.value("rationale", "");
    } else {
        t.final_id = t.stage_b.front().id;
        t.rationale = "fallback to embedding rank 1";
        t.flags.push_back(fmt::format("oracle confirmed '{}' outside the top 3", chosen));
    }
    return t;
}

Image stitch_images(std::span<const Image> images)
{
    constexpr int gap = 4;
    int w = 0, h = 0;
    for (const auto& img : images) {
        w += img.width + (w > 0 ? gap : 0);
        h = std::max(h, img.height);
    }
    Image canvas(std::max(w, 1), std::max(h, 1), 3, 255);
    int x0 = 0;
    for (const auto& img : images) {
        const Image rgb = img.to_rgb();
        for (int y = 0; y < rgb.height; ++y) {
            for (int x = 0; x < rgb.width; ++x) {
                for (int c = 0; c < 3; ++c) canvas.at(x0 + x, y, c) = rgb.at(x, y, c);
            }
        }
        x0 += img.width + gap;
    }
    return canvas;
}

SegmentMapping map_segments_to_patches(const AssetRecord& asset, std::span<const MaskPatch> patches, Oracle& oracle)
{
    if (asset.segments.empty()) throw MaterialError("asset " + asset.id + " has no material segments");
    if (patches.empty()) throw MaterialError("no patches to map");
    SegmentMapping out;
    if (asset.segments.size() == 1 && patches.size() == 1) {
        out.segment_to_patch[asset.segments.front().id] = patches.front().id;
        return out;
    }
    std::vector<Image> views;
    json segments = json::array();
    for (const auto& s : asset.segments) {
        segments.push_back(s.id);
        if (!s.view.empty() && fs::exists(asset.dir / s.view)) views.push_back(read_png(asset.dir / s.view));
    }
    json patch_ids = json::array();
    json patch_images = json::array();
    for (const auto& p : patches) {
        patch_ids.push_back(p.id);
        patch_images.push_back(base64_encode(encode_png(p.pixels)));
    }
    const Image stitched = stitch_images(views);
    const json reply = oracle.ask({{"task", "map_segments"},
                                   {"instruction", "Assign each numbered material segment to the patch showing its material."},
                                   {"asset", asset.id},
                                   {"segments", segments},
                                   {"patches", patch_ids},
                                   {"segment_image", base64_encode(encode_png(stitched))},
                                   {"patch_images", patch_images}});
    const json mapping = reply.value("mapping", json::object());
    for (const auto& s : asset.segments) {
        const auto it = mapping.find(s.id);
        std::string patch;
        if (it != mapping.end() && it->is_string()) patch = it->get<std::string>();
        const bool valid = std::any_of(patches.begin(), patches.end(), [&](const MaskPatch& p) { return p.id == patch; });
        if (!valid) {
            out.flags.push_back(it == mapping.end() ? fmt::format("segment {} unmapped; used the top patch", s.id)
                                                    : fmt::format("segment {} mapped to unknown patch '{}'; used the top patch", s.id, patch));
            patch = patches.front().id;
        }
        out.segment_to_patch[s.id] = patch;
    }
    return out;
}

namespace {

constexpr double kLatticeScale = 4294967296.0; // 2^32

using Wide = __int128;

long long lattice_units(double v) { return std::llround(v * kLatticeScale); }

// num / den rounded to nearest, ties to even; den > 0
Wide div_round_even(Wide num, Wide den)
{
    Wide q = num / den;
    Wide r = num % den;
    if (r < 0) {
        r += den;
        --q;
    }
    if (2 * r > den || (2 * r == den && (q % 2 != 0))) ++q;
    return q;
}

} // namespace

double lab_quantize(double v) { return static_cast<double>(lattice_units(v)) / kLatticeScale; }

AlbedoMap albedo_from_image(const Image& image)
{
    const Image rgb = image.to_rgb();
    AlbedoMap m{rgb.width, rgb.height, {}};
    m.lab.reserve(static_cast<size_t>(rgb.width) * rgb.height);
    for (size_t i = 0; i + 2 < rgb.data.size(); i += 3) {
        const Vec3 lab = srgb_to_lab({double(rgb.data[i]), double(rgb.data[i + 1]), double(rgb.data[i + 2])});
        m.lab.emplace_back(lab_quantize(lab.x()), lab_quantize(lab.y()), lab_quantize(lab.z()));
    }
    return m;
}

Image albedo_to_image(const AlbedoMap& map)
{
    Image img(map.width, map.height, 3);
    for (size_t i = 0; i < map.lab.size(); ++i) {
        const Vec3 rgb = lab_to_srgb(map.lab[i]);
        for (int c = 0; c < 3; ++c) img.data[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(rgb[c]), 0L, 255L));
    }
    return img;
}

namespace {

std::array<Wide, 3> lattice_sums(const AlbedoMap& map)
{
    std::array<Wide, 3> sum{0, 0, 0};
    for (const auto& p : map.lab) {
        for (int c = 0; c < 3; ++c) sum[static_cast<size_t>(c)] += lattice_units(p[c]);
    }
    return sum;
}

} // namespace

Vec3 albedo_mean(const AlbedoMap& map)
{
    if (map.lab.empty()) throw MaterialError("empty albedo map");
    const auto sum = lattice_sums(map);
    Vec3 mean;
    for (int c = 0; c < 3; ++c) {
        mean[c] = static_cast<double>(static_cast<long double>(sum[static_cast<size_t>(c)]) / map.lab.size() / kLatticeScale);
    }
    return mean;
}

bool lab_in_gamut(const Vec3& lab)
{
    return lab.x() >= 0.0 && lab.x() <= 100.0 && lab.y() >= -128.0 && lab.y() <= 127.0 && lab.z() >= -128.0 &&
           lab.z() <= 127.0;
}

ShiftResult albedo_shift(const AlbedoMap& map, const Vec3& target, bool clamp)
{
    if (map.lab.empty()) throw MaterialError("empty albedo map");
    if (!lab_in_gamut(target)) {
        throw ValidationError(fmt::format("target LAB ({}, {}, {}) is outside the gamut", target.x(), target.y(), target.z()));
    }
    // offset = target - mean, rounded onto the lattice with exact integer arithmetic
    const auto sum = lattice_sums(map);
    const Wide n = static_cast<Wide>(map.lab.size());
    ShiftResult res;
    for (int c = 0; c < 3; ++c) {
        const Wide units = div_round_even(static_cast<Wide>(lattice_units(target[c])) * n - sum[static_cast<size_t>(c)], n);
        res.delta[c] = static_cast<double>(units) / kLatticeScale;
    }
    res.map = map;
    size_t clamped = 0;
    const Vec3 lo(0.0, -128.0, -128.0);
    const Vec3 hi(100.0, 127.0, 127.0);
    for (auto& p : res.map.lab) {
        p += res.delta;
        if (clamp) {
            const Vec3 q = p.cwiseMax(lo).cwiseMin(hi);
            if (q != p) ++clamped;
            p = q;
        }
    }
    res.clamped_fraction = static_cast<double>(clamped) / static_cast<double>(res.map.lab.size());
    return res;
}

TargetColor infer_target_color(std::span<const MaskPatch> patches, Oracle& oracle)
{
    if (patches.empty()) throw MaterialError("target colour needs at least one patch");
    json req_patches = json::array();
    for (const auto& p : patches) req_patches.push_back({{"id", p.id}, {"mean_rgb", vec_json(p.mean_rgb)}});
    const json reply = oracle.ask({{"task", "target_color"},
                                   {"instruction", "Give the RGB colour of the part shown in each patch."},
                                   {"patches", req_patches}});
    const json colors = reply.value("colors", json::array());
    if (colors.size() != patches.size()) {
        throw ServiceError(fmt::format("target colour reply has {} colours for {} patches", colors.size(), patches.size()));
    }
    TargetColor out;
    std::array<std::vector<double>, 3> channels;
    for (size_t i = 0; i < colors.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            double v = colors[i].at(static_cast<size_t>(c)).get<double>();
            if (v < 0.0 || v > 255.0) {
                out.flags.push_back(fmt::format("patch {} channel {} value {} clamped", patches[i].id, c, v));
                v = std::clamp(v, 0.0, 255.0);
            }
            channels[static_cast<size_t>(c)].push_back(v);
        }
    }
    for (int c = 0; c < 3; ++c) {
        auto& v = channels[static_cast<size_t>(c)];
        std::sort(v.begin(), v.end());
        const size_t mid = v.size() / 2;
        out.rgb[c] = v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
    }
    out.lab = srgb_to_lab(out.rgb);
    return out;
}

// ---- scene painting

namespace {

std::vector<PatchSource> load_mask_sources(const Scan& scan, const fs::path& base, const fs::path& dir,
                                           std::vector<std::string>& flags)
{
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".png" || ext == ".json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<PatchSource> out;
    for (const auto& f : files) {
        const std::string frame_id = f.stem().string();
        const CameraFrame* frame = nullptr;
        for (const auto& fr : scan.frames) {
            if (fr.id == frame_id) frame = &fr;
        }
        if (!frame || frame->image.empty()) {
            flags.push_back("mask " + f.filename().string() + " has no matching frame image");
            continue;
        }
        PatchSource src;
        src.id = frame_id;
        src.frame_id = frame_id;
        src.mask = f.extension() == ".png" ? mask_from_image(read_png(f)) : decode_rle_mask(json::parse(read_text_file(f)));
        src.frame = read_png(base / frame->image).to_rgb();
        if (src.mask.width != src.frame.width || src.mask.height != src.frame.height) {
            flags.push_back("mask " + f.filename().string() + " size differs from its frame");
            continue;
        }
        out.push_back(std::move(src));
    }
    return out;
}

// Map path relative to the material database root, so outputs do not depend on where the database lives.
std::string db_relative(const MaterialRecord& m, const std::string& file)
{
    return file.empty() ? "" : (m.dir.filename() / file).generic_string();
}

json paint_object(const ObjectNode& object, const std::string& asset_id, const Scan& scan, const fs::path& base,
                  const fs::path& masks, const AssetDatabase& assets, const MaterialDatabase& materials,
                  EmbeddingProvider& provider, Oracle& oracle, const PaintConfig& cfg, const fs::path& out)
{
    json result = {{"asset", asset_id}, {"segments", json::object()}, {"flags", json::array()}};
    std::vector<std::string> flags;
    const AssetRecord& asset = assets.at(asset_id);
    if (asset.segments.empty()) throw MaterialError("asset has no material segments");
    const fs::path dir = masks / object.id;
    if (!fs::is_directory(dir)) throw MaterialError("no masks for object");
    auto sources = load_mask_sources(scan, base, dir, flags);

    if (!sources.empty()) {
        json ids = json::array();
        for (const auto& s : sources) ids.push_back(s.id);
        const json valid = oracle.ask({{"task", "patch_validity"},
                                       {"instruction", "Does each mask cover a real, unoccluded part of the object?"},
                                       {"object", object.id},
                                       {"patches", ids}})
                               .value("valid", json::array());
        std::vector<PatchSource> kept;
        for (size_t i = 0; i < sources.size(); ++i) {
            if (i < valid.size() && valid[i].is_boolean() && !valid[i].get<bool>()) {
                flags.push_back("mask " + sources[i].id + " rejected as invalid");
                continue;
            }
            kept.push_back(std::move(sources[i]));
        }
        sources = std::move(kept);
    }
    if (sources.empty()) throw MaterialError("no usable masks");

    const auto patches = extract_patches(sources, cfg.top_k, cfg.min_patch);
    const auto mapping = map_segments_to_patches(asset, patches, oracle);
    flags.insert(flags.end(), mapping.flags.begin(), mapping.flags.end());

    for (const auto& seg : asset.segments) {
        const std::string& patch_id = mapping.segment_to_patch.at(seg.id);
        std::vector<MaskPatch> mine;
        for (const auto& p : patches) {
            if (p.id == patch_id) mine.push_back(p);
        }
        std::vector<Embedding> emb;
        for (const auto& p : mine) emb.push_back(provider.embed(encode_png(p.pixels)));
        const MaterialTrace trace = search_material(emb, materials, oracle);
        const TargetColor target = infer_target_color(mine, oracle);
        const MaterialRecord& mat = *materials.find(trace.final_id);
        const ShiftResult shifted = albedo_shift(albedo_from_image(read_png(mat.albedo_path())), target.lab);
        const fs::path rel = fs::path(object.id) / (seg.id + ".png");
        write_png(out / rel, albedo_to_image(shifted.map));
        json seg_flags = target.flags;
        result["segments"][seg.id] = {
            {"material_id", mat.id},
            {"patch", patch_id},
            {"shift", {{"T", vec_json(target.lab)}, {"target_rgb", vec_json(target.rgb)}, {"clamped_fraction", shifted.clamped_fraction}}},
            {"albedo", rel.generic_string()},
            {"maps", {{"roughness", db_relative(mat, mat.roughness)},
                      {"metallic", db_relative(mat, mat.metallic)},
                      {"normal", db_relative(mat, mat.normal)}}},
            {"trace", to_json(trace)},
            {"flags", seg_flags}};
    }
    json patch_list = json::array();
    for (const auto& p : patches) {
        patch_list.push_back({{"id", p.id}, {"rect", {p.rect.x, p.rect.y, p.rect.w, p.rect.h}}, {"score", p.score},
                              {"smoothness", p.smoothness}});
    }
    result["patches"] = patch_list;
    result["flags"] = flags;
    return result;
}

} // namespace

PaintResult paint_scene(const Scan& scan, const fs::path& base, const RetrievalResult& retrieval, const fs::path& masks,
                        const AssetDatabase& assets, const MaterialDatabase& materials, EmbeddingProvider& provider,
                        Oracle& oracle, const PaintConfig& cfg, const fs::path& out)
{
    PaintResult res;
    res.assignments = {{"objects", json::object()}, {"skipped", json::object()}};
    for (const auto& o : scan.objects) {
        const auto it = retrieval.assignment.find(o.id);
        if (it == retrieval.assignment.end()) {
            res.assignments["skipped"][o.id] = "no retrieved asset";
            continue;
        }
        try {
            res.assignments["objects"][o.id] = paint_object(o, it->second, scan, base, masks, assets, materials, provider, oracle, cfg, out);
        } catch (const MaterialError& e) {
            res.assignments["skipped"][o.id] = e.what();
        }
    }
    return res;
}

} // namespace scenesmith
