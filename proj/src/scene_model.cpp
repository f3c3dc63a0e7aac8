#include <scenesmith/scene_model.hpp>

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace scenesmith {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "bathtub", "bed",   "chair",  "door",       "fireplace", "oven",   "refrigerator",
    "sink",    "sofa",  "stairs", "storage",    "stove",     "table",  "television",
    "toilet",  "washer_dryer", "window",
};

} // namespace

std::string_view to_string(Category c) { return kCategoryNames[static_cast<size_t>(c)]; }

std::optional<Category> parse_category(std::string_view name)
{
    for (size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (kCategoryNames[i] == name) return static_cast<Category>(i);
    }
    return std::nullopt;
}

std::string_view to_string(OpeningKind k) { return k == OpeningKind::door ? "door" : "window"; }

std::string_view to_string(NodeKind k)
{
    switch (k) {
    case NodeKind::wall: return "wall";
    case NodeKind::object: return "object";
    case NodeKind::door: return "door";
    case NodeKind::window: return "window";
    }
    return "object";
}

std::string_view to_string(Relation r)
{
    switch (r) {
    case Relation::attached_to_wall: return "attached_to_wall";
    case Relation::on_top: return "on_top";
    case Relation::table_chair_pair: return "table_chair_pair";
    case Relation::connecting_to: return "connecting_to";
    }
    return "on_top";
}

std::optional<Relation> parse_relation(std::string_view s)
{
    for (Relation r : {Relation::attached_to_wall, Relation::on_top, Relation::table_chair_pair,
                       Relation::connecting_to}) {
        if (to_string(r) == s) return r;
    }
    return std::nullopt;
}

std::array<Vec2, 4> OrientedBox::footprint() const
{
    const Vec2 c = center2();
    const Vec2 u = 0.5 * dims.x() * lateral();
    const Vec2 v = 0.5 * dims.z() * facing();
    return {c - u - v, c + u - v, c + u + v, c - u + v};
}

std::array<Vec3, 8> box_corners(const OrientedBox& box)
{
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    Mat3 rot;
    rot << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    // local axes: x lateral, y facing, z up; dims are (w, h, l)
    const Vec3 half(0.5 * box.dims.x(), 0.5 * box.dims.z(), 0.5 * box.dims.y());
    std::array<Vec3, 8> out;
    int k = 0;
    for (int sz : {-1, 1}) {
        for (int sy : {-1, 1}) {
            for (int sx : {-1, 1}) {
                const Vec3 local(sx * half.x(), sy * half.y(), sz * half.z());
                out[k++] = box.center + rot * local;
            }
        }
    }
    return out;
}

const GraphNode* SceneGraph::find(std::string_view id) const
{
    for (const auto& n : nodes) {
        if (n.id == id) return &n;
    }
    return nullptr;
}

std::vector<GraphEdge> SceneGraph::edges_of(Relation kind) const
{
    std::vector<GraphEdge> out;
    for (const auto& e : edges) {
        if (e.kind == kind) out.push_back(e);
    }
    return out;
}

std::optional<std::string> SceneGraph::check_invariants() const
{
    std::map<std::string, NodeKind> kinds;
    for (const auto& n : nodes) kinds[n.id] = n.kind;
    std::map<std::string, std::vector<std::string>> on_top;
    for (const auto& e : edges) {
        if (!kinds.count(e.src) || !kinds.count(e.dst)) {
            return "edge " + std::string(to_string(e.kind)) + " references a missing node (" + e.src +
                   " -> " + e.dst + ")";
        }
        if (e.kind == Relation::attached_to_wall &&
            (kinds[e.src] != NodeKind::object || kinds[e.dst] != NodeKind::wall)) {
            return "attached_to_wall edge must run object -> wall (" + e.src + " -> " + e.dst + ")";
        }
        if (e.kind == Relation::on_top) on_top[e.src].push_back(e.dst);
    }
    // on_top must be acyclic
    std::map<std::string, int> state;
    std::function<bool(const std::string&)> has_cycle = [&](const std::string& u) {
        state[u] = 1;
        for (const auto& v : on_top[u]) {
            if (state[v] == 1) return true;
            if (state[v] == 0 && has_cycle(v)) return true;
        }
        state[u] = 2;
        return false;
    };
    for (const auto& [u, _] : on_top) {
        if (state[u] == 0 && has_cycle(u)) return "on_top edges contain a cycle through " + u;
    }
    return std::nullopt;
}

const CameraFrame* Scan::frame(std::string_view id) const
{
    for (const auto& f : frames) {
        if (f.id == id) return &f;
    }
    return nullptr;
}

const ObjectNode* Scan::object(std::string_view id) const
{
    for (const auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

const WallSegment* Scan::wall(std::string_view id) const
{
    for (const auto& w : walls) {
        if (w.id == id) return &w;
    }
    return nullptr;
}

std::string ScanValidation::summary() const
{
    std::ostringstream os;
    for (const auto& i : issues) {
        if (!i.id.empty()) os << i.id << ": ";
        os << i.message << '\n';
    }
    return os.str();
}

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec2 vec2_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 2) throw json::type_error::create(302, "expected [x, y]", &j);
    return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 3) throw json::type_error::create(302, "expected [x, y, z]", &j);
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const OrientedBox& box)
{
    return {{"center", vec_json(box.center)},
            {"dims", vec_json(box.dims)},
            {"yaw_deg", rad_to_deg(box.yaw)},
            {"pitch_deg", rad_to_deg(box.pitch)},
            {"roll_deg", rad_to_deg(box.roll)}};
}

OrientedBox box_from_json(const json& j)
{
    OrientedBox b;
    b.center = vec3_from_json(j.at("center"));
    b.dims = vec3_from_json(j.at("dims"));
    b.yaw = normalize_angle(deg_to_rad(j.at("yaw_deg").get<double>()));
    b.pitch = deg_to_rad(j.value("pitch_deg", 0.0));
    b.roll = deg_to_rad(j.value("roll_deg", 0.0));
    return b;
}

json to_json(const ObjectNode& obj)
{
    json j = to_json(obj.box);
    j["id"] = obj.id;
    j["label"] = to_string(obj.category);
    j["subcategory"] = obj.subcategory;
    j["articulated"] = obj.articulated;
    j["movable"] = obj.movable;
    if (obj.wall_attachment) j["wall_attachment"] = *obj.wall_attachment;
    json crops = json::array();
    for (const auto& c : obj.crops) {
        json cj = {{"frame_id", c.frame_id},
                   {"bbox_px", {c.bbox_px[0], c.bbox_px[1], c.bbox_px[2], c.bbox_px[3]}},
                   {"visibility", c.visibility}};
        if (!c.image.empty()) cj["image"] = c.image;
        crops.push_back(std::move(cj));
    }
    j["crops"] = std::move(crops);
    return j;
}

ObjectNode object_from_json(const json& j)
{
    ObjectNode o;
    o.id = j.at("id").get<std::string>();
    const auto label = j.at("label").get<std::string>();
    const auto cat = parse_category(label);
    if (!cat) throw std::invalid_argument("unknown category '" + label + "'");
    o.category = *cat;
    o.subcategory = j.value("subcategory", label);
    o.box = box_from_json(j);
    o.articulated = j.value("articulated", false);
    o.movable = j.value("movable", true);
    if (j.contains("wall_attachment") && !j["wall_attachment"].is_null()) {
        o.wall_attachment = j["wall_attachment"].get<std::string>();
    }
    for (const auto& cj : j.value("crops", json::array())) {
        CropRef c;
        c.frame_id = cj.at("frame_id").get<std::string>();
        const auto& bb = cj.at("bbox_px");
        if (!bb.is_array() || bb.size() != 4) throw std::invalid_argument("bbox_px must be [x, y, w, h]");
        for (int i = 0; i < 4; ++i) c.bbox_px[i] = bb[i].get<int>();
        c.visibility = cj.at("visibility").get<double>();
        c.image = cj.value("image", std::string{});
        o.crops.push_back(std::move(c));
    }
    std::stable_sort(o.crops.begin(), o.crops.end(),
                     [](const CropRef& a, const CropRef& b) { return a.visibility > b.visibility; });
    return o;
}

json to_json(const Opening& op)
{
    return {{"id", op.id}, {"kind", to_string(op.kind)}, {"start", op.start},
            {"end", op.end}, {"bottom", op.bottom}, {"top", op.top}};
}

json to_json(const WallSegment& wall)
{
    json openings = json::array();
    for (const auto& op : wall.openings) openings.push_back(to_json(op));
    return {{"id", wall.id},
            {"p0", vec_json(wall.p0)},
            {"p1", vec_json(wall.p1)},
            {"height", wall.height},
            {"openings", std::move(openings)}};
}

WallSegment wall_from_json(const json& j)
{
    WallSegment w;
    w.id = j.at("id").get<std::string>();
    w.p0 = vec2_from_json(j.at("p0"));
    w.p1 = vec2_from_json(j.at("p1"));
    w.height = j.at("height").get<double>();
    int idx = 0;
    for (const auto& oj : j.value("openings", json::array())) {
        Opening op;
        op.id = oj.value("id", w.id + "/opening-" + std::to_string(idx));
        const auto kind = oj.at("kind").get<std::string>();
        if (kind == "door") {
            op.kind = OpeningKind::door;
        } else if (kind == "window") {
            op.kind = OpeningKind::window;
        } else {
            throw std::invalid_argument("opening kind must be door or window, got '" + kind + "'");
        }
        op.start = oj.at("start").get<double>();
        op.end = oj.at("end").get<double>();
        op.bottom = oj.at("bottom").get<double>();
        op.top = oj.at("top").get<double>();
        w.openings.push_back(std::move(op));
        ++idx;
    }
    return w;
}

json to_json(const CameraFrame& f)
{
    json pose = json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pose.push_back(f.rotation(r, c));
        pose.push_back(f.translation(r));
    }
    for (double v : {0.0, 0.0, 0.0, 1.0}) pose.push_back(v);
    return {{"id", f.id},
            {"pose", std::move(pose)},
            {"intrinsics",
             {{"fx", f.fx}, {"fy", f.fy}, {"cx", f.cx}, {"cy", f.cy}, {"width", f.width}, {"height", f.height}}},
            {"image", f.image}};
}

CameraFrame frame_from_json(const json& j)
{
    CameraFrame f;
    f.id = j.at("id").get<std::string>();
    const auto& pose = j.at("pose");
    if (!pose.is_array() || pose.size() != 16) throw std::invalid_argument("pose must be 16 numbers (4x4 row-major)");
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) f.rotation(r, c) = pose[4 * r + c].get<double>();
        f.translation(r) = pose[4 * r + 3].get<double>();
    }
    const auto& in = j.at("intrinsics");
    f.fx = in.at("fx").get<double>();
    f.fy = in.at("fy").get<double>();
    f.cx = in.at("cx").get<double>();
    f.cy = in.at("cy").get<double>();
    f.width = in.at("width").get<int>();
    f.height = in.at("height").get<int>();
    f.image = j.value("image", std::string{});
    return f;
}

json to_json(const RoomPolygon& poly)
{
    json verts = json::array();
    for (const auto& v : poly.vertices) verts.push_back(vec_json(v));
    return {{"vertices", std::move(verts)}, {"source_segment_ids", poly.source_segment_ids}};
}

RoomPolygon polygon_from_json(const json& j)
{
    RoomPolygon p;
    for (const auto& v : j.at("vertices")) p.vertices.push_back(vec2_from_json(v));
    p.source_segment_ids = j.at("source_segment_ids").get<std::vector<std::string>>();
    return p;
}

json to_json(const SceneGraph& g)
{
    json nodes = json::array();
    for (const auto& n : g.nodes) nodes.push_back({{"id", n.id}, {"kind", to_string(n.kind)}});
    json edges = json::array();
    for (const auto& e : g.edges) edges.push_back({{"kind", to_string(e.kind)}, {"src", e.src}, {"dst", e.dst}});
    return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

SceneGraph graph_from_json(const json& j)
{
    SceneGraph g;
    for (const auto& nj : j.at("nodes")) {
        GraphNode n;
        n.id = nj.at("id").get<std::string>();
        const auto k = nj.at("kind").get<std::string>();
        if (k == "wall") n.kind = NodeKind::wall;
        else if (k == "door") n.kind = NodeKind::door;
        else if (k == "window") n.kind = NodeKind::window;
        else n.kind = NodeKind::object;
        g.nodes.push_back(std::move(n));
    }
    for (const auto& ej : j.at("edges")) {
        const auto kind = parse_relation(ej.at("kind").get<std::string>());
        if (!kind) throw std::invalid_argument("unknown relation " + ej.at("kind").dump());
        g.edges.push_back({*kind, ej.at("src").get<std::string>(), ej.at("dst").get<std::string>()});
    }
    return g;
}

json to_json(const Scan& scan)
{
    json walls = json::array();
    for (const auto& w : scan.walls) walls.push_back(to_json(w));
    json objects = json::array();
    for (const auto& o : scan.objects) objects.push_back(to_json(o));
    json frames = json::array();
    for (const auto& f : scan.frames) frames.push_back(to_json(f));
    return {{"walls", std::move(walls)}, {"objects", std::move(objects)}, {"frames", std::move(frames)}};
}

namespace {

void check_wall(const WallSegment& w, std::vector<ValidationIssue>& issues)
{
    if (w.length() <= 1e-9) issues.push_back({w.id, "degenerate geometry: zero-length wall"});
    if (!(w.height > 0.0)) issues.push_back({w.id, "degenerate geometry: wall height must be > 0"});
    const double len = w.length();
    std::vector<const Opening*> sorted;
    for (const auto& op : w.openings) {
        if (!(op.start < op.end) || op.start < -1e-6 || op.end > len + 1e-6) {
            issues.push_back({op.id, "opening interval must lie within [0, wall length]"});
        }
        if (!(op.bottom < op.top) || op.bottom < 0.0) {
            issues.push_back({op.id, "opening vertical extent must satisfy 0 <= bottom < top"});
        }
        sorted.push_back(&op);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->start < b->start; });
    for (size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->start < sorted[i - 1]->end) {
            issues.push_back({sorted[i]->id, "openings overlap on wall " + w.id});
        }
    }
}

void check_object(const ObjectNode& o, std::vector<ValidationIssue>& issues)
{
    const Vec3& d = o.box.dims;
    if (!(d.x() > 0.0 && d.y() > 0.0 && d.z() > 0.0)) {
        issues.push_back({o.id, "degenerate geometry: dims must be > 0"});
    }
    if (!o.box.center.allFinite() || !std::isfinite(o.box.yaw)) {
        issues.push_back({o.id, "degenerate geometry: non-finite pose"});
    }
}

void check_frame(const CameraFrame& f, std::vector<ValidationIssue>& issues)
{
    const Mat3 rrt = f.rotation * f.rotation.transpose();
    if ((rrt - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 || std::abs(f.rotation.determinant() - 1.0) > 1e-6) {
        issues.push_back({f.id, "camera rotation must be orthonormal with determinant +1"});
    }
    if (!(f.fx > 0.0 && f.fy > 0.0) || f.width <= 0 || f.height <= 0) {
        issues.push_back({f.id, "camera intrinsics must be positive"});
    }
}

template <class T, class Parse>
void parse_list(const json& doc, const char* key, std::vector<T>& out, std::vector<ValidationIssue>& issues,
                Parse parse)
{
    if (!doc.contains(key)) {
        issues.push_back({"", std::string("schema violation: missing field '") + key + "'"});
        return;
    }
    const auto& arr = doc.at(key);
    if (!arr.is_array()) {
        issues.push_back({"", std::string("schema violation: '") + key + "' must be an array"});
        return;
    }
    for (size_t i = 0; i < arr.size(); ++i) {
        const auto& item = arr[i];
        std::string id = std::string(key) + "[" + std::to_string(i) + "]";
        if (item.is_object() && item.contains("id") && item["id"].is_string()) id = item["id"].get<std::string>();
        try {
            out.push_back(parse(item));
        } catch (const std::exception& e) {
            issues.push_back({id, std::string("schema violation: ") + e.what()});
        }
    }
}

} // namespace

ScanValidation validate_scan(const json& doc)
{
    ScanValidation v;
    if (!doc.is_object()) {
        v.issues.push_back({"", "schema violation: scan document must be a JSON object"});
        return v;
    }
    parse_list(doc, "walls", v.scan.walls, v.issues, wall_from_json);
    parse_list(doc, "objects", v.scan.objects, v.issues, object_from_json);
    parse_list(doc, "frames", v.scan.frames, v.issues, frame_from_json);

    std::set<std::string> ids;
    auto unique = [&](const std::string& id) {
        if (!ids.insert(id).second) v.issues.push_back({id, "duplicate id"});
    };
    for (const auto& w : v.scan.walls) {
        unique(w.id);
        check_wall(w, v.issues);
    }
    for (const auto& o : v.scan.objects) {
        unique(o.id);
        check_object(o, v.issues);
    }
    for (const auto& f : v.scan.frames) {
        unique(f.id);
        check_frame(f, v.issues);
    }
    for (const auto& o : v.scan.objects) {
        for (const auto& c : o.crops) {
            if (!v.scan.frame(c.frame_id)) v.issues.push_back({o.id, "crop references unknown frame " + c.frame_id});
        }
    }
    return v;
}

std::string dump_canonical(const json& j)
{
    // nlohmann::json keeps object keys sorted and prints the shortest round-trip form
    return j.dump(2) + "\n";
}

} // namespace scenesmith
