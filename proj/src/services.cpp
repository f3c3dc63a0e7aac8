#include <scenesmith/services.hpp>
#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>
#include <scenesmith/random.hpp>

#include <algorithm>

namespace scenesmith {

Embedding stub_embedding(std::span<const std::uint8_t> bytes, int dim, std::uint64_t seed)
{
    if (dim <= 0) throw ValidationError("embedding dimension must be positive");
    Rng rng(digest64(bytes) ^ seed);
    Embedding v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
    return v / v.norm();
}

namespace {

json choose_by_score(const json& candidates, const char* rationale)
{
    if (!candidates.is_array() || candidates.empty()) throw ServiceError("stub oracle: empty candidate list");
    const json* best = nullptr;
    for (const auto& c : candidates) {
        if (!best || c.at("score").get<double>() > (*best).at("score").get<double>() ||
            (c.at("score").get<double>() == (*best).at("score").get<double>() &&
             c.at("id").get<std::string>() < (*best).at("id").get<std::string>())) {
            best = &c;
        }
    }
    return {{"chosen_id", best->at("id")}, {"rationale", rationale}};
}

} // namespace

json stub_oracle_answer(const json& request)
{
    const std::string task = request.value("task", "");
    if (task == "select_asset") {
        return choose_by_score(request.at("candidates"), "stub: highest embedding similarity");
    }
    if (task == "material_confirm") {
        return choose_by_score(request.at("candidates"), "stub: highest albedo similarity");
    }
    if (task == "material_category") {
        std::string best;
        double best_score = 0.0;
        for (const auto& [cat, score] : request.at("category_scores").items()) {
            // items() iterates keys in sorted order, so ties keep the smaller name
            if (best.empty() || score.get<double>() > best_score) {
                best = cat;
                best_score = score.get<double>();
            }
        }
        json candidates = json::array();
        if (!best.empty()) {
            const json& ranked = request.at("ranked").at(best);
            for (size_t i = 0; i < ranked.size() && i < 10; ++i) candidates.push_back(ranked[i]);
        }
        return {{"category", best}, {"candidates", candidates}};
    }
    if (task == "map_segments") {
        const json& patches = request.at("patches");
        if (patches.empty()) throw ServiceError("stub oracle: no patches to map");
        json mapping = json::object();
        for (const auto& s : request.at("segments")) mapping[s.get<std::string>()] = patches[0];
        return {{"mapping", mapping}};
    }
    if (task == "target_color") {
        json colors = json::array();
        for (const auto& p : request.at("patches")) colors.push_back(p.at("mean_rgb"));
        return {{"colors", colors}};
    }
    if (task == "patch_validity") {
        return {{"valid", std::vector<bool>(request.at("patches").size(), true)}};
    }
    if (task == "mass") {
        return {{"mass_kg", request.at("volume").get<double>() * request.at("density").get<double>()}};
    }
    throw ServiceError("stub oracle: unknown task '" + task + "'");
}

} // namespace scenesmith
