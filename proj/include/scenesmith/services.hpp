#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace scenesmith {

using json = nlohmann::json;
using Embedding = Eigen::VectorXd;

/// Maps image bytes to a unit-norm feature vector. Must be deterministic and thread-safe.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual Embedding embed(std::span<const std::uint8_t> image) = 0;
    virtual std::string model_tag() const = 0;
};

/// Deterministic embedding of raw bytes: a hash of the bytes seeds a Gaussian draw that is then normalized.
Embedding stub_embedding(std::span<const std::uint8_t> bytes, int dim, std::uint64_t seed);

class StubEmbeddingProvider : public EmbeddingProvider {
public:
    explicit StubEmbeddingProvider(int dim = 64, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
    Embedding embed(std::span<const std::uint8_t> image) override { return stub_embedding(image, dim_, seed_); }
    std::string model_tag() const override { return "stub-hash"; }

private:
    int dim_;
    std::uint64_t seed_;
};

/// Request/response chooser standing in for a multimodal model.
///
/// Every request carries a "task" field; the reply shape is task-specific.
class Oracle {
public:
    virtual ~Oracle() = default;
    virtual json ask(const json& request) = 0;
};

/// Deterministic answers for every task the pipeline issues.
///
///  select_asset       {candidates:[{id, score}]}              -> {chosen_id, rationale}
///  material_category  {category_scores:{c: s}, ranked:{c:[id]}} -> {category, candidates}
///  material_confirm   {candidates:[{id, score}]}              -> {chosen_id, rationale}
///  map_segments       {segments:[id], patches:[id]}           -> {mapping:{segment: patch}}
///  target_color       {patches:[{id, mean_rgb}]}              -> {colors:[[r,g,b]]}
///  patch_validity     {patches:[id]}                          -> {valid:[bool]}
///  mass               {volume, density}                       -> {mass_kg}
json stub_oracle_answer(const json& request);

class StubOracle : public Oracle {
public:
    json ask(const json& request) override { return stub_oracle_answer(request); }
};

/// Wraps a callable; used for scripted oracles.
class FunctionOracle : public Oracle {
public:
    explicit FunctionOracle(std::function<json(const json&)> fn) : fn_(std::move(fn)) {}
    json ask(const json& request) override { return fn_(request); }

private:
    std::function<json(const json&)> fn_;
};

} // namespace scenesmith
