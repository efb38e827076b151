#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "recflex/config.hpp"
#include "recflex/hash.hpp"
#include "recflex/models/factory.hpp"

namespace recflex {

// Stable digest of the id spaces and context schema a model was trained
// against; a checkpoint only loads against a corpus with the same digest.
inline std::string schema_fingerprint(const Corpus& corpus) {
    Sha256 h;
    h.update(&corpus.n_users, sizeof(corpus.n_users));
    h.update(&corpus.n_items, sizeof(corpus.n_items));
    for (const auto& f : corpus.schema.features) {
        h.update(f.name);
        auto scope = static_cast<std::uint8_t>(f.scope);
        h.update(&scope, 1);
        std::uint8_t cat = f.categorical ? 1 : 0;
        h.update(&cat, 1);
        h.update(&f.cardinality, sizeof(f.cardinality));
        h.update(&f.mean, sizeof(f.mean));
        h.update(&f.stdev, sizeof(f.stdev));
    }
    return hex(h.finish());
}

inline nlohmann::json hyperparams_to_json(const ModelHyperparams& hp) {
    return nlohmann::json{{"emb_size", hp.emb_size},
                          {"hidden_sizes", hp.hidden_sizes},
                          {"position_emb_size", hp.position_emb_size},
                          {"max_list_length", hp.max_list_length},
                          {"include_user_features", hp.include_user_features},
                          {"include_item_features", hp.include_item_features},
                          {"include_situation_features", hp.include_situation_features}};
}

inline ModelHyperparams hyperparams_from_json(const nlohmann::json& j) {
    ModelHyperparams hp;
    hp.emb_size = j.at("emb_size").get<int>();
    hp.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    hp.position_emb_size = j.at("position_emb_size").get<int>();
    hp.max_list_length = j.at("max_list_length").get<int>();
    hp.include_user_features = j.at("include_user_features").get<bool>();
    hp.include_item_features = j.at("include_item_features").get<bool>();
    hp.include_situation_features = j.at("include_situation_features").get<bool>();
    return hp;
}

// Checkpoint layout: <dir>/manifest.json plus <dir>/params.bin holding the
// parameters as little-endian f32, concatenated in manifest order.
inline void save_checkpoint(const Scorer<float>& scorer, const ModelHyperparams& hp,
                            TaskMode mode, const Corpus& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const ParamSet<float>* params = scorer.params();

    nlohmann::json manifest;
    manifest["model_name"] = scorer.name();
    manifest["model_mode"] = to_string(mode);
    manifest["schema_fingerprint"] = schema_fingerprint(corpus);
    manifest["hyperparams"] = hyperparams_to_json(hp);
    nlohmann::json param_list = nlohmann::json::array();
    std::int64_t offset = 0;
    if (params) {
        for (std::size_t i = 0; i < params->size(); ++i) {
            const auto& t = params->tensors[i];
            param_list.push_back({{"name", params->names[i]},
                                  {"shape", t.shape},
                                  {"offset", offset}});
            offset += t.numel();
        }
    }
    manifest["params"] = std::move(param_list);

    std::ofstream mf((std::filesystem::path(dir) / "manifest.json").string());
    if (!mf) throw std::runtime_error("cannot write manifest in " + dir);
    mf << manifest.dump(2) << "\n";

    std::ofstream bf((std::filesystem::path(dir) / "params.bin").string(), std::ios::binary);
    if (!bf) throw std::runtime_error("cannot write params.bin in " + dir);
    if (params)
        for (const auto& t : params->tensors)
            bf.write(reinterpret_cast<const char*>(t.value.data()),
                     static_cast<std::streamsize>(t.value.size() * sizeof(float)));
    if (!bf) throw std::runtime_error("write failure in " + dir);
}

struct CheckpointManifest {
    std::string model_name;
    TaskMode mode = TaskMode::TopK;
    std::string schema_fingerprint;
    ModelHyperparams hyperparams;
};

inline CheckpointManifest read_manifest(const std::string& dir) {
    std::ifstream mf((std::filesystem::path(dir) / "manifest.json").string());
    if (!mf) throw std::runtime_error("cannot open checkpoint manifest in " + dir);
    nlohmann::json j = nlohmann::json::parse(mf);
    CheckpointManifest m;
    m.model_name = j.at("model_name").get<std::string>();
    m.mode = task_mode_from_string(j.at("model_mode").get<std::string>());
    m.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
    m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    return m;
}

template <typename T>
std::unique_ptr<Scorer<T>> load_checkpoint(const std::string& dir, const Corpus& corpus,
                                           CheckpointManifest* manifest_out = nullptr) {
    CheckpointManifest m = read_manifest(dir);
    if (m.schema_fingerprint != schema_fingerprint(corpus))
        throw std::runtime_error("checkpoint schema fingerprint does not match corpus");
    Rng rng(0);  // parameters are overwritten below
    auto scorer = init_model<T>(m.model_name, corpus, m.hyperparams, rng);
    if (ParamSet<T>* params = scorer->params()) {
        std::string blob =
            read_file_bytes((std::filesystem::path(dir) / "params.bin").string());
        if (blob.size() != static_cast<std::size_t>(params->total_params()) * sizeof(float))
            throw std::runtime_error("params.bin size does not match model shapes");
        const float* src = reinterpret_cast<const float*>(blob.data());
        for (auto& t : params->tensors)
            for (auto& v : t.value) v = static_cast<T>(*src++);
    }
    if (manifest_out) *manifest_out = m;
    return scorer;
}

inline std::string checkpoint_params_hash(const std::string& dir) {
    return hex(sha256_file((std::filesystem::path(dir) / "params.bin").string()));
}

}  // namespace recflex
