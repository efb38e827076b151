#pragma once

#include <memory>

#include "recflex/config.hpp"
#include "recflex/models/bpr_mf.hpp"
#include "recflex/models/fm.hpp"
#include "recflex/models/fpmc.hpp"
#include "recflex/models/most_popular.hpp"
#include "recflex/models/prm_lite.hpp"
#include "recflex/models/wide_deep.hpp"

namespace recflex {

inline bool model_supports_mode(const std::string& model_name, TaskMode mode) {
    if (model_name == "MostPopular" || model_name == "BPRMF" || model_name == "FPMC")
        return mode == TaskMode::TopK || mode == TaskMode::Impression;
    if (model_name == "FM" || model_name == "WideDeep")
        return mode == TaskMode::TopK || mode == TaskMode::CTR;
    if (model_name == "PRMLite") return mode == TaskMode::Impression;
    return false;
}

inline bool model_is_sequential(const std::string& model_name) {
    return model_name == "FPMC";
}

inline bool model_is_context_aware(const std::string& model_name) {
    return model_name == "FM" || model_name == "WideDeep";
}

template <typename T>
std::unique_ptr<Scorer<T>> init_model(const std::string& model_name, const Corpus& corpus,
                                      const ModelHyperparams& hp, Rng& rng) {
    if (model_name == "MostPopular") return std::make_unique<MostPopular<T>>(corpus);
    if (model_name == "BPRMF") return std::make_unique<BprMf<T>>(corpus, hp, rng);
    if (model_name == "FPMC") return std::make_unique<Fpmc<T>>(corpus, hp, rng);
    if (model_name == "FM") return std::make_unique<Fm<T>>(corpus, hp, rng);
    if (model_name == "WideDeep") return std::make_unique<WideDeep<T>>(corpus, hp, rng);
    if (model_name == "PRMLite") return std::make_unique<PrmLite<T>>(corpus, hp, rng);
    throw std::runtime_error("unknown model kind: " + model_name);
}

template <typename T>
std::unique_ptr<Scorer<T>> init_model(const RunConfig& config, const Corpus& corpus,
                                      Rng& rng) {
    if (!model_supports_mode(config.model_name, config.model_mode))
        throw std::runtime_error("model " + config.model_name + " does not support mode " +
                                 to_string(config.model_mode));
    ModelHyperparams hp;
    hp.emb_size = config.emb_size;
    hp.hidden_sizes = config.hidden_sizes;
    hp.position_emb_size = config.position_emb_size;
    hp.max_list_length = config.max_list_length;
    hp.include_user_features = config.include_user_features;
    hp.include_item_features = config.include_item_features;
    hp.include_situation_features = config.include_situation_features;
    return init_model<T>(config.model_name, corpus, hp, rng);
}

}  // namespace recflex
