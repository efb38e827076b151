#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace recflex {

enum class TaskMode { TopK, CTR, Impression };

inline TaskMode task_mode_from_string(const std::string& s) {
    if (s == "TopK") return TaskMode::TopK;
    if (s == "CTR") return TaskMode::CTR;
    if (s == "Impression") return TaskMode::Impression;
    throw std::runtime_error("unknown model_mode: " + s);
}

inline std::string to_string(TaskMode m) {
    switch (m) {
        case TaskMode::TopK: return "TopK";
        case TaskMode::CTR: return "CTR";
        case TaskMode::Impression: return "Impression";
    }
    return "?";
}

// Full experiment configuration. Field names follow the command-line flags.
struct RunConfig {
    TaskMode model_mode = TaskMode::TopK;
    std::string model_name = "BPRMF";
    int emb_size = 64;
    double lr = 1e-3;
    double l2 = 0.0;
    std::string optimizer = "Adam";
    bool full_l2 = false;
    int batch_size = 256;
    int epochs = 200;
    int patience = 10;
    int num_neg = 1;        // training negatives per positive (TopK)
    int test_num_neg = 99;  // evaluation negatives, ignored when neg_items given
    std::vector<int> topk = {5, 10, 20};
    int history_max = 20;
    std::string main_metric;  // empty = mode default
    std::uint64_t random_seed = 0;
    std::string loss_name = "list_bpr";  // Impression-mode training loss
    std::string base_model_name;         // re-ranking backbone
    std::string base_model_path;
    bool include_user_features = false;
    bool include_item_features = false;
    bool include_situation_features = false;
    std::vector<int> hidden_sizes = {64, 64};
    int position_emb_size = 8;
    int max_list_length = 100;

    std::string train_path, dev_path, test_path;
    std::string user_meta_path, item_meta_path;
    std::string checkpoint_dir;
    bool use_cache = true;

    bool is_reranker() const { return model_name == "PRMLite"; }

    std::string resolved_main_metric() const {
        if (!main_metric.empty()) return main_metric;
        switch (model_mode) {
            case TaskMode::CTR: return "AUC";
            case TaskMode::Impression: return "NDCG@" + std::to_string(topk.front());
            case TaskMode::TopK:
                // NDCG@5 when computed, otherwise the first configured cutoff
                for (int k : topk)
                    if (k == 5) return "NDCG@5";
                return "NDCG@" + std::to_string(topk.front());
        }
        return "NDCG@5";
    }

    void validate() const {
        if (model_mode == TaskMode::CTR && num_neg != 0)
            throw std::runtime_error("num_neg must be 0 in CTR mode");
        if (model_mode == TaskMode::TopK && num_neg < 1)
            throw std::runtime_error("num_neg must be >= 1 in TopK mode");
        if (is_reranker()) {
            if (model_mode != TaskMode::Impression)
                throw std::runtime_error("PRMLite supports only Impression mode");
            if (base_model_path.empty())
                throw std::runtime_error("re-ranker requires --base_model_path");
        }
        if (topk.empty()) throw std::runtime_error("topk cutoffs must not be empty");
        for (int k : topk)
            if (k < 1) throw std::runtime_error("topk cutoffs must be positive");
        if (batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
        if (epochs < 1) throw std::runtime_error("epochs must be >= 1");
        if (patience < 0) throw std::runtime_error("patience must be >= 0");
        if (history_max < 1) throw std::runtime_error("history_max must be >= 1");
        if (loss_name != "list_bpr" && loss_name != "listnet" && loss_name != "softmax_ce")
            throw std::runtime_error("unknown loss_name: " + loss_name);
    }
};

}  // namespace recflex
