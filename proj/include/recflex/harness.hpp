#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "recflex/runners.hpp"

namespace recflex {

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    return nlohmann::json{{"model_mode", to_string(c.model_mode)},
                          {"model_name", c.model_name},
                          {"emb_size", c.emb_size},
                          {"lr", c.lr},
                          {"l2", c.l2},
                          {"optimizer", c.optimizer},
                          {"full_l2", c.full_l2},
                          {"batch_size", c.batch_size},
                          {"epochs", c.epochs},
                          {"patience", c.patience},
                          {"num_neg", c.num_neg},
                          {"test_num_neg", c.test_num_neg},
                          {"topk", c.topk},
                          {"history_max", c.history_max},
                          {"main_metric", c.resolved_main_metric()},
                          {"random_seed", c.random_seed},
                          {"loss_name", c.loss_name},
                          {"base_model_name", c.base_model_name},
                          {"base_model_path", c.base_model_path},
                          {"include_user_features", c.include_user_features},
                          {"include_item_features", c.include_item_features},
                          {"include_situation_features", c.include_situation_features},
                          {"hidden_sizes", c.hidden_sizes},
                          {"position_emb_size", c.position_emb_size},
                          {"max_list_length", c.max_list_length},
                          {"train_path", c.train_path},
                          {"dev_path", c.dev_path},
                          {"test_path", c.test_path},
                          {"user_meta_path", c.user_meta_path},
                          {"item_meta_path", c.item_meta_path},
                          {"checkpoint_dir", c.checkpoint_dir},
                          {"use_cache", c.use_cache}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.model_mode = task_mode_from_string(j.at("model_mode").get<std::string>());
    c.model_name = j.at("model_name").get<std::string>();
    c.emb_size = j.at("emb_size").get<int>();
    c.lr = j.at("lr").get<double>();
    c.l2 = j.at("l2").get<double>();
    c.optimizer = j.at("optimizer").get<std::string>();
    c.full_l2 = j.at("full_l2").get<bool>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.num_neg = j.at("num_neg").get<int>();
    c.test_num_neg = j.at("test_num_neg").get<int>();
    c.topk = j.at("topk").get<std::vector<int>>();
    c.history_max = j.at("history_max").get<int>();
    c.main_metric = j.at("main_metric").get<std::string>();
    c.random_seed = j.at("random_seed").get<std::uint64_t>();
    c.loss_name = j.at("loss_name").get<std::string>();
    c.base_model_name = j.at("base_model_name").get<std::string>();
    c.base_model_path = j.at("base_model_path").get<std::string>();
    c.include_user_features = j.at("include_user_features").get<bool>();
    c.include_item_features = j.at("include_item_features").get<bool>();
    c.include_situation_features = j.at("include_situation_features").get<bool>();
    c.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    c.position_emb_size = j.at("position_emb_size").get<int>();
    c.max_list_length = j.at("max_list_length").get<int>();
    c.train_path = j.at("train_path").get<std::string>();
    c.dev_path = j.at("dev_path").get<std::string>();
    c.test_path = j.at("test_path").get<std::string>();
    c.user_meta_path = j.at("user_meta_path").get<std::string>();
    c.item_meta_path = j.at("item_meta_path").get<std::string>();
    c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
    c.use_cache = j.at("use_cache").get<bool>();
    return c;
}

struct ExperimentSpec {
    RunConfig config;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string out_dir;  // empty = do not write result files
};

struct MetricStats {
    double mean = 0.0;
    double std = 0.0;  // sample std (n-1); 0 for a single run
};

struct SeedResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    MetricReport report;
};

struct ExperimentResult {
    std::vector<SeedResult> runs;
    std::map<std::string, MetricStats> aggregate;  // over successful runs only
};

inline MetricStats mean_and_std(const std::vector<double>& xs) {
    MetricStats s;
    auto n = static_cast<double>(xs.size());
    for (double x : xs) s.mean += x;
    s.mean /= n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

inline void write_experiment_results(const ExperimentResult& result, const RunConfig& config,
                                     const std::string& out_dir);

// Runs the same configuration across seeds sequentially. A failing seed is
// recorded and skipped in the aggregate; all seeds failing is an error.
inline ExperimentResult run_experiment(const ExperimentSpec& spec,
                                       std::ostream* log = nullptr) {
    if (spec.seeds.empty()) throw std::runtime_error("experiment needs at least one seed");
    for (std::size_t i = 0; i < spec.seeds.size(); ++i)
        for (std::size_t j = i + 1; j < spec.seeds.size(); ++j)
            if (spec.seeds[i] == spec.seeds[j])
                throw std::runtime_error("duplicate seed: " + std::to_string(spec.seeds[i]));

    Corpus corpus = load_corpus(spec.config);
    ExperimentResult result;
    for (std::uint64_t seed : spec.seeds) {
        SeedResult run;
        run.seed = seed;
        RunConfig config = spec.config;
        config.random_seed = seed;
        if (!config.checkpoint_dir.empty())
            config.checkpoint_dir += "/seed" + std::to_string(seed);
        try {
            if (log) (*log) << "=== seed " << seed << " ===\n";
            run.report = run_task(config, corpus, log).test_report;
        } catch (const std::exception& e) {
            run.failed = true;
            run.error = e.what();
            if (log) (*log) << "seed " << seed << " failed: " << e.what() << "\n";
        }
        result.runs.push_back(std::move(run));
    }

    std::map<std::string, std::vector<double>> by_metric;
    for (const auto& run : result.runs) {
        if (run.failed) continue;
        for (const auto& [name, value] : run.report.entries) by_metric[name].push_back(value);
    }
    if (by_metric.empty()) throw std::runtime_error("all seeds failed");
    for (const auto& [name, values] : by_metric)
        result.aggregate[name] = mean_and_std(values);

    if (!spec.out_dir.empty()) write_experiment_results(result, spec.config, spec.out_dir);
    return result;
}

inline void write_experiment_results(const ExperimentResult& result, const RunConfig& config,
                                     const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (const auto& run : result.runs) {
        nlohmann::json j;
        j["seed"] = run.seed;
        j["failed"] = run.failed;
        if (run.failed)
            j["error"] = run.error;
        else
            j["metrics"] = run.report.entries;
        RunConfig resolved = config;
        resolved.random_seed = run.seed;
        j["config"] = run_config_to_json(resolved);
        std::ofstream f(std::filesystem::path(out_dir) /
                        ("result_seed" + std::to_string(run.seed) + ".json"));
        if (!f) throw std::runtime_error("cannot write results in " + out_dir);
        f << j.dump(2) << "\n";
    }

    nlohmann::json agg;
    agg["config"] = run_config_to_json(config);
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [name, stats] : result.aggregate)
        metrics[name] = {{"mean", stats.mean}, {"std", stats.std}};
    agg["metrics"] = std::move(metrics);
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& run : result.runs)
        seeds.push_back({{"seed", run.seed}, {"failed", run.failed}});
    agg["seeds"] = std::move(seeds);
    std::ofstream jf(std::filesystem::path(out_dir) / "aggregate.json");
    if (!jf) throw std::runtime_error("cannot write aggregate.json in " + out_dir);
    jf << agg.dump(2) << "\n";

    std::ofstream tf(std::filesystem::path(out_dir) / "aggregate.tsv");
    if (!tf) throw std::runtime_error("cannot write aggregate.tsv in " + out_dir);
    tf << "metric\tmean\tstd\n";
    tf.precision(10);
    for (const auto& [name, stats] : result.aggregate)
        tf << name << "\t" << stats.mean << "\t" << stats.std << "\n";
}

// Reloads written per-seed results; warns (does not fail) when a result file
// was produced by a different configuration.
inline ExperimentResult read_experiment_results(const std::string& out_dir,
                                                const RunConfig& expected,
                                                std::ostream* warn = nullptr) {
    ExperimentResult result;
    nlohmann::json expected_json = run_config_to_json(expected);
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(out_dir))
        throw std::runtime_error("no such results directory: " + out_dir);
    for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
        auto name = entry.path().filename().string();
        if (name.rfind("result_seed", 0) == 0 && entry.path().extension() == ".json")
            files.push_back(entry.path());
    }
    if (files.empty()) throw std::runtime_error("no result files in " + out_dir);
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream f(path);
        nlohmann::json j = nlohmann::json::parse(f);
        SeedResult run;
        run.seed = j.at("seed").get<std::uint64_t>();
        run.failed = j.at("failed").get<bool>();
        if (run.failed)
            run.error = j.value("error", "");
        else
            for (const auto& [name, value] : j.at("metrics").items())
                run.report.entries[name] = value.get<double>();
        nlohmann::json stored = j.at("config");
        stored["random_seed"] = expected.random_seed;  // seed differs by design
        nlohmann::json want = expected_json;
        want["random_seed"] = expected.random_seed;
        if (warn && stored != want)
            (*warn) << "warning: " << path.filename().string()
                    << " was produced by a different configuration\n";
        result.runs.push_back(std::move(run));
    }
    std::map<std::string, std::vector<double>> by_metric;
    for (const auto& run : result.runs) {
        if (run.failed) continue;
        for (const auto& [name, value] : run.report.entries) by_metric[name].push_back(value);
    }
    for (const auto& [name, values] : by_metric)
        result.aggregate[name] = mean_and_std(values);
    return result;
}

}  // namespace recflex
