#include <iostream>

#include <CLI11.hpp>

#include "recflex/harness.hpp"
#include "recflex/prep.hpp"
#include "recflex/runners.hpp"

namespace {

struct CliConfig {
    recflex::RunConfig run;
    std::string model_mode = "TopK";
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string out_dir;
};

void add_run_options(CLI::App* cmd, CliConfig& c) {
    auto& r = c.run;
    cmd->add_option("--model_mode", c.model_mode, "TopK, CTR, or Impression")
        ->capture_default_str();
    cmd->add_option("--model_name", r.model_name,
                    "MostPopular, BPRMF, FPMC, FM, WideDeep, or PRMLite")
        ->capture_default_str();
    cmd->add_option("--train", r.train_path, "train split TSV")->required();
    cmd->add_option("--dev", r.dev_path, "dev split TSV")->required();
    cmd->add_option("--test", r.test_path, "test split TSV")->required();
    cmd->add_option("--user_meta", r.user_meta_path, "user metadata TSV");
    cmd->add_option("--item_meta", r.item_meta_path, "item metadata TSV");
    cmd->add_option("--emb_size", r.emb_size)->capture_default_str();
    cmd->add_option("--lr", r.lr)->capture_default_str();
    cmd->add_option("--l2", r.l2)->capture_default_str();
    cmd->add_option("--optimizer", r.optimizer, "Adam or SGD")->capture_default_str();
    cmd->add_flag("--full_l2", r.full_l2, "apply L2 to all parameters every step");
    cmd->add_option("--batch_size", r.batch_size)->capture_default_str();
    cmd->add_option("--epochs", r.epochs)->capture_default_str();
    cmd->add_option("--patience", r.patience)->capture_default_str();
    cmd->add_option("--num_neg", r.num_neg, "training negatives per positive")
        ->capture_default_str();
    cmd->add_option("--test_num_neg", r.test_num_neg)->capture_default_str();
    cmd->add_option("--topk", r.topk, "ranking cutoffs")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--history_max", r.history_max)->capture_default_str();
    cmd->add_option("--main_metric", r.main_metric, "early-stopping metric");
    cmd->add_option("--random_seed", r.random_seed)->capture_default_str();
    cmd->add_option("--loss_name", r.loss_name, "list_bpr, listnet, or softmax_ce")
        ->capture_default_str();
    cmd->add_option("--base_model_name", r.base_model_name);
    cmd->add_option("--base_model_path", r.base_model_path, "frozen backbone checkpoint");
    cmd->add_flag("--include_user_features", r.include_user_features);
    cmd->add_flag("--include_item_features", r.include_item_features);
    cmd->add_flag("--include_situation_features", r.include_situation_features);
    cmd->add_option("--hidden_sizes", r.hidden_sizes)->delimiter(',')->capture_default_str();
    cmd->add_option("--position_emb_size", r.position_emb_size)->capture_default_str();
    cmd->add_option("--max_list_length", r.max_list_length)->capture_default_str();
    cmd->add_option("--checkpoint_dir", r.checkpoint_dir, "where to save the trained model");
    cmd->add_flag("!--no_cache", r.use_cache, "disable the corpus cache");
}

void print_report(const recflex::MetricReport& report) {
    for (const auto& [name, value] : report.entries)
        std::cout << name << "=" << value << "\n";
}

// CTR has no sampled training negatives; only an explicit conflicting
// --num_neg should be rejected.
void resolve_mode(CLI::App* cmd, CliConfig& c) {
    c.run.model_mode = recflex::task_mode_from_string(c.model_mode);
    if (c.run.model_mode == recflex::TaskMode::CTR && cmd->count("--num_neg") == 0)
        c.run.num_neg = 0;
}

int run_single(CLI::App* cmd, CliConfig& c) {
    resolve_mode(cmd, c);
    c.run.validate();
    std::cout << "config: " << recflex::run_config_to_json(c.run).dump() << "\n";
    auto outcome = recflex::run_task(c.run, &std::cout);
    std::cout << "test metrics:\n";
    print_report(outcome.test_report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"task-flexible recommender toolkit"};
    app.require_subcommand(1);

    // prep
    std::string prep_input, prep_out;
    recflex::PrepConfig prep_cfg;
    std::vector<double> split_ratios = {0.8, 0.1, 0.1};
    auto* prep = app.add_subcommand("prep", "turn a raw interaction log into splits");
    prep->add_option("--input", prep_input, "raw TSV: user_id item_id time [rating]")
        ->required();
    prep->add_option("--out_dir", prep_out)->required();
    prep->add_option("--k_core", prep_cfg.k_core)->capture_default_str();
    prep->add_option("--split", split_ratios, "train,dev,test ratios")
        ->delimiter(',')
        ->expected(3);
    prep->add_option("--session_len", prep_cfg.session_len)->capture_default_str();
    prep->add_option("--pos_threshold", prep_cfg.pos_threshold)->capture_default_str();
    prep->add_option("--situations", prep_cfg.situations, "hour, weekday, period")
        ->delimiter(',');

    // train / eval / rerank / exp share the run options
    CliConfig train_cfg, eval_cfg, rerank_cfg, exp_cfg;
    auto* train = app.add_subcommand("train", "train a model and report test metrics");
    add_run_options(train, train_cfg);
    auto* eval = app.add_subcommand("eval", "evaluate a saved checkpoint on the test split");
    add_run_options(eval, eval_cfg);
    auto* rerank =
        app.add_subcommand("rerank", "train a re-ranker on top of a frozen backbone");
    add_run_options(rerank, rerank_cfg);
    rerank_cfg.run.model_name = "PRMLite";
    rerank_cfg.model_mode = "Impression";
    auto* exp = app.add_subcommand("exp", "run one configuration across several seeds");
    add_run_options(exp, exp_cfg);
    exp->add_option("--seeds", exp_cfg.seeds)->delimiter(',')->capture_default_str();
    exp->add_option("--out_dir", exp_cfg.out_dir, "where to write per-seed results")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (prep->parsed()) {
            std::copy(split_ratios.begin(), split_ratios.end(),
                      prep_cfg.split_ratios.begin());
            recflex::prep_dataset(prep_input, prep_out, prep_cfg);
            std::cout << "wrote train/dev/test splits to " << prep_out << "\n";
            return 0;
        }
        if (train->parsed()) return run_single(train, train_cfg);
        if (rerank->parsed()) return run_single(rerank, rerank_cfg);
        if (eval->parsed()) {
            auto& c = eval_cfg;
            resolve_mode(eval, c);
            if (c.run.checkpoint_dir.empty())
                throw std::runtime_error("eval requires --checkpoint_dir");
            recflex::CheckpointManifest manifest;
            recflex::Corpus corpus = recflex::load_corpus(c.run);
            auto scorer =
                recflex::load_checkpoint<float>(c.run.checkpoint_dir, corpus, &manifest);
            c.run.model_name = manifest.model_name;
            c.run.validate();
            std::cout << "config: " << recflex::run_config_to_json(c.run).dump() << "\n";
            std::unique_ptr<recflex::Scorer<float>> backbone;
            if (scorer->is_reranker()) {
                if (c.run.base_model_path.empty())
                    throw std::runtime_error("re-ranker requires --base_model_path");
                backbone = recflex::load_checkpoint<float>(c.run.base_model_path, corpus);
            }
            auto report = recflex::evaluate(*scorer, corpus, recflex::Split::Test, c.run,
                                            backbone.get());
            std::cout << "test metrics:\n";
            print_report(report);
            return 0;
        }
        if (exp->parsed()) {
            auto& c = exp_cfg;
            resolve_mode(exp, c);
            c.run.validate();
            std::cout << "config: " << recflex::run_config_to_json(c.run).dump() << "\n";
            recflex::ExperimentSpec spec;
            spec.config = c.run;
            spec.seeds = c.seeds;
            spec.out_dir = c.out_dir;
            auto result = recflex::run_experiment(spec, &std::cout);
            std::cout << "aggregate over " << result.runs.size() << " seeds:\n";
            for (const auto& [name, stats] : result.aggregate)
                std::cout << name << "=" << stats.mean << " (std " << stats.std << ")\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
