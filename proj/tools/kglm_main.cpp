// kglm: pre-train, fine-tune, and evaluate knowledge-graph language models.
//
// Exit codes: 0 success, 2 configuration error, 3 artifact mismatch,
// 4 runtime divergence.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kglm/baselines.hpp"
#include "kglm/checkpoint.hpp"
#include "kglm/config.hpp"
#include "kglm/report.hpp"
#include "kglm/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kglm;

namespace {

void apply_extras(ExperimentConfig& cfg, std::vector<std::string> extras) {
    // CLI11 returns leftovers in reverse order
    std::reverse(extras.begin(), extras.end());
    for (size_t i = 0; i < extras.size(); ++i) {
        const std::string& arg = extras[i];
        if (arg.rfind("--", 0) != 0)
            throw ConfigError("expected --key value overrides, got '" + arg + "'");
        std::string key = arg.substr(2);
        if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
            cfg.set(key, extras[i + 1]);
            ++i;
        } else {
            cfg.set(key, "true");  // bare boolean flag, e.g. --deterministic
        }
    }
}

void load_config(ExperimentConfig& cfg, const std::string& config_path,
                 const std::vector<std::string>& extras) {
    if (!config_path.empty()) cfg.load_file(config_path);
    apply_extras(cfg, extras);
}

fs::path prepare_out_dir(const ExperimentConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("config key 'out_dir' is required");
    fs::path out(cfg.out_dir);
    fs::create_directories(out);
    std::ofstream resolved(out / "config_resolved.cfg");
    resolved << cfg.serialize();
    return out;
}

std::string dataset_label(const ExperimentConfig& cfg) {
    if (!cfg.dataset_name.empty()) return cfg.dataset_name;
    if (!cfg.dataset_dir.empty()) return fs::path(cfg.dataset_dir).filename().string();
    return "dataset";
}

struct LogWriter {
    std::ofstream file;
    std::string phase;
    std::vector<TrainLog> entries;

    LogWriter(const fs::path& path, std::string phase_) : file(path), phase(std::move(phase_)) {}
    void operator()(const TrainLog& e) {
        entries.push_back(e);
        file << train_log_line(e, phase) << "\n";
        file.flush();
        if (phase == "pretrain")
            std::cerr << "[" << phase << "] epoch " << e.epoch << " loss " << e.train_loss
                      << " holdout " << e.holdout_loss << "\n";
        else
            std::cerr << "[" << phase << "] epoch " << e.epoch << " loss " << e.train_loss
                      << " val_mrr " << e.val_mrr << "\n";
    }
};

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

int cmd_pretrain(const ExperimentConfig& cfg) {
    cfg.require_seed("pre-training shuffles and masking are seeded");
    ModelKind kind = model_kind_from_string(cfg.model_kind);
    if (kind == ModelKind::Star)
        throw ConfigError("model_kind star has no MLM corpus; pre-train kgbert and fine-tune "
                          "star from that checkpoint");

    KnowledgeGraph kg = load_dataset(cfg.dataset_paths());
    ERTypeScheme scheme;
    if (kind == ModelKind::Kglm)
        scheme = build_scheme(kg, scheme_variant_from_string(cfg.scheme));

    Vocab vocab = build_corpus_vocab(kg, cfg.min_freq);
    std::vector<EncodedSequence> corpus;
    bool cached = false;
    if (!cfg.corpus_cache.empty())
        cached = load_corpus_cache(cfg.corpus_cache, vocab, corpus);
    if (!cached) {
        corpus = build_pretrain_corpus(kg, kind == ModelKind::Kglm ? &scheme : nullptr, vocab,
                                       static_cast<int32_t>(cfg.max_len), kind);
        if (!cfg.corpus_cache.empty()) save_corpus_cache(cfg.corpus_cache, corpus, vocab);
    }
    std::cerr << "[pretrain] corpus: " << corpus.size() << " sequences, vocab " << vocab.size()
              << "\n";

    const int32_t er_table =
        kind == ModelKind::Kglm ? scheme.table_size() : kSegmentTableSize;
    ModelConfig geometry = cfg.model_config(vocab.size(), er_table);

    PretrainOptions opt;
    opt.epochs = static_cast<int32_t>(cfg.pretrain_epochs);
    opt.batch_size = static_cast<int32_t>(cfg.batch_size);
    opt.adamw = cfg.adamw_config(cfg.pretrain_lr);
    opt.masking = cfg.masking_config();
    opt.holdout_frac = cfg.holdout_frac;
    opt.threads = cfg.effective_threads();
    opt.freeze_er = cfg.er_embeddings == "frozen_zero";
    if (!opt.freeze_er && cfg.er_embeddings != "train")
        throw ConfigError("er_embeddings must be train or frozen_zero");
    opt.seed = static_cast<uint64_t>(cfg.seed);

    fs::path out = prepare_out_dir(cfg);
    LogWriter log(out / "train_log.jsonl", "pretrain");
    PretrainResult result = pretrain(geometry, kind, corpus, opt, std::ref(log));

    CheckpointMeta meta;
    meta.kind = kind;
    meta.config = geometry;
    meta.vocab_tokens = vocab.tokens();
    meta.scheme = kind == ModelKind::Kglm ? describe(scheme) : segment_descriptor();
    meta.trained_epochs = result.epochs_done;
    meta.vocab_hash = vocab.hash();
    fs::path ckpt = out / "pretrained.ckpt";
    save_checkpoint(ckpt.string(), result.model, meta);

    write_loss_curve_svg((out / "loss_curve.svg").string(), log.entries, "pretrain");
    write_loss_curve_csv((out / "loss_curve.csv").string(), log.entries, "pretrain");

    if (result.diverged) {
        std::cerr << "error: training diverged; last good checkpoint kept at " << ckpt << "\n";
        return 4;
    }
    std::cout << ckpt.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// finetune
// ---------------------------------------------------------------------------

int cmd_finetune(const ExperimentConfig& cfg, const std::string& init_path,
                 const std::string& resume_path) {
    cfg.require_seed("negative sampling and shuffles are seeded");
    if (!init_path.empty() && !resume_path.empty())
        throw ConfigError("--init and --resume are mutually exclusive");
    ModelKind kind = model_kind_from_string(cfg.model_kind);
    AblationMode mode = ablation_from_string(cfg.ablation);
    if (kind != ModelKind::Kglm && mode != AblationMode::Full)
        throw ConfigError("ablation modes claim1/claim2 apply to the kglm model only");

    KnowledgeGraph kg = load_dataset(cfg.dataset_paths());
    ERTypeScheme scheme;
    if (kind == ModelKind::Kglm)
        scheme = build_scheme(kg, scheme_variant_from_string(cfg.scheme));
    const SchemeDescriptor want_scheme =
        kind == ModelKind::Kglm ? describe(scheme) : segment_descriptor();

    Vocab vocab = build_corpus_vocab(kg, cfg.min_freq);

    Model<float> model;
    OptimizerState<float> resume_state;
    bool has_resume = false;
    int64_t start_epoch = 0;

    auto check_meta = [&](const CheckpointMeta& meta, const std::string& path) {
        bool kind_ok = meta.kind == kind ||
                       (kind == ModelKind::Star && meta.kind == ModelKind::Kgbert);
        if (!kind_ok)
            throw ArtifactError("checkpoint " + path + " holds a " + to_string(meta.kind) +
                                " model, config expects " + to_string(kind));
        if (meta.scheme.table_size != want_scheme.table_size ||
            (meta.kind == kind && !(meta.scheme == want_scheme)))
            throw ArtifactError("checkpoint " + path +
                                " was built for a different ER-type scheme (table size " +
                                std::to_string(meta.scheme.table_size) + " vs " +
                                std::to_string(want_scheme.table_size) + ")");
        if (meta.vocab_hash != vocab.hash())
            throw ArtifactError("checkpoint " + path + " vocabulary does not match this "
                                "dataset/min_freq; re-run with the training configuration");
    };

    if (!resume_path.empty()) {
        CheckpointMeta meta = load_checkpoint(resume_path, model, &resume_state);
        check_meta(meta, resume_path);
        has_resume = true;
        start_epoch = meta.trained_epochs;
        if (start_epoch >= cfg.finetune_epochs) {
            std::cerr << "[finetune] checkpoint already trained for " << start_epoch
                      << " epochs; nothing to do\n";
        }
    } else if (!init_path.empty()) {
        if (mode == AblationMode::Claim2)
            throw ConfigError("claim2 fine-tunes from scratch; drop --init");
        CheckpointMeta meta = load_checkpoint(init_path, model);
        check_meta(meta, init_path);
        model.kind = kind;
    } else {
        if (kind == ModelKind::Kglm && mode != AblationMode::Claim2)
            throw ConfigError("kglm fine-tuning in mode '" + cfg.ablation +
                              "' needs --init <pretrained checkpoint>; use ablation = claim2 "
                              "to start from scratch");
        const int32_t er_table =
            kind == ModelKind::Kglm ? scheme.table_size() : kSegmentTableSize;
        Rng rng(static_cast<uint64_t>(cfg.seed) ^ 0xA5A5A5A5ull);
        model.init(cfg.model_config(vocab.size(), er_table), rng);
        model.kind = kind;
    }

    FinetuneOptions opt;
    opt.epochs = static_cast<int32_t>(std::max<int64_t>(0, cfg.finetune_epochs - start_epoch));
    opt.batch_size = static_cast<int32_t>(cfg.batch_size);
    opt.adamw = cfg.adamw_config(cfg.finetune_lr);
    opt.alpha = cfg.alpha;
    opt.max_len = static_cast<int32_t>(cfg.max_len);
    opt.threads = cfg.effective_threads();
    opt.mode = mode;
    opt.seed = static_cast<uint64_t>(cfg.seed);
    opt.val_corruptions_per_side = static_cast<int32_t>(cfg.val_corruptions);
    opt.val_triple_sample = static_cast<int32_t>(cfg.val_triple_sample);
    opt.star_loss_weight = cfg.star_loss_weight;
    opt.star_margin = cfg.star_margin;
    opt.start_epoch = start_epoch;

    fs::path out = prepare_out_dir(cfg);
    LogWriter log(out / "train_log.jsonl", "finetune");
    FinetuneResult result =
        finetune(kg, kind == ModelKind::Kglm ? &scheme : nullptr, kind, vocab,
                 std::move(model), opt, std::ref(log), has_resume ? &resume_state : nullptr);

    CheckpointMeta meta;
    meta.kind = kind;
    meta.config = result.model.cfg;
    meta.vocab_tokens = vocab.tokens();
    meta.scheme = want_scheme;
    meta.trained_epochs = result.best_epoch > 0 ? result.best_epoch : start_epoch;
    meta.vocab_hash = vocab.hash();
    fs::path ckpt = out / "finetuned.ckpt";
    save_checkpoint(ckpt.string(), result.model, meta, &result.opt_state);

    write_loss_curve_svg((out / "loss_curve.svg").string(), log.entries, "finetune");
    write_loss_curve_csv((out / "loss_curve.csv").string(), log.entries, "finetune");

    if (cfg.alpha_sweep && kind == ModelKind::Kglm) {
        json sweep = json::array();
        for (int step = 0; step <= 10; ++step) {
            double a = 0.1 * step;
            double mrr = validation_mrr_for_alpha(result.model, kg, &scheme, vocab, kind, opt, a);
            sweep.push_back({{"alpha", a}, {"val_mrr", mrr}});
            std::cerr << "[alpha-sweep] alpha " << a << " val_mrr " << mrr << "\n";
        }
        std::ofstream f(out / "alpha_sweep.json");
        f << sweep.dump(2) << "\n";
    }

    if (result.diverged) {
        std::cerr << "error: training diverged; last good checkpoint kept at " << ckpt << "\n";
        return 4;
    }
    std::cerr << "[finetune] best epoch " << result.best_epoch << " val_mrr "
              << result.best_val_mrr << "\n";
    std::cout << ckpt.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    Model<float> model;
    CheckpointMeta meta = load_checkpoint(checkpoint_path, model);

    KnowledgeGraph kg = load_dataset(cfg.dataset_paths());
    ERTypeScheme scheme;
    const bool is_kglm = meta.kind == ModelKind::Kglm;
    if (is_kglm) {
        scheme = build_scheme(kg, scheme_variant_from_string(meta.scheme.variant));
        if (!(describe(scheme) == meta.scheme))
            throw ArtifactError("checkpoint scheme does not match this dataset (table size " +
                                std::to_string(meta.scheme.table_size) + " vs " +
                                std::to_string(describe(scheme).table_size) + ")");
    }
    Vocab vocab = vocab_from_tokens(meta.vocab_tokens);
    if (build_corpus_vocab(kg, cfg.min_freq).hash() != meta.vocab_hash)
        throw ArtifactError("checkpoint vocabulary does not match this dataset/min_freq");

    EvaluateOptions opt;
    opt.alpha = cfg.alpha;
    opt.tie = tie_policy_from_string(cfg.tie_policy);
    opt.max_len = static_cast<int32_t>(cfg.max_len);
    opt.threads = cfg.effective_threads();
    opt.seed = static_cast<uint64_t>(cfg.seed);
    if (cfg.eval_mode == "sampled") {
        cfg.require_seed("sampled evaluation must be reproducible");
        opt.candidates.sampled = true;
        opt.candidates.sample_k = static_cast<int32_t>(cfg.sample_k);
    } else if (cfg.eval_mode != "full") {
        throw ConfigError("eval_mode must be full or sampled");
    }
    if (cfg.corruption_exclude == "replaced") opt.candidates.exclude_both_endpoints = false;
    else if (cfg.corruption_exclude != "both")
        throw ConfigError("corruption_exclude must be both or replaced");

    fs::path out = prepare_out_dir(cfg);
    int32_t stride = std::max<int32_t>(1, int32_t(kg.test.size() / 20));
    EvalReport report = evaluate(model, kg, is_kglm ? &scheme : nullptr, vocab, meta.kind, opt,
                                 [&](int32_t i, int32_t total) {
                                     if (i % stride == 0)
                                         std::cerr << "[evaluate] " << i << "/" << total << "\n";
                                 });
    report.dataset = dataset_label(cfg);
    report.label = cfg.label();

    write_eval_report_json((out / "eval_report.json").string(), report);
    write_rank_csv((out / "ranks.csv").string(), report);
    write_rank_histogram_svg((out / "rank_histogram.svg").string(), report.ranks);

    std::cout << "ranks " << report.ranks.size() << "  MR " << report.mr << "  MRR "
              << report.mrr;
    for (const auto& [n, frac] : report.hits) std::cout << "  hits@" << n << " " << frac;
    std::cout << "\n" << (out / "eval_report.json").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::vector<std::string>& files, const std::string& out_path) {
    std::vector<EvalReport> reports;
    reports.reserve(files.size());
    for (const auto& f : files) reports.push_back(load_eval_report_json(f));
    std::string table = comparison_markdown(reports);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw ConfigError("cannot write " + out_path);
        out << table;
    }
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph language model: pre-training, fine-tuning, link prediction"};
    app.require_subcommand(1);

    std::string config_path, init_path, resume_path, checkpoint_path, out_path;
    std::vector<std::string> report_files;

    auto* pre = app.add_subcommand("pretrain", "MLM pre-training over the triple corpus");
    pre->add_option("--config", config_path, "key = value config file");
    pre->allow_extras();

    auto* fine = app.add_subcommand("finetune", "triple-classification fine-tuning");
    fine->add_option("--config", config_path, "key = value config file");
    fine->add_option("--init", init_path, "pretrained checkpoint to start from");
    fine->add_option("--resume", resume_path, "fine-tune checkpoint to continue");
    fine->allow_extras();

    auto* ev = app.add_subcommand("evaluate", "filtered link-prediction evaluation");
    ev->add_option("--config", config_path, "key = value config file");
    ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    ev->allow_extras();

    auto* rep = app.add_subcommand("report", "merge eval reports into a comparison table");
    rep->add_option("files", report_files, "eval_report.json files")->required();
    rep->add_option("-o,--out", out_path, "write the markdown table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg;
        if (pre->parsed()) {
            load_config(cfg, config_path, pre->remaining());
            return cmd_pretrain(cfg);
        }
        if (fine->parsed()) {
            load_config(cfg, config_path, fine->remaining());
            return cmd_finetune(cfg, init_path, resume_path);
        }
        if (ev->parsed()) {
            load_config(cfg, config_path, ev->remaining());
            return cmd_evaluate(cfg, checkpoint_path);
        }
        if (rep->parsed()) return cmd_report(report_files, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ArtifactError& e) {
        std::cerr << "artifact error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
