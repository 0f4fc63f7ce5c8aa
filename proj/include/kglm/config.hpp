#pragma once

#include <map>
#include <string>

#include "kglm/adamw.hpp"
#include "kglm/kg.hpp"
#include "kglm/nn.hpp"

namespace kglm {

// Flat key = value experiment configuration. Every run serializes its
// resolved configuration next to its outputs; unknown keys are errors.
class ExperimentConfig {
public:
    // data
    std::string dataset_dir;
    std::string train_path, valid_path, test_path;
    std::string entity_text_path, relation_text_path, entity_type_path;
    std::string dataset_name;

    // model
    std::string model_kind = "kglm";
    std::string scheme = "gr";
    int64_t layers = 4;
    int64_t hidden_dim = 128;
    int64_t heads = 4;
    int64_t ffn_dim = 512;
    int64_t max_position = 64;
    double dropout = 0.1;
    int64_t max_len = 64;
    int64_t min_freq = 1;

    // optimizer
    int64_t batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    int64_t warmup_steps = 0;

    // pre-training
    int64_t pretrain_epochs = 20;
    double pretrain_lr = 5e-5;
    double mask_prob = 0.15;
    double mask_frac = 0.8;
    double random_frac = 0.1;
    double holdout_frac = 0.05;
    std::string er_embeddings = "train";  // train | frozen_zero

    // fine-tuning
    int64_t finetune_epochs = 3;
    double finetune_lr = 1e-4;
    double alpha = 0.5;
    bool alpha_sweep = false;
    std::string ablation = "full";  // full | claim1 | claim2
    int64_t val_corruptions = 50;   // sampled corruptions per side per val triple
    int64_t val_triple_sample = 0;  // 0 = all validation triples
    double star_loss_weight = 0.5;
    double star_margin = 1.0;

    // evaluation
    std::string eval_mode = "full";  // full | sampled
    int64_t sample_k = 100;
    std::string tie_policy = "mean";
    std::string corruption_exclude = "both";  // both | replaced

    // run
    int64_t seed = 0;  // 0 = unset
    int64_t threads = 1;
    bool deterministic = false;
    std::string out_dir;
    std::string run_label;
    std::string corpus_cache;

    ExperimentConfig();
    ExperimentConfig(const ExperimentConfig&) = delete;
    ExperimentConfig& operator=(const ExperimentConfig&) = delete;

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    std::string serialize() const;

    // resolved helpers -----------------------------------------------------
    DatasetPaths dataset_paths() const;  // honors $KGLM_DATA_ROOT for relative dirs
    ModelConfig model_config(int32_t vocab_size, int32_t er_table_size) const;
    AdamWConfig adamw_config(double lr) const;
    MaskingConfig masking_config() const;
    int32_t effective_threads() const;  // deterministic forces 1
    std::string label() const;          // run_label or a derived one
    void require_seed(const std::string& why) const;

private:
    enum class Kind : uint8_t { Int, Real, Bool, Str };
    struct Binding {
        Kind kind;
        void* ptr;
    };
    std::map<std::string, Binding> bindings_;
    void bind();
};

}  // namespace kglm
