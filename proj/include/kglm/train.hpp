#pragma once

#include <functional>

#include "kglm/adamw.hpp"
#include "kglm/corpus.hpp"
#include "kglm/eval.hpp"
#include "kglm/kg.hpp"
#include "kglm/nn.hpp"
#include "kglm/scheme.hpp"

namespace kglm {

// Word vocabulary over the textualized forward train triples. Inverse triples
// add no words (the [inv] marker is a special).
Vocab build_corpus_vocab(const KnowledgeGraph& kg, int64_t min_freq);

// MLM corpus per model kind: kglm encodes forward + inverse train triples,
// kgbert encodes the segmented forward triples. The Siamese baseline has no
// single-sequence corpus and is rejected.
std::vector<EncodedSequence> build_pretrain_corpus(const KnowledgeGraph& kg,
                                                   const ERTypeScheme* scheme,
                                                   const Vocab& vocab, int32_t max_len,
                                                   ModelKind kind);

struct TrainLog {
    int32_t epoch = 0;
    double train_loss = 0.0;
    double holdout_loss = 0.0;  // pretraining
    double val_mrr = 0.0;       // fine-tuning
    double wall_seconds = 0.0;
};
using LogSink = std::function<void(const TrainLog&)>;

// ---------------------------------------------------------------------------
// MLM pre-training
// ---------------------------------------------------------------------------
struct PretrainOptions {
    int32_t epochs = 20;
    int32_t batch_size = 32;
    AdamWConfig adamw{};  // lr 5e-5 by default
    MaskingConfig masking{};
    double holdout_frac = 0.05;
    int32_t threads = 1;
    bool freeze_er = false;  // keep the ER table at zero (ablation)
    uint64_t seed = 0;
};

struct PretrainResult {
    Model<float> model;
    bool diverged = false;
    int32_t epochs_done = 0;
    double initial_holdout_loss = 0.0;
    double final_holdout_loss = 0.0;
};

// corpus is consumed read-only; geometry must carry vocab/er table sizes.
PretrainResult pretrain(const ModelConfig& geometry, ModelKind kind,
                        const std::vector<EncodedSequence>& corpus,
                        const PretrainOptions& opt, const LogSink& log = {});

// ---------------------------------------------------------------------------
// Fine-tuning with negative sampling
// ---------------------------------------------------------------------------
struct FinetuneExample {
    Triple triple;
    float label = 1.0f;  // 1 positive, 0 negative
    enum class Slot : uint8_t { None, Head, Tail } corrupted = Slot::None;
};

// Exactly 10 corruptions (5 head + 5 tail), uniform replacement with
// rejection against the full triple set.
std::vector<FinetuneExample> sample_negatives(const Triple& positive, const KnowledgeGraph& kg,
                                              Rng& rng);

enum class AblationMode : uint8_t { Full, Claim1, Claim2 };
AblationMode ablation_from_string(const std::string& s);
std::string to_string(AblationMode m);

struct FinetuneOptions {
    int32_t epochs = 3;
    int32_t batch_size = 32;
    AdamWConfig adamw{};  // lr 1e-4 by default for the desk-scale model
    double alpha = 0.5;
    int32_t max_len = 64;
    int32_t threads = 1;
    AblationMode mode = AblationMode::Full;
    uint64_t seed = 0;
    int32_t val_corruptions_per_side = 50;  // sampled validation candidates
    int32_t val_triple_sample = 0;          // 0 = every validation triple
    double star_loss_weight = 0.5;
    double star_margin = 1.0;
    int64_t start_epoch = 0;  // resume offset
};

struct FinetuneResult {
    Model<float> model;  // best validation-MRR parameters
    OptimizerState<float> opt_state;
    bool diverged = false;
    int32_t epochs_done = 0;
    int32_t best_epoch = 0;
    double best_val_mrr = 0.0;
};

// init is the starting model (pretrained or fresh); resume_state continues an
// interrupted run. The ER table is zero-frozen in Claim1 mode.
FinetuneResult finetune(const KnowledgeGraph& kg, const ERTypeScheme* scheme, ModelKind kind,
                        const Vocab& vocab, Model<float> init, const FinetuneOptions& opt,
                        const LogSink& log = {},
                        OptimizerState<float>* resume_state = nullptr);

// Validation MRR at a given alpha over the same deterministic sampled
// candidate sets finetune() selects with (alpha-sweep support).
double validation_mrr_for_alpha(const Model<float>& model, const KnowledgeGraph& kg,
                                const ERTypeScheme* scheme, const Vocab& vocab, ModelKind kind,
                                const FinetuneOptions& opt, double alpha);

}  // namespace kglm
