#pragma once

#include <optional>
#include <string>

#include "kglm/adamw.hpp"
#include "kglm/nn.hpp"
#include "kglm/scheme.hpp"

namespace kglm {

// What the embedding-id side of a checkpoint was built against. For the
// segment-embedding baselines the variant is "segments" with table size 2.
struct SchemeDescriptor {
    std::string variant = "base";
    int32_t forward_relation_count = 0;
    int32_t entity_type_count = 1;
    int32_t table_size = 0;

    bool operator==(const SchemeDescriptor&) const = default;
};

SchemeDescriptor describe(const ERTypeScheme& s);
SchemeDescriptor segment_descriptor();  // KG-BERT / StAR segment embeddings

struct CheckpointMeta {
    ModelKind kind = ModelKind::Kglm;
    ModelConfig config;
    std::vector<std::string> vocab_tokens;
    SchemeDescriptor scheme;
    int64_t trained_epochs = 0;
    uint64_t vocab_hash = 0;
};

template <class T>
void save_checkpoint(const std::string& path, const Model<T>& model, const CheckpointMeta& meta,
                     const OptimizerState<T>* opt = nullptr);

// Fills model (and opt when present in both the file and the argument).
// Throws ArtifactError on malformed files or dtype mismatch.
template <class T>
CheckpointMeta load_checkpoint(const std::string& path, Model<T>& model,
                               OptimizerState<T>* opt = nullptr);

// Header-only peek (no tensor data), e.g. for `report` and validation.
CheckpointMeta read_checkpoint_meta(const std::string& path);

Vocab vocab_from_tokens(const std::vector<std::string>& tokens);

}  // namespace kglm
