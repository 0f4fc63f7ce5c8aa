#pragma once

#include "kglm/corpus.hpp"
#include "kglm/nn.hpp"

namespace kglm {

// Segment ids used in place of the ER-type table by the baselines.
constexpr int32_t kSegEntity = 0;
constexpr int32_t kSegRelation = 1;
constexpr int32_t kSegmentTableSize = 2;

// [CLS] h [SEP] r [SEP] t [SEP] with segment runs
// (|h|+2, |r|+1, |t|+1); [s]/[/s] double as [CLS]/[SEP].
EncodedSequence kgbert_encode(const Triple& triple, const KnowledgeGraph& kg,
                              const Vocab& vocab, int32_t max_len);

// Siamese parts: u-part [s] h [/s] r [/s] (segments |h|+2, |r|+1),
// v-part [s] t [/s] (all entity-segment).
struct StarParts {
    EncodedSequence u_part, v_part;
};
StarParts star_encode(const Triple& triple, const KnowledgeGraph& kg, const Vocab& vocab,
                      int32_t max_len);

// Forward-only classification probability (no inverse term).
template <class T>
double score_kgbert(const Model<T>& model, const Triple& triple, const KnowledgeGraph& kg,
                    const Vocab& vocab, int32_t max_len);

// (score_c, score_d): classifier probability over [u; u*v; u-v; v] and the
// negative L2 distance -||u - v||. Inference uses score_c.
template <class T>
std::pair<double, double> star_scores(const Model<T>& model, const Triple& triple,
                                      const KnowledgeGraph& kg, const Vocab& vocab,
                                      int32_t max_len);

}  // namespace kglm
