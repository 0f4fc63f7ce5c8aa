#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "kglm/kg.hpp"
#include "kglm/scheme.hpp"

namespace kglm {

// ---------------------------------------------------------------------------
// Word-level vocabulary. Specials occupy ids 0..5; regular tokens follow,
// ordered by frequency (desc) then lexicographically.
// ---------------------------------------------------------------------------
class Vocab {
public:
    static constexpr int32_t kBos = 0;   // [s]
    static constexpr int32_t kEos = 1;   // [/s]
    static constexpr int32_t kPad = 2;
    static constexpr int32_t kMask = 3;
    static constexpr int32_t kUnk = 4;
    static constexpr int32_t kInv = 5;
    static constexpr int32_t kNumSpecials = 6;

    Vocab();

    int32_t size() const { return static_cast<int32_t>(id_to_token_.size()); }
    int32_t lookup(const std::string& token) const;  // kUnk when absent
    const std::string& token(int32_t id) const { return id_to_token_[id]; }
    static bool is_special(int32_t id) { return id < kNumSpecials; }

    void add(const std::string& token);  // appends a regular token
    uint64_t hash() const;               // order-sensitive fingerprint

    const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int32_t> token_to_id_;
};

// tokens with frequency >= min_freq, deterministic given the corpus
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, int64_t min_freq);

// Lowercased whitespace tokens of head ++ relation ++ tail; inverse triples
// append the [inv] marker after the relation tokens.
std::vector<std::string> textualize(const Triple& triple, const KnowledgeGraph& kg);

// Same tokens plus the role-block lengths encode() needs.
struct TextualizedTriple {
    std::vector<std::string> tokens;
    int32_t head_len = 0;
    int32_t rel_len = 0;  // includes the [inv] marker on inverse triples
    int32_t tail_len = 0;
};
TextualizedTriple textualize_parts(const Triple& triple, const KnowledgeGraph& kg);

// Parallel id arrays for one textualized triple.
struct EncodedSequence {
    std::vector<int32_t> token_ids;
    std::vector<int32_t> position_ids;
    std::vector<int32_t> er_type_ids;

    int32_t length() const { return static_cast<int32_t>(token_ids.size()); }
};

// [s] + head + relation(+[inv]) + tail + [/s], truncated to max_len with tail
// tokens dropped first, then head, then relation. max_len < 4 is an error.
EncodedSequence encode(const TextualizedTriple& parts, const Triple& triple,
                       const ERTypeScheme& scheme, const Vocab& vocab, int32_t max_len);

// textualize + encode in one step
EncodedSequence encode_triple(const Triple& triple, const KnowledgeGraph& kg,
                              const ERTypeScheme& scheme, const Vocab& vocab, int32_t max_len);

// ---------------------------------------------------------------------------
// MLM masking
// ---------------------------------------------------------------------------
struct MaskingConfig {
    double select_prob = 0.15;
    double mask_frac = 0.8;    // of selected: replaced by [mask]
    double random_frac = 0.1;  // of selected: replaced by a random regular token
};

struct MaskedBatch {
    std::vector<EncodedSequence> input;     // token ids after replacement
    std::vector<std::vector<int32_t>> targets;  // original id at masked slots, -1 elsewhere
    std::vector<std::vector<uint8_t>> mask_positions;
    int64_t num_masked = 0;
};

// Every non-special token is selected independently with select_prob; of the
// selected, 80/10/10 mask/random/keep. Specials are never selected.
MaskedBatch mask_mlm(const std::vector<EncodedSequence>& batch, Rng& rng,
                     const Vocab& vocab, const MaskingConfig& cfg = {});

// ---------------------------------------------------------------------------
// Corpus cache: JSON-lines, one encoded sequence per record, with an embedded
// vocab hash so stale caches are rejected.
// ---------------------------------------------------------------------------
void save_corpus_cache(const std::string& path, const std::vector<EncodedSequence>& corpus,
                       const Vocab& vocab);
// returns false when the file is missing; throws ArtifactError on a hash mismatch
bool load_corpus_cache(const std::string& path, const Vocab& vocab,
                       std::vector<EncodedSequence>& out);

}  // namespace kglm
