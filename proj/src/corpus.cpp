#include "kglm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace kglm {

namespace {
const std::array<const char*, Vocab::kNumSpecials> kSpecialTokens = {
    "[s]", "[/s]", "[pad]", "[mask]", "[unk]", "[inv]"};
}

Vocab::Vocab() {
    for (const char* t : kSpecialTokens) add(t);
}

void Vocab::add(const std::string& token) {
    token_to_id_.emplace(token, static_cast<int32_t>(id_to_token_.size()));
    id_to_token_.push_back(token);
}

int32_t Vocab::lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

uint64_t Vocab::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : id_to_token_) {
        h = fnv1a(t, h);
        h = fnv1a("\n", h);
    }
    return h;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, int64_t min_freq) {
    std::map<std::string, int64_t> freq;  // ordered map keeps ties lexicographic
    for (const auto& seq : corpus)
        for (const auto& tok : seq) ++freq[tok];

    std::vector<std::pair<std::string, int64_t>> items(freq.begin(), freq.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocab v;
    for (const auto& [tok, n] : items) {
        if (n < min_freq) continue;
        if (v.lookup(tok) != Vocab::kUnk || tok == "[unk]") continue;  // specials stay unique
        v.add(tok);
    }
    return v;
}

TextualizedTriple textualize_parts(const Triple& triple, const KnowledgeGraph& kg) {
    auto tokens_of = [](const std::string& text, const std::string& fallback_id) {
        auto toks = split_ws(lowercase(text));
        if (toks.empty()) toks.push_back(lowercase(fallback_id));
        return toks;
    };
    const Entity& h = kg.entities.at(triple.head);
    const Entity& t = kg.entities.at(triple.tail);
    const Relation& r = kg.relations.at(kg.forward_relation(triple.relation));
    bool inverse = triple.direction == Direction::Inverse ||
                   triple.relation >= kg.num_relations();

    TextualizedTriple out;
    auto head = tokens_of(h.text, h.id);
    auto rel = tokens_of(r.text, r.id);
    if (inverse) rel.push_back("[inv]");
    auto tail = tokens_of(t.text, t.id);

    out.head_len = static_cast<int32_t>(head.size());
    out.rel_len = static_cast<int32_t>(rel.size());
    out.tail_len = static_cast<int32_t>(tail.size());
    out.tokens = std::move(head);
    out.tokens.insert(out.tokens.end(), rel.begin(), rel.end());
    out.tokens.insert(out.tokens.end(), tail.begin(), tail.end());
    return out;
}

std::vector<std::string> textualize(const Triple& triple, const KnowledgeGraph& kg) {
    return textualize_parts(triple, kg).tokens;
}

EncodedSequence encode(const TextualizedTriple& parts, const Triple& triple,
                       const ERTypeScheme& scheme, const Vocab& vocab, int32_t max_len) {
    if (max_len < 4) throw ConfigError("max_len must be >= 4");

    int32_t n_head = parts.head_len, n_rel = parts.rel_len, n_tail = parts.tail_len;
    // truncate tail first, then head, then relation; [s]/[/s] always kept
    int32_t budget = max_len - 2;
    auto shrink = [&](int32_t& n) {
        int32_t over = n_head + n_rel + n_tail - budget;
        if (over > 0) n -= std::min(over, n);
    };
    shrink(n_tail);
    shrink(n_head);
    shrink(n_rel);

    int32_t er_entity_h = scheme.entity_type(triple.head);
    int32_t er_entity_t = scheme.entity_type(triple.tail);
    int32_t er_rel = scheme.relation_type(triple.relation, triple.direction);
    int32_t reserved = scheme.reserved_id();

    EncodedSequence seq;
    int32_t len = n_head + n_rel + n_tail + 2;
    seq.token_ids.reserve(len);
    seq.er_type_ids.reserve(len);

    seq.token_ids.push_back(Vocab::kBos);
    seq.er_type_ids.push_back(reserved);
    auto push_block = [&](int32_t offset, int32_t n, int32_t er) {
        for (int32_t i = 0; i < n; ++i) {
            seq.token_ids.push_back(vocab.lookup(parts.tokens[offset + i]));
            seq.er_type_ids.push_back(er);
        }
    };
    push_block(0, n_head, er_entity_h);
    push_block(parts.head_len, n_rel, er_rel);
    push_block(parts.head_len + parts.rel_len, n_tail, er_entity_t);
    seq.token_ids.push_back(Vocab::kEos);
    seq.er_type_ids.push_back(reserved);

    seq.position_ids.resize(seq.token_ids.size());
    for (size_t i = 0; i < seq.position_ids.size(); ++i)
        seq.position_ids[i] = static_cast<int32_t>(i);
    return seq;
}

EncodedSequence encode_triple(const Triple& triple, const KnowledgeGraph& kg,
                              const ERTypeScheme& scheme, const Vocab& vocab, int32_t max_len) {
    return encode(textualize_parts(triple, kg), triple, scheme, vocab, max_len);
}

MaskedBatch mask_mlm(const std::vector<EncodedSequence>& batch, Rng& rng, const Vocab& vocab,
                     const MaskingConfig& cfg) {
    MaskedBatch out;
    out.input = batch;
    out.targets.resize(batch.size());
    out.mask_positions.resize(batch.size());
    int32_t n_regular = vocab.size() - Vocab::kNumSpecials;

    for (size_t s = 0; s < batch.size(); ++s) {
        const auto& src = batch[s];
        auto& inp = out.input[s];
        auto& tgt = out.targets[s];
        auto& pos = out.mask_positions[s];
        tgt.assign(src.token_ids.size(), -1);
        pos.assign(src.token_ids.size(), 0);
        for (size_t i = 0; i < src.token_ids.size(); ++i) {
            int32_t tok = src.token_ids[i];
            if (Vocab::is_special(tok)) continue;
            if (rng.real() >= cfg.select_prob) continue;
            pos[i] = 1;
            tgt[i] = tok;
            ++out.num_masked;
            double u = rng.real();
            if (u < cfg.mask_frac) {
                inp.token_ids[i] = Vocab::kMask;
            } else if (u < cfg.mask_frac + cfg.random_frac && n_regular > 0) {
                inp.token_ids[i] =
                    Vocab::kNumSpecials + static_cast<int32_t>(rng.uniform(n_regular));
            }  // else: keep the original token
        }
    }
    return out;
}

void save_corpus_cache(const std::string& path, const std::vector<EncodedSequence>& corpus,
                       const Vocab& vocab) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write corpus cache: " + path);
    json header = {{"format", "kglm-corpus"},
                   {"version", 1},
                   {"vocab_hash", vocab.hash()},
                   {"count", corpus.size()}};
    out << header.dump() << "\n";
    for (const auto& seq : corpus) {
        json rec = {{"t", seq.token_ids}, {"e", seq.er_type_ids}};
        out << rec.dump() << "\n";
    }
}

bool load_corpus_cache(const std::string& path, const Vocab& vocab,
                       std::vector<EncodedSequence>& out) {
    std::ifstream in(path);
    if (!in) return false;
    std::string line;
    if (!std::getline(in, line)) throw ArtifactError("corpus cache is empty: " + path);
    json header = json::parse(line);
    if (header.value("format", "") != "kglm-corpus")
        throw ArtifactError("not a corpus cache: " + path);
    if (header.at("vocab_hash").get<uint64_t>() != vocab.hash())
        throw ArtifactError("corpus cache is stale (vocab hash mismatch): " + path);
    out.clear();
    out.reserve(header.value("count", 0));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        EncodedSequence seq;
        rec.at("t").get_to(seq.token_ids);
        rec.at("e").get_to(seq.er_type_ids);
        seq.position_ids.resize(seq.token_ids.size());
        for (size_t i = 0; i < seq.position_ids.size(); ++i)
            seq.position_ids[i] = static_cast<int32_t>(i);
        out.push_back(std::move(seq));
    }
    if (out.size() != header.value("count", out.size()))
        throw ArtifactError("corpus cache is truncated: " + path);
    return true;
}

}  // namespace kglm
