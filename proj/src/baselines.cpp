#include "kglm/baselines.hpp"

#include <algorithm>

namespace kglm {

namespace {

// shared truncation rule: tail first, then head, then relation
void shrink_blocks(int32_t budget, int32_t& n_head, int32_t& n_rel, int32_t& n_tail) {
    auto shrink = [&](int32_t& n) {
        int32_t over = n_head + n_rel + n_tail - budget;
        if (over > 0) n -= std::min(over, n);
    };
    shrink(n_tail);
    shrink(n_head);
    shrink(n_rel);
}

void finish_positions(EncodedSequence& s) {
    s.position_ids.resize(s.token_ids.size());
    for (size_t i = 0; i < s.position_ids.size(); ++i)
        s.position_ids[i] = static_cast<int32_t>(i);
}

}  // namespace

EncodedSequence kgbert_encode(const Triple& triple, const KnowledgeGraph& kg,
                              const Vocab& vocab, int32_t max_len) {
    if (max_len < 5) throw ConfigError("max_len must be >= 5 for the segmented layout");
    TextualizedTriple parts = textualize_parts(triple, kg);
    int32_t n_head = parts.head_len, n_rel = parts.rel_len, n_tail = parts.tail_len;
    shrink_blocks(max_len - 4, n_head, n_rel, n_tail);

    EncodedSequence s;
    auto push = [&](int32_t tok, int32_t seg) {
        s.token_ids.push_back(tok);
        s.er_type_ids.push_back(seg);
    };
    push(Vocab::kBos, kSegEntity);
    for (int32_t i = 0; i < n_head; ++i)
        push(vocab.lookup(parts.tokens[i]), kSegEntity);
    push(Vocab::kEos, kSegEntity);
    for (int32_t i = 0; i < n_rel; ++i)
        push(vocab.lookup(parts.tokens[parts.head_len + i]), kSegRelation);
    push(Vocab::kEos, kSegRelation);
    for (int32_t i = 0; i < n_tail; ++i)
        push(vocab.lookup(parts.tokens[parts.head_len + parts.rel_len + i]), kSegEntity);
    push(Vocab::kEos, kSegEntity);
    finish_positions(s);
    return s;
}

StarParts star_encode(const Triple& triple, const KnowledgeGraph& kg, const Vocab& vocab,
                      int32_t max_len) {
    if (max_len < 4) throw ConfigError("max_len must be >= 4");
    TextualizedTriple parts = textualize_parts(triple, kg);
    int32_t n_head = parts.head_len, n_rel = parts.rel_len, n_tail = parts.tail_len;
    // independent budgets per part
    {
        int32_t zero = 0;
        int32_t budget = max_len - 3;
        shrink_blocks(budget, n_head, n_rel, zero);
    }
    n_tail = std::min(n_tail, max_len - 2);

    StarParts out;
    auto push = [&](EncodedSequence& s, int32_t tok, int32_t seg) {
        s.token_ids.push_back(tok);
        s.er_type_ids.push_back(seg);
    };
    push(out.u_part, Vocab::kBos, kSegEntity);
    for (int32_t i = 0; i < n_head; ++i)
        push(out.u_part, vocab.lookup(parts.tokens[i]), kSegEntity);
    push(out.u_part, Vocab::kEos, kSegEntity);
    for (int32_t i = 0; i < n_rel; ++i)
        push(out.u_part, vocab.lookup(parts.tokens[parts.head_len + i]), kSegRelation);
    push(out.u_part, Vocab::kEos, kSegRelation);
    finish_positions(out.u_part);

    push(out.v_part, Vocab::kBos, kSegEntity);
    for (int32_t i = 0; i < n_tail; ++i)
        push(out.v_part, vocab.lookup(parts.tokens[parts.head_len + parts.rel_len + i]),
             kSegEntity);
    push(out.v_part, Vocab::kEos, kSegEntity);
    finish_positions(out.v_part);
    return out;
}

template <class T>
double score_kgbert(const Model<T>& model, const Triple& triple, const KnowledgeGraph& kg,
                    const Vocab& vocab, int32_t max_len) {
    return seq_cls_score(model, kgbert_encode(triple, kg, vocab, max_len));
}

template <class T>
std::pair<double, double> star_scores(const Model<T>& model, const Triple& triple,
                                      const KnowledgeGraph& kg, const Vocab& vocab,
                                      int32_t max_len) {
    StarParts parts = star_encode(triple, kg, vocab, max_len);
    PackedBatch u, v;
    u.add(parts.u_part);
    v.add(parts.v_part);
    Workspace<T> ws_u, ws_v;
    std::vector<double> c, d;
    star_forward_scores(model, u, v, ws_u, ws_v, c, d);
    return {c[0], d[0]};
}

template double score_kgbert(const Model<float>&, const Triple&, const KnowledgeGraph&,
                             const Vocab&, int32_t);
template double score_kgbert(const Model<double>&, const Triple&, const KnowledgeGraph&,
                             const Vocab&, int32_t);
template std::pair<double, double> star_scores(const Model<float>&, const Triple&,
                                               const KnowledgeGraph&, const Vocab&, int32_t);
template std::pair<double, double> star_scores(const Model<double>&, const Triple&,
                                               const KnowledgeGraph&, const Vocab&, int32_t);

}  // namespace kglm
