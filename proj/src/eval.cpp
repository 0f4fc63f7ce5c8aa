#include "kglm/eval.hpp"

#include <algorithm>
#include <cmath>

#include "kglm/baselines.hpp"

namespace kglm {

TiePolicy tie_policy_from_string(const std::string& s) {
    if (s == "optimistic") return TiePolicy::Optimistic;
    if (s == "pessimistic") return TiePolicy::Pessimistic;
    if (s == "mean") return TiePolicy::Mean;
    throw ConfigError("unknown tie policy: " + s);
}

std::string to_string(TiePolicy p) {
    switch (p) {
        case TiePolicy::Optimistic: return "optimistic";
        case TiePolicy::Pessimistic: return "pessimistic";
        default: return "mean";
    }
}

namespace {

// partial Fisher-Yates draw of k distinct items
template <class V>
void subsample(V& items, int32_t k, Rng& rng) {
    if (static_cast<int32_t>(items.size()) <= k) return;
    for (int32_t i = 0; i < k; ++i) {
        size_t j = i + rng.uniform(items.size() - i);
        std::swap(items[i], items[j]);
    }
    items.resize(k);
}

}  // namespace

CandidateSet build_candidates(const Triple& positive, const KnowledgeGraph& kg,
                              const CandidateOptions& opt, Rng* rng) {
    if (opt.sampled && !rng) throw ConfigError("sampled candidate mode requires a seeded rng");
    CandidateSet out;
    out.positive = positive;

    std::vector<int32_t> tails, heads;
    for (int32_t e = 0; e < kg.num_entities(); ++e) {
        bool excluded_t = e == positive.tail ||
                          (opt.exclude_both_endpoints && e == positive.head);
        if (!excluded_t && !kg.contains(positive.head, positive.relation, e))
            tails.push_back(e);
        bool excluded_h = e == positive.head ||
                          (opt.exclude_both_endpoints && e == positive.tail);
        if (!excluded_h && !kg.contains(e, positive.relation, positive.tail))
            heads.push_back(e);
    }
    if (opt.sampled) {
        subsample(tails, opt.sample_k, *rng);
        subsample(heads, opt.sample_k, *rng);
    }

    out.candidates.reserve(tails.size() + heads.size() + 1);
    for (int32_t e : tails) {
        out.candidates.push_back({positive.head, positive.relation, e, Direction::Forward});
        out.provenance.push_back(Provenance::TailCorrupt);
    }
    for (int32_t e : heads) {
        out.candidates.push_back({e, positive.relation, positive.tail, Direction::Forward});
        out.provenance.push_back(Provenance::HeadCorrupt);
    }
    out.candidates.push_back(positive);
    out.provenance.push_back(Provenance::Positive);
    out.positive_index = static_cast<int32_t>(out.candidates.size()) - 1;
    return out;
}

double rank_of(const std::vector<double>& scores, int32_t positive_index, TiePolicy policy) {
    if (positive_index < 0 || positive_index >= static_cast<int32_t>(scores.size()))
        throw ConfigError("rank_of: missing positive score");
    const double sp = scores[positive_index];
    int64_t greater = 0, ties = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (static_cast<int32_t>(i) == positive_index) continue;
        if (scores[i] > sp) ++greater;
        else if (scores[i] == sp) ++ties;
    }
    double optimistic = 1.0 + double(greater);
    double pessimistic = 1.0 + double(greater + ties);
    switch (policy) {
        case TiePolicy::Optimistic: return optimistic;
        case TiePolicy::Pessimistic: return pessimistic;
        default: return 0.5 * (optimistic + pessimistic);
    }
}

double EvalReport::hits_at(int32_t n) const {
    for (const auto& [k, v] : hits)
        if (k == n) return v;
    throw ConfigError("hits@" + std::to_string(n) + " not present in report");
}

EvalReport compute_metrics(const std::vector<double>& ranks, const std::vector<int32_t>& ns) {
    if (ranks.empty()) throw ConfigError("compute_metrics: empty rank list");
    EvalReport r;
    r.ranks = ranks;
    double sum = 0.0, rsum = 0.0;
    for (double rank : ranks) {
        if (!(rank >= 1.0)) throw ConfigError("compute_metrics: rank < 1");
        sum += rank;
        rsum += 1.0 / rank;
    }
    r.mr = sum / double(ranks.size());
    r.mrr = rsum / double(ranks.size());
    for (int32_t n : ns) {
        int64_t hit = std::count_if(ranks.begin(), ranks.end(),
                                    [n](double rank) { return rank <= double(n); });
        r.hits.emplace_back(n, double(hit) / double(ranks.size()));
    }
    return r;
}

// ---------------------------------------------------------------------------
// scoring
// ---------------------------------------------------------------------------

TripleScorer::TripleScorer(const Model<float>& model, const KnowledgeGraph& kg,
                           const ERTypeScheme* scheme, const Vocab& vocab, ModelKind kind,
                           double alpha, int32_t max_len, int32_t threads)
    : model_(model), kg_(kg), scheme_(scheme), vocab_(vocab), kind_(kind), alpha_(alpha),
      max_len_(max_len), threads_(std::max(1, threads)) {
    if (kind_ == ModelKind::Kglm && !scheme_)
        throw ConfigError("kglm scoring requires an ER-type scheme");
    if (alpha_ < 0.0 || alpha_ > 1.0) throw ConfigError("alpha must be in [0, 1]");
}

std::vector<double> TripleScorer::score(const std::vector<Triple>& triples) const {
    const size_t n = triples.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;

    parallel_for(n, threads_, [&](size_t begin, size_t end, int) {
        Workspace<float> ws, ws2;
        // chunk the range so activation buffers stay modest
        const size_t stride = 256;
        for (size_t b = begin; b < end; b += stride) {
            const size_t e = std::min(end, b + stride);
            switch (kind_) {
                case ModelKind::Kglm: {
                    const bool use_f = alpha_ > 0.0;
                    const bool use_i = alpha_ < 1.0;
                    PackedBatch fwd, inv;
                    for (size_t i = b; i < e; ++i) {
                        if (use_f)
                            fwd.add(encode_triple(triples[i], kg_, *scheme_, vocab_, max_len_));
                        if (use_i)
                            inv.add(encode_triple(invert(triples[i], kg_), kg_, *scheme_,
                                                  vocab_, max_len_));
                    }
                    std::vector<double> pf, pi;
                    if (use_f) {
                        encoder_forward(model_, fwd, ws, false, nullptr);
                        pf = cls_head_forward(model_, fwd, ws);
                    }
                    if (use_i) {
                        encoder_forward(model_, inv, ws2, false, nullptr);
                        pi = cls_head_forward(model_, inv, ws2);
                    }
                    for (size_t i = b; i < e; ++i)
                        out[i] = (use_f ? alpha_ * pf[i - b] : 0.0) +
                                 (use_i ? (1.0 - alpha_) * pi[i - b] : 0.0);
                    break;
                }
                case ModelKind::Kgbert: {
                    PackedBatch batch;
                    for (size_t i = b; i < e; ++i)
                        batch.add(kgbert_encode(triples[i], kg_, vocab_, max_len_));
                    encoder_forward(model_, batch, ws, false, nullptr);
                    auto probs = cls_head_forward(model_, batch, ws);
                    for (size_t i = b; i < e; ++i) out[i] = probs[i - b];
                    break;
                }
                default: {  // star: score_c is the inference score
                    PackedBatch u, v;
                    for (size_t i = b; i < e; ++i) {
                        StarParts parts = star_encode(triples[i], kg_, vocab_, max_len_);
                        u.add(parts.u_part);
                        v.add(parts.v_part);
                    }
                    std::vector<double> c, d;
                    star_forward_scores(model_, u, v, ws, ws2, c, d);
                    for (size_t i = b; i < e; ++i) out[i] = c[i - b];
                    break;
                }
            }
        }
    });
    return out;
}

double score_kglm(const Model<float>& model, const Triple& triple, const KnowledgeGraph& kg,
                  const ERTypeScheme& scheme, const Vocab& vocab, double alpha,
                  int32_t max_len) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0, 1]");
    double fwd = 0.0, inv = 0.0;
    if (alpha > 0.0)
        fwd = seq_cls_score(model, encode_triple(triple, kg, scheme, vocab, max_len));
    if (alpha < 1.0)
        inv = seq_cls_score(model, encode_triple(invert(triple, kg), kg, scheme, vocab, max_len));
    if (alpha == 1.0) return fwd;
    if (alpha == 0.0) return inv;
    return alpha * fwd + (1.0 - alpha) * inv;
}

EvalReport evaluate_with_scorer(
    const KnowledgeGraph& kg, const EvaluateOptions& opt,
    const std::function<std::vector<double>(const CandidateSet&, int32_t)>& scorer) {
    if (kg.test.empty()) throw ConfigError("evaluate: empty test split");
    if (opt.candidates.sampled && opt.seed == 0)
        throw ConfigError("sampled candidate mode requires an explicit seed");

    std::vector<double> ranks(kg.test.size());
    Rng base(opt.seed ? opt.seed : 1);
    for (size_t i = 0; i < kg.test.size(); ++i) {
        Rng rng = base.fork(i);
        CandidateSet cs =
            build_candidates(kg.test[i], kg, opt.candidates, opt.candidates.sampled ? &rng : nullptr);
        // filter correctness is an evaluation-time invariant
        for (size_t c = 0; c < cs.candidates.size(); ++c)
            if (static_cast<int32_t>(c) != cs.positive_index && kg.contains(cs.candidates[c]))
                throw std::logic_error("candidate filter violation");
        std::vector<double> scores = scorer(cs, static_cast<int32_t>(i));
        ranks[i] = rank_of(scores, cs.positive_index, opt.tie);
    }

    EvalReport report = compute_metrics(ranks, opt.hits_ns);
    report.tie_policy = to_string(opt.tie);
    report.sampling = opt.candidates.sampled
                          ? "sampled-" + std::to_string(opt.candidates.sample_k)
                          : "full";
    report.alpha = opt.alpha;
    report.seed = opt.seed;
    return report;
}

EvalReport evaluate(const Model<float>& model, const KnowledgeGraph& kg,
                    const ERTypeScheme* scheme, const Vocab& vocab, ModelKind kind,
                    const EvaluateOptions& opt,
                    const std::function<void(int32_t, int32_t)>& progress) {
    TripleScorer scorer(model, kg, scheme, vocab, kind, opt.alpha, opt.max_len, opt.threads);
    int32_t total = static_cast<int32_t>(kg.test.size());
    EvalReport report = evaluate_with_scorer(
        kg, opt, [&](const CandidateSet& cs, int32_t index) {
            if (progress) progress(index, total);
            return scorer.score(cs.candidates);
        });
    report.model_kind = to_string(kind);
    return report;
}

}  // namespace kglm
