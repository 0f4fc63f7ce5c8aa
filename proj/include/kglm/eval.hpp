#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kglm/kg.hpp"
#include "kglm/nn.hpp"
#include "kglm/scheme.hpp"

namespace kglm {

enum class TiePolicy : uint8_t { Optimistic, Pessimistic, Mean };
TiePolicy tie_policy_from_string(const std::string& s);
std::string to_string(TiePolicy p);

enum class Provenance : uint8_t { Positive, HeadCorrupt, TailCorrupt };

struct CandidateSet {
    Triple positive;
    std::vector<Triple> candidates;  // tail-corruptions, head-corruptions, then the positive
    std::vector<Provenance> provenance;
    int32_t positive_index = -1;
};

struct CandidateOptions {
    bool sampled = false;  // full enumeration by default
    int32_t sample_k = 100;  // per corruption side
    // The literal filtered-candidate rule excludes both endpoints from the
    // replacement pool; the common convention excludes only the replaced one.
    bool exclude_both_endpoints = true;
};

// Filtered corruption set of one positive: every head/tail replacement that is
// not a known triple, plus the positive itself. rng required in sampled mode.
CandidateSet build_candidates(const Triple& positive, const KnowledgeGraph& kg,
                              const CandidateOptions& opt, Rng* rng = nullptr);

// Rank of the positive among the candidate scores. Optimistic counts strictly
// better scores only; pessimistic also counts ties; mean averages the two.
double rank_of(const std::vector<double>& scores, int32_t positive_index, TiePolicy policy);

struct EvalReport {
    std::vector<double> ranks;
    double mr = 0.0;
    double mrr = 0.0;
    std::vector<std::pair<int32_t, double>> hits;  // (N, fraction with rank <= N)
    std::string tie_policy = "mean";
    std::string sampling = "full";
    std::string model_kind;
    std::string dataset;
    std::string label;
    double alpha = 0.5;
    uint64_t seed = 0;

    double hits_at(int32_t n) const;
};

EvalReport compute_metrics(const std::vector<double>& ranks,
                           const std::vector<int32_t>& ns = {1, 3, 10});

// ---------------------------------------------------------------------------
// Batched triple scoring for all three model kinds.
// ---------------------------------------------------------------------------
class TripleScorer {
public:
    TripleScorer(const Model<float>& model, const KnowledgeGraph& kg,
                 const ERTypeScheme* scheme, const Vocab& vocab, ModelKind kind, double alpha,
                 int32_t max_len, int32_t threads);

    // scores[i] for triples[i]; kglm combines both directions per alpha
    std::vector<double> score(const std::vector<Triple>& triples) const;
    double alpha() const { return alpha_; }

private:
    const Model<float>& model_;
    const KnowledgeGraph& kg_;
    const ERTypeScheme* scheme_;
    const Vocab& vocab_;
    ModelKind kind_;
    double alpha_;
    int32_t max_len_;
    int32_t threads_;
};

// Weighted two-direction score of one triple (exact alpha endpoints: the
// unused direction is never computed).
double score_kglm(const Model<float>& model, const Triple& triple, const KnowledgeGraph& kg,
                  const ERTypeScheme& scheme, const Vocab& vocab, double alpha,
                  int32_t max_len);

struct EvaluateOptions {
    double alpha = 0.5;
    CandidateOptions candidates;
    TiePolicy tie = TiePolicy::Mean;
    int32_t max_len = 64;
    int32_t threads = 1;
    uint64_t seed = 0;
    std::vector<int32_t> hits_ns = {1, 3, 10};
};

// Filtered link prediction over the test split: one candidate set and one
// rank per test triple. Candidate filtering is re-asserted while scoring.
EvalReport evaluate(const Model<float>& model, const KnowledgeGraph& kg,
                    const ERTypeScheme* scheme, const Vocab& vocab, ModelKind kind,
                    const EvaluateOptions& opt,
                    const std::function<void(int32_t, int32_t)>& progress = {});

// Same protocol with externally supplied scores (oracle tests, random
// baselines): scorer maps a candidate list to scores.
EvalReport evaluate_with_scorer(
    const KnowledgeGraph& kg, const EvaluateOptions& opt,
    const std::function<std::vector<double>(const CandidateSet&, int32_t)>& scorer);

}  // namespace kglm
