#include "kglm/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "kglm/baselines.hpp"

namespace kglm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
void shuffle_indices(std::vector<int64_t>& idx, Rng& rng, F) {
    for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform(i)]);
}

void shuffle_indices(std::vector<int64_t>& idx, Rng& rng) {
    shuffle_indices(idx, rng, 0);
}

}  // namespace

Vocab build_corpus_vocab(const KnowledgeGraph& kg, int64_t min_freq) {
    std::vector<std::vector<std::string>> corpus;
    corpus.reserve(kg.train.size());
    for (const auto& t : kg.train) corpus.push_back(textualize(t, kg));
    return build_vocab(corpus, min_freq);
}

std::vector<EncodedSequence> build_pretrain_corpus(const KnowledgeGraph& kg,
                                                   const ERTypeScheme* scheme,
                                                   const Vocab& vocab, int32_t max_len,
                                                   ModelKind kind) {
    std::vector<EncodedSequence> corpus;
    switch (kind) {
        case ModelKind::Kglm: {
            if (!scheme) throw ConfigError("kglm corpus requires an ER-type scheme");
            auto triples = augment_inverses(kg);
            corpus.reserve(triples.size());
            for (const auto& t : triples)
                corpus.push_back(encode_triple(t, kg, *scheme, vocab, max_len));
            break;
        }
        case ModelKind::Kgbert: {
            corpus.reserve(kg.train.size());
            for (const auto& t : kg.train)
                corpus.push_back(kgbert_encode(t, kg, vocab, max_len));
            break;
        }
        default:
            throw ConfigError(
                "the Siamese model has no single-sequence MLM corpus; pre-train a kgbert "
                "checkpoint instead and fine-tune from it");
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// pre-training
// ---------------------------------------------------------------------------

namespace {

// mean MLM loss over a fixed slice with deterministic masking
double holdout_mlm_loss(const Model<float>& model, const std::vector<EncodedSequence>& corpus,
                        const std::vector<int64_t>& rows, const Vocab& vocab,
                        const MaskingConfig& masking, Rng mask_rng, int32_t batch_size) {
    if (rows.empty()) return 0.0;
    Workspace<float> ws;
    double weighted = 0.0;
    int64_t masked_total = 0;
    for (size_t at = 0; at < rows.size(); at += batch_size) {
        std::vector<EncodedSequence> batch;
        for (size_t i = at; i < std::min(rows.size(), at + batch_size); ++i)
            batch.push_back(corpus[rows[i]]);
        MaskedBatch mb = mask_mlm(batch, mask_rng, vocab, masking);
        PackedBatch pb;
        for (size_t i = 0; i < mb.input.size(); ++i)
            pb.add_masked(mb.input[i], mb.targets[i]);
        encoder_forward(model, pb, ws, false, nullptr);
        MlmLoss l = mlm_head_forward(model, pb, ws);
        weighted += l.loss * double(l.masked);
        masked_total += l.masked;
    }
    return masked_total ? weighted / double(masked_total) : 0.0;
}

}  // namespace

PretrainResult pretrain(const ModelConfig& geometry, ModelKind kind,
                        const std::vector<EncodedSequence>& corpus,
                        const PretrainOptions& opt, const LogSink& log) {
    if (corpus.empty()) throw ConfigError("pretrain: empty corpus");
    if (opt.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    const int32_t threads = std::max(1, opt.threads);

    // recover the vocab for masking bounds from the geometry
    Rng rng(opt.seed);
    PretrainResult result;
    result.model.init(geometry, rng);
    result.model.kind = kind;
    if (opt.freeze_er) result.model.er_emb.setZero();

    OptimizerState<float> opt_state;
    opt_state.init(geometry, opt.adamw);

    // fixed holdout slice: seeded shuffle, first fraction
    std::vector<int64_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = rng.fork(2);
    shuffle_indices(order, split_rng);
    const int64_t n_holdout =
        std::min<int64_t>(corpus.size() - 1,
                          std::llround(opt.holdout_frac * double(corpus.size())));
    std::vector<int64_t> holdout(order.begin(), order.begin() + n_holdout);
    std::vector<int64_t> train(order.begin() + n_holdout, order.end());

    // masking bounds need a vocab mirror; only size matters here
    Vocab size_proxy;
    for (int32_t i = Vocab::kNumSpecials; i < geometry.vocab_size; ++i)
        size_proxy.add("t" + std::to_string(i));

    auto holdout_loss = [&](const Model<float>& m) {
        return holdout_mlm_loss(m, corpus, holdout, size_proxy, opt.masking, rng.fork(3),
                                opt.batch_size);
    };

    result.initial_holdout_loss = holdout_loss(result.model);
    if (log) log({0, 0.0, result.initial_holdout_loss, 0.0, 0.0});
    result.final_holdout_loss = result.initial_holdout_loss;

    std::vector<Model<float>> grads(threads);
    std::vector<Workspace<float>> ws(threads);
    for (auto& g : grads) g.allocate(geometry);
    Model<float> grad_sum;
    if (threads > 1) grad_sum.allocate(geometry);

    Model<float> last_good = result.model;
    OptimizerState<float> last_good_opt = opt_state;

    for (int32_t epoch = 1; epoch <= opt.epochs; ++epoch) {
        auto t0 = Clock::now();
        Rng erng = rng.fork(100 + epoch);
        shuffle_indices(train, erng);

        double loss_weighted = 0.0;
        int64_t masked_total = 0;
        bool diverged = false;

        for (size_t at = 0; at < train.size() && !diverged; at += opt.batch_size) {
            std::vector<EncodedSequence> batch;
            for (size_t i = at; i < std::min(train.size(), at + size_t(opt.batch_size)); ++i)
                batch.push_back(corpus[train[i]]);
            MaskedBatch mb = mask_mlm(batch, erng, size_proxy, opt.masking);
            if (mb.num_masked == 0) continue;  // nothing to learn from this draw

            const size_t n = mb.input.size();
            std::vector<double> chunk_loss(threads, 0.0);
            std::vector<int64_t> chunk_masked(threads, 0);
            parallel_for(n, threads, [&](size_t b, size_t e, int tid) {
                PackedBatch pb;
                for (size_t i = b; i < e; ++i) pb.add_masked(mb.input[i], mb.targets[i]);
                grads[tid].zero();
                Rng drop_rng = erng.fork(0x9000 + at * 131 + tid);
                encoder_forward(result.model, pb, ws[tid], true, &drop_rng);
                MlmLoss l = mlm_head_forward(result.model, pb, ws[tid]);
                if (l.masked > 0) {
                    mlm_head_backward(result.model, pb, ws[tid], grads[tid]);
                    encoder_backward(result.model, pb, ws[tid], grads[tid]);
                }
                chunk_loss[tid] = l.loss;
                chunk_masked[tid] = l.masked;
            });

            double batch_loss = 0.0;
            for (int t = 0; t < threads; ++t)
                batch_loss += chunk_loss[t] * double(chunk_masked[t]) / double(mb.num_masked);
            loss_weighted += batch_loss * double(mb.num_masked);
            masked_total += mb.num_masked;
            if (!std::isfinite(batch_loss)) {
                diverged = true;
                break;
            }

            Model<float>* g = &grads[0];
            if (threads > 1) {
                grad_sum.zero();
                for (int t = 0; t < threads; ++t)
                    if (chunk_masked[t] > 0)
                        grad_sum.add_scaled(grads[t],
                                            float(double(chunk_masked[t]) / double(mb.num_masked)));
                g = &grad_sum;
            }
            if (opt.freeze_er) g->er_emb.setZero();
            try {
                adamw_step(result.model, *g, opt_state);
            } catch (const DivergenceError&) {
                diverged = true;
            }
        }

        double train_loss = masked_total ? loss_weighted / double(masked_total) : 0.0;
        if (diverged || !std::isfinite(train_loss)) {
            result.model = last_good;
            result.diverged = true;
            break;
        }

        result.final_holdout_loss = holdout_loss(result.model);
        result.epochs_done = epoch;
        last_good = result.model;
        last_good_opt = opt_state;
        if (log) log({epoch, train_loss, result.final_holdout_loss, 0.0, seconds_since(t0)});
    }
    return result;
}

// ---------------------------------------------------------------------------
// negative sampling
// ---------------------------------------------------------------------------

std::vector<FinetuneExample> sample_negatives(const Triple& positive, const KnowledgeGraph& kg,
                                              Rng& rng) {
    const int64_t n = kg.num_entities();
    if (n <= 2) throw ConfigError("negative sampling requires more than 2 entities");
    const int64_t max_draws = 100 * n;

    std::vector<FinetuneExample> out;
    out.reserve(10);
    auto draw = [&](FinetuneExample::Slot slot) {
        for (int64_t attempt = 0; attempt < max_draws; ++attempt) {
            int32_t e = static_cast<int32_t>(rng.uniform(n));
            Triple cand = positive;
            if (slot == FinetuneExample::Slot::Head) cand.head = e;
            else cand.tail = e;
            bool same = cand.head == positive.head && cand.tail == positive.tail;
            if (same || kg.contains(cand)) continue;
            out.push_back({cand, 0.0f, slot});
            return;
        }
        throw DivergenceError("negative sampling exhausted after " +
                              std::to_string(max_draws) + " draws; graph too dense");
    };
    for (int i = 0; i < 5; ++i) draw(FinetuneExample::Slot::Head);
    for (int i = 0; i < 5; ++i) draw(FinetuneExample::Slot::Tail);
    return out;
}

AblationMode ablation_from_string(const std::string& s) {
    if (s == "full") return AblationMode::Full;
    if (s == "claim1") return AblationMode::Claim1;
    if (s == "claim2") return AblationMode::Claim2;
    throw ConfigError("unknown ablation mode: " + s + " (expected full|claim1|claim2)");
}

std::string to_string(AblationMode m) {
    switch (m) {
        case AblationMode::Full: return "full";
        case AblationMode::Claim1: return "claim1";
        default: return "claim2";
    }
}

// ---------------------------------------------------------------------------
// fine-tuning
// ---------------------------------------------------------------------------

namespace {

struct ValSet {
    std::vector<CandidateSet> sets;
};

ValSet build_val_sets(const KnowledgeGraph& kg, const FinetuneOptions& opt, Rng& rng) {
    ValSet vs;
    std::vector<int64_t> idx(kg.val.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (opt.val_triple_sample > 0 && opt.val_triple_sample < int32_t(idx.size())) {
        Rng srng = rng.fork(7);
        shuffle_indices(idx, srng);
        idx.resize(opt.val_triple_sample);
        std::sort(idx.begin(), idx.end());
    }
    CandidateOptions copt;
    copt.sampled = true;
    copt.sample_k = opt.val_corruptions_per_side;
    for (int64_t i : idx) {
        Rng crng = rng.fork(1000 + i);
        vs.sets.push_back(build_candidates(kg.val[i], kg, copt, &crng));
    }
    return vs;
}

double validation_mrr(const Model<float>& model, const KnowledgeGraph& kg,
                      const ERTypeScheme* scheme, const Vocab& vocab, ModelKind kind,
                      const FinetuneOptions& opt, const ValSet& vs) {
    if (vs.sets.empty()) return 0.0;
    TripleScorer scorer(model, kg, scheme, vocab, kind, opt.alpha, opt.max_len, opt.threads);
    double rsum = 0.0;
    for (const auto& cs : vs.sets) {
        std::vector<double> scores = scorer.score(cs.candidates);
        rsum += 1.0 / rank_of(scores, cs.positive_index, TiePolicy::Mean);
    }
    return rsum / double(vs.sets.size());
}

}  // namespace

FinetuneResult finetune(const KnowledgeGraph& kg, const ERTypeScheme* scheme, ModelKind kind,
                        const Vocab& vocab, Model<float> init, const FinetuneOptions& opt,
                        const LogSink& log, OptimizerState<float>* resume_state) {
    if (kg.train.empty()) throw ConfigError("finetune: empty train split");
    if (opt.alpha < 0.0 || opt.alpha > 1.0) throw ConfigError("alpha must be in [0, 1]");
    if (kind == ModelKind::Kglm && !scheme)
        throw ConfigError("kglm fine-tuning requires an ER-type scheme");
    const int32_t threads = std::max(1, opt.threads);
    const bool freeze_er = opt.mode == AblationMode::Claim1;

    FinetuneResult result;
    result.model = std::move(init);
    if (freeze_er) result.model.er_emb.setZero();
    const ModelConfig geometry = result.model.cfg;

    if (resume_state) result.opt_state = *resume_state;
    else result.opt_state.init(geometry, opt.adamw);

    Rng rng(opt.seed);
    ValSet val_sets = build_val_sets(kg, opt, rng);

    // encodings of one example in the layout its model kind expects
    const double alpha = kind == ModelKind::Kglm ? opt.alpha : 1.0;
    const bool use_fwd = alpha > 0.0;
    const bool use_inv = kind == ModelKind::Kglm && alpha < 1.0;

    std::vector<Model<float>> grads(threads);
    std::vector<Workspace<float>> ws_a(threads), ws_b(threads);
    for (auto& g : grads) g.allocate(geometry);
    Model<float> grad_sum;
    if (threads > 1) grad_sum.allocate(geometry);

    Model<float> last_good = result.model;
    Model<float> best_model;
    OptimizerState<float> best_opt;
    result.best_val_mrr = -1.0;

    const int32_t star_group = 11;  // 1 positive + 10 negatives
    const int32_t groups_per_batch = std::max(1, (opt.batch_size + star_group - 1) / star_group);

    for (int32_t epoch_i = 1; epoch_i <= opt.epochs; ++epoch_i) {
        const int64_t epoch = opt.start_epoch + epoch_i;
        auto t0 = Clock::now();
        Rng erng = rng.fork(200 + epoch);

        std::vector<int64_t> order(kg.train.size());
        std::iota(order.begin(), order.end(), 0);
        shuffle_indices(order, erng);

        // materialize this epoch's examples (fresh negatives per epoch)
        std::vector<FinetuneExample> examples;
        examples.reserve(order.size() * 11);
        for (int64_t pi : order) {
            examples.push_back({kg.train[pi], 1.0f, FinetuneExample::Slot::None});
            auto negs = sample_negatives(kg.train[pi], kg, erng);
            examples.insert(examples.end(), negs.begin(), negs.end());
        }

        const size_t batch_examples = kind == ModelKind::Star
                                          ? size_t(groups_per_batch) * star_group
                                          : size_t(opt.batch_size);
        double loss_sum = 0.0;
        int64_t loss_count = 0;
        bool diverged = false;

        for (size_t at = 0; at < examples.size() && !diverged; at += batch_examples) {
            const size_t end = std::min(examples.size(), at + batch_examples);
            const size_t n = end - at;
            std::vector<double> chunk_loss(threads, 0.0);
            std::vector<int64_t> chunk_n(threads, 0);

            // keep sibling examples of one positive inside one chunk for star
            const size_t unit = kind == ModelKind::Star ? star_group : 1;
            const size_t n_units = n / unit;

            parallel_for(n_units, threads, [&](size_t ub, size_t ue, int tid) {
                const size_t b = at + ub * unit, e = at + ue * unit;
                grads[tid].zero();
                Rng drop_rng = erng.fork(0xF000 + at * 131 + tid);
                if (kind == ModelKind::Star) {
                    PackedBatch u, v;
                    std::vector<float> labels;
                    std::vector<std::pair<int32_t, int32_t>> pairs;
                    for (size_t i = b; i < e; ++i) {
                        StarParts parts = star_encode(examples[i].triple, kg, vocab, opt.max_len);
                        u.add(parts.u_part);
                        v.add(parts.v_part);
                        labels.push_back(examples[i].label);
                        size_t local = i - b;
                        if (local % star_group != 0)
                            pairs.emplace_back(int32_t(local - local % star_group),
                                               int32_t(local));
                    }
                    chunk_loss[tid] = star_pair_loss(result.model, u, v, labels, pairs,
                                                     opt.star_loss_weight, opt.star_margin,
                                                     ws_a[tid], ws_b[tid], &grads[tid], true,
                                                     &drop_rng);
                } else {
                    PackedBatch fwd, inv;
                    std::vector<float> labels;
                    for (size_t i = b; i < e; ++i) {
                        const Triple& t = examples[i].triple;
                        if (kind == ModelKind::Kgbert) {
                            fwd.add(kgbert_encode(t, kg, vocab, opt.max_len));
                        } else {
                            if (use_fwd)
                                fwd.add(encode_triple(t, kg, *scheme, vocab, opt.max_len));
                            if (use_inv)
                                inv.add(encode_triple(invert(t, kg), kg, *scheme, vocab,
                                                      opt.max_len));
                        }
                        labels.push_back(examples[i].label);
                    }
                    chunk_loss[tid] = finetune_bce(result.model, fwd, inv, labels, alpha,
                                                   ws_a[tid], ws_b[tid], &grads[tid], true,
                                                   &drop_rng);
                }
                chunk_n[tid] = int64_t(e - b);
            });

            double batch_loss = 0.0;
            int64_t batch_n = 0;
            for (int t = 0; t < threads; ++t) {
                batch_loss += chunk_loss[t] * double(chunk_n[t]);
                batch_n += chunk_n[t];
            }
            batch_loss /= double(std::max<int64_t>(1, batch_n));
            loss_sum += batch_loss * double(batch_n);
            loss_count += batch_n;
            if (!std::isfinite(batch_loss)) {
                diverged = true;
                break;
            }

            Model<float>* g = &grads[0];
            if (threads > 1) {
                grad_sum.zero();
                for (int t = 0; t < threads; ++t)
                    if (chunk_n[t] > 0)
                        grad_sum.add_scaled(grads[t], float(double(chunk_n[t]) / double(batch_n)));
                g = &grad_sum;
            }
            if (freeze_er) g->er_emb.setZero();
            try {
                adamw_step(result.model, *g, result.opt_state);
            } catch (const DivergenceError&) {
                diverged = true;
            }
        }

        double train_loss = loss_count ? loss_sum / double(loss_count) : 0.0;
        if (diverged || !std::isfinite(train_loss)) {
            result.model = last_good;
            result.diverged = true;
            break;
        }

        double mrr = validation_mrr(result.model, kg, scheme, vocab, kind, opt, val_sets);
        result.epochs_done = epoch_i;
        last_good = result.model;
        if (mrr > result.best_val_mrr) {
            result.best_val_mrr = mrr;
            result.best_epoch = static_cast<int32_t>(epoch);
            best_model = result.model;
            best_opt = result.opt_state;
        }
        if (log) log({static_cast<int32_t>(epoch), train_loss, 0.0, mrr, seconds_since(t0)});
    }

    // model selection: return the best validation-MRR snapshot
    if (result.best_epoch > 0) {
        result.model = std::move(best_model);
        result.opt_state = std::move(best_opt);
    }
    return result;
}

double validation_mrr_for_alpha(const Model<float>& model, const KnowledgeGraph& kg,
                                const ERTypeScheme* scheme, const Vocab& vocab, ModelKind kind,
                                const FinetuneOptions& opt, double alpha) {
    FinetuneOptions o = opt;
    o.alpha = alpha;
    Rng rng(o.seed);
    ValSet vs = build_val_sets(kg, o, rng);
    return validation_mrr(model, kg, scheme, vocab, kind, o, vs);
}

}  // namespace kglm
