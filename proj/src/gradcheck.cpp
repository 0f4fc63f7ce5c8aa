#include <cmath>
#include <functional>

#include "kglm/nn.hpp"

namespace kglm {

namespace {

EncodedSequence random_sequence(Rng& rng, const ModelConfig& cfg, int32_t len) {
    EncodedSequence s;
    s.token_ids.push_back(Vocab::kBos);
    for (int32_t i = 1; i < len - 1; ++i)
        s.token_ids.push_back(
            Vocab::kNumSpecials +
            static_cast<int32_t>(rng.uniform(cfg.vocab_size - Vocab::kNumSpecials)));
    s.token_ids.push_back(Vocab::kEos);
    for (int32_t i = 0; i < len; ++i) {
        s.position_ids.push_back(i);
        s.er_type_ids.push_back(static_cast<int32_t>(rng.uniform(cfg.er_table_size)));
    }
    return s;
}

struct Fixture {
    PackedBatch a, b;
    std::vector<float> labels;
    std::vector<std::pair<int32_t, int32_t>> pairs;
};

Fixture make_fixture(Rng& rng, const ModelConfig& cfg, GradCheckLoss kind) {
    Fixture f;
    const int32_t n = 3;
    for (int32_t e = 0; e < n; ++e) {
        int32_t len = 5 + static_cast<int32_t>(rng.uniform(3));
        EncodedSequence s = random_sequence(rng, cfg, len);
        if (kind == GradCheckLoss::Mlm) {
            std::vector<int32_t> tgt(s.token_ids.size(), -1);
            bool any = false;
            for (size_t i = 1; i + 1 < s.token_ids.size(); ++i) {
                if (rng.real() < 0.4) {
                    tgt[i] = s.token_ids[i];
                    s.token_ids[i] = rng.real() < 0.8 ? Vocab::kMask : s.token_ids[i];
                    any = true;
                }
            }
            if (!any) tgt[1] = s.token_ids[1];
            f.a.add_masked(s, tgt);
        } else {
            f.a.add(s);
            f.b.add(random_sequence(rng, cfg, 4 + static_cast<int32_t>(rng.uniform(3))));
            f.labels.push_back(e % 2 == 0 ? 1.0f : 0.0f);
        }
    }
    if (kind == GradCheckLoss::StarPair) f.pairs = {{0, 1}, {2, 1}};
    return f;
}

}  // namespace

GradCheckReport grad_check(ModelConfig cfg, GradCheckLoss loss_kind, double epsilon,
                           uint64_t seed) {
    if (cfg.layers > 2 || cfg.hidden_dim > 16)
        throw ConfigError("grad_check expects a tiny config (<= 2 layers, hidden_dim <= 16)");
    cfg.dropout = 0.0;

    Rng rng(seed);
    Model<double> model;
    model.init(cfg, rng);
    Fixture fix = make_fixture(rng, cfg, loss_kind);

    Workspace<double> ws_a, ws_b;
    auto loss_value = [&]() -> double {
        switch (loss_kind) {
            case GradCheckLoss::Mlm: {
                encoder_forward(model, fix.a, ws_a, false, nullptr);
                return mlm_head_forward(model, fix.a, ws_a).loss;
            }
            case GradCheckLoss::Finetune:
                return finetune_bce<double>(model, fix.a, fix.b, fix.labels, 0.6, ws_a, ws_b,
                                            nullptr, false, nullptr);
            default:
                return star_pair_loss<double>(model, fix.a, fix.b, fix.labels, fix.pairs, 0.5,
                                              1.0, ws_a, ws_b, nullptr, false, nullptr);
        }
    };

    Model<double> grads;
    grads.allocate(cfg);
    switch (loss_kind) {
        case GradCheckLoss::Mlm: {
            encoder_forward(model, fix.a, ws_a, false, nullptr);
            mlm_head_forward(model, fix.a, ws_a);
            mlm_head_backward(model, fix.a, ws_a, grads);
            encoder_backward(model, fix.a, ws_a, grads);
            break;
        }
        case GradCheckLoss::Finetune:
            finetune_bce(model, fix.a, fix.b, fix.labels, 0.6, ws_a, ws_b, &grads, false,
                         nullptr);
            break;
        default:
            star_pair_loss(model, fix.a, fix.b, fix.labels, fix.pairs, 0.5, 1.0, ws_a, ws_b,
                           &grads, false, nullptr);
            break;
    }

    GradCheckReport report;
    auto params = param_refs(model);
    auto gparams = param_refs(grads);
    for (size_t t = 0; t < params.size(); ++t) {
        double tensor_worst = 0.0;
        for (int64_t i = 0; i < params[t].size; ++i) {
            double analytic = gparams[t].data[i];
            if (!std::isfinite(analytic)) {
                report.all_finite = false;
                report.nonfinite_tensor = params[t].name;
                continue;
            }
            double saved = params[t].data[i];
            params[t].data[i] = saved + epsilon;
            double up = loss_value();
            params[t].data[i] = saved - epsilon;
            double down = loss_value();
            params[t].data[i] = saved;
            double numeric = (up - down) / (2.0 * epsilon);
            double rel = std::abs(analytic - numeric) /
                         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            tensor_worst = std::max(tensor_worst, rel);
        }
        report.per_tensor.emplace_back(params[t].name, tensor_worst);
        if (tensor_worst > report.max_rel_error) {
            report.max_rel_error = tensor_worst;
            report.worst_tensor = params[t].name;
        }
    }
    return report;
}

}  // namespace kglm
