#include "kglm/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace kglm {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig::ExperimentConfig() { bind(); }

void ExperimentConfig::bind() {
    auto i = [&](const char* k, int64_t& v) { bindings_[k] = {Kind::Int, &v}; };
    auto r = [&](const char* k, double& v) { bindings_[k] = {Kind::Real, &v}; };
    auto b = [&](const char* k, bool& v) { bindings_[k] = {Kind::Bool, &v}; };
    auto s = [&](const char* k, std::string& v) { bindings_[k] = {Kind::Str, &v}; };

    s("dataset_dir", dataset_dir);
    s("train_path", train_path);
    s("valid_path", valid_path);
    s("test_path", test_path);
    s("entity_text_path", entity_text_path);
    s("relation_text_path", relation_text_path);
    s("entity_type_path", entity_type_path);
    s("dataset_name", dataset_name);

    s("model_kind", model_kind);
    s("scheme", scheme);
    i("layers", layers);
    i("hidden_dim", hidden_dim);
    i("heads", heads);
    i("ffn_dim", ffn_dim);
    i("max_position", max_position);
    r("dropout", dropout);
    i("max_len", max_len);
    i("min_freq", min_freq);

    i("batch_size", batch_size);
    r("beta1", beta1);
    r("beta2", beta2);
    r("adam_eps", adam_eps);
    r("weight_decay", weight_decay);
    i("warmup_steps", warmup_steps);

    i("pretrain_epochs", pretrain_epochs);
    r("pretrain_lr", pretrain_lr);
    r("mask_prob", mask_prob);
    r("mask_frac", mask_frac);
    r("random_frac", random_frac);
    r("holdout_frac", holdout_frac);
    s("er_embeddings", er_embeddings);

    i("finetune_epochs", finetune_epochs);
    r("finetune_lr", finetune_lr);
    r("alpha", alpha);
    b("alpha_sweep", alpha_sweep);
    s("ablation", ablation);
    i("val_corruptions", val_corruptions);
    i("val_triple_sample", val_triple_sample);
    r("star_loss_weight", star_loss_weight);
    r("star_margin", star_margin);

    s("eval_mode", eval_mode);
    i("sample_k", sample_k);
    s("tie_policy", tie_policy);
    s("corruption_exclude", corruption_exclude);

    i("seed", seed);
    i("threads", threads);
    b("deterministic", deterministic);
    s("out_dir", out_dir);
    s("run_label", run_label);
    s("corpus_cache", corpus_cache);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    auto it = bindings_.find(key);
    if (it == bindings_.end()) throw ConfigError("unknown config key: " + key);
    const std::string v = trim(value);
    try {
        switch (it->second.kind) {
            case Kind::Int: {
                size_t used = 0;
                int64_t parsed = std::stoll(v, &used);
                if (used != v.size()) throw std::invalid_argument(v);
                *static_cast<int64_t*>(it->second.ptr) = parsed;
                break;
            }
            case Kind::Real: {
                size_t used = 0;
                double parsed = std::stod(v, &used);
                if (used != v.size()) throw std::invalid_argument(v);
                *static_cast<double*>(it->second.ptr) = parsed;
                break;
            }
            case Kind::Bool: {
                bool parsed;
                if (v == "true" || v == "1" || v == "yes") parsed = true;
                else if (v == "false" || v == "0" || v == "no") parsed = false;
                else throw std::invalid_argument(v);
                *static_cast<bool*>(it->second.ptr) = parsed;
                break;
            }
            case Kind::Str:
                *static_cast<std::string*>(it->second.ptr) = v;
                break;
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("invalid value for config key " + key + ": '" + v + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("value out of range for config key " + key + ": '" + v + "'");
    }
}

void ExperimentConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream out;
    for (const auto& [key, b] : bindings_) {
        out << key << " = ";
        switch (b.kind) {
            case Kind::Int: out << *static_cast<const int64_t*>(b.ptr); break;
            case Kind::Real: {
                std::ostringstream v;
                v.precision(17);
                v << *static_cast<const double*>(b.ptr);
                out << v.str();
                break;
            }
            case Kind::Bool: out << (*static_cast<const bool*>(b.ptr) ? "true" : "false"); break;
            case Kind::Str: out << *static_cast<const std::string*>(b.ptr); break;
        }
        out << "\n";
    }
    return out.str();
}

DatasetPaths ExperimentConfig::dataset_paths() const {
    std::string dir = dataset_dir;
    if (!dir.empty() && fs::path(dir).is_relative()) {
        if (const char* root = std::getenv("KGLM_DATA_ROOT"))
            dir = (fs::path(root) / dir).string();
    }
    DatasetPaths p;
    if (!dir.empty()) p = resolve_dataset_dir(dir);
    auto override_path = [](std::string& dst, const std::string& src) {
        if (!src.empty()) dst = src;
    };
    override_path(p.train_path, train_path);
    override_path(p.val_path, valid_path);
    override_path(p.test_path, test_path);
    override_path(p.entity_text_path, entity_text_path);
    override_path(p.relation_text_path, relation_text_path);
    override_path(p.entity_type_path, entity_type_path);
    if (p.train_path.empty() || p.val_path.empty() || p.test_path.empty())
        throw ConfigError("dataset_dir (or explicit *_path keys) must name the split files");
    return p;
}

ModelConfig ExperimentConfig::model_config(int32_t vocab_size, int32_t er_table_size) const {
    ModelConfig c;
    c.layers = static_cast<int32_t>(layers);
    c.hidden_dim = static_cast<int32_t>(hidden_dim);
    c.heads = static_cast<int32_t>(heads);
    c.ffn_dim = static_cast<int32_t>(ffn_dim);
    c.max_position = static_cast<int32_t>(max_position);
    c.dropout = dropout;
    c.vocab_size = vocab_size;
    c.er_table_size = er_table_size;
    c.validate();
    return c;
}

AdamWConfig ExperimentConfig::adamw_config(double lr) const {
    AdamWConfig a;
    a.lr = lr;
    a.beta1 = beta1;
    a.beta2 = beta2;
    a.eps = adam_eps;
    a.weight_decay = weight_decay;
    a.warmup_steps = warmup_steps;
    return a;
}

MaskingConfig ExperimentConfig::masking_config() const {
    if (mask_prob < 0.0 || mask_prob > 1.0) throw ConfigError("mask_prob must be in [0, 1]");
    if (mask_frac < 0.0 || random_frac < 0.0 || mask_frac + random_frac > 1.0)
        throw ConfigError("mask_frac + random_frac must stay within [0, 1]");
    return {mask_prob, mask_frac, random_frac};
}

int32_t ExperimentConfig::effective_threads() const {
    if (deterministic) return 1;
    return static_cast<int32_t>(std::max<int64_t>(1, threads));
}

std::string ExperimentConfig::label() const {
    if (!run_label.empty()) return run_label;
    std::string l = model_kind;
    if (model_kind == "kglm") l += "_" + scheme;
    if (ablation != "full") l += "_" + ablation;
    return l;
}

void ExperimentConfig::require_seed(const std::string& why) const {
    if (seed == 0)
        throw ConfigError("config key 'seed' must be set (nonzero): " + why);
}

}  // namespace kglm
