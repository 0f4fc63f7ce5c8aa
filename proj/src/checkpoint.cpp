#include "kglm/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace kglm {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'L', 'M', 'C', 'K', 'P', '1'};

template <class T>
const char* dtype_name();
template <>
const char* dtype_name<float>() {
    return "f32";
}
template <>
const char* dtype_name<double>() {
    return "f64";
}

json config_to_json(const ModelConfig& c) {
    return {{"layers", c.layers},     {"hidden_dim", c.hidden_dim},
            {"heads", c.heads},       {"ffn_dim", c.ffn_dim},
            {"vocab_size", c.vocab_size}, {"er_table_size", c.er_table_size},
            {"max_position", c.max_position}, {"dropout", c.dropout}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.layers = j.at("layers");
    c.hidden_dim = j.at("hidden_dim");
    c.heads = j.at("heads");
    c.ffn_dim = j.at("ffn_dim");
    c.vocab_size = j.at("vocab_size");
    c.er_table_size = j.at("er_table_size");
    c.max_position = j.at("max_position");
    c.dropout = j.at("dropout");
    return c;
}

json scheme_to_json(const SchemeDescriptor& s) {
    return {{"variant", s.variant},
            {"forward_relation_count", s.forward_relation_count},
            {"entity_type_count", s.entity_type_count},
            {"table_size", s.table_size}};
}

SchemeDescriptor scheme_from_json(const json& j) {
    SchemeDescriptor s;
    s.variant = j.at("variant");
    s.forward_relation_count = j.at("forward_relation_count");
    s.entity_type_count = j.at("entity_type_count");
    s.table_size = j.at("table_size");
    return s;
}

template <class T>
void write_tensors(std::ofstream& out, Model<T>& m) {
    for (auto& p : param_refs(m))
        out.write(reinterpret_cast<const char*>(p.data), p.size * sizeof(T));
}

template <class T>
void read_tensors(std::ifstream& in, Model<T>& m, const std::string& path) {
    for (auto& p : param_refs(m)) {
        in.read(reinterpret_cast<char*>(p.data), p.size * sizeof(T));
        if (!in) throw ArtifactError("checkpoint is truncated: " + path);
    }
}

json read_header(std::ifstream& in, const std::string& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ArtifactError("not a kglm checkpoint: " + path);
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (1ull << 30))
        throw ArtifactError("corrupt checkpoint header: " + path);
    std::string buf(len, '\0');
    in.read(buf.data(), static_cast<std::streamsize>(len));
    if (!in) throw ArtifactError("corrupt checkpoint header: " + path);
    return json::parse(buf);
}

CheckpointMeta meta_from_header(const json& h) {
    CheckpointMeta meta;
    meta.kind = model_kind_from_string(h.at("kind"));
    meta.config = config_from_json(h.at("config"));
    h.at("vocab").get_to(meta.vocab_tokens);
    meta.scheme = scheme_from_json(h.at("scheme"));
    meta.trained_epochs = h.value("trained_epochs", 0);
    meta.vocab_hash = h.at("vocab_hash").get<uint64_t>();
    return meta;
}

}  // namespace

SchemeDescriptor describe(const ERTypeScheme& s) {
    SchemeDescriptor d;
    d.variant = to_string(s.variant);
    d.forward_relation_count = s.forward_relation_count;
    d.entity_type_count = s.entity_type_count;
    d.table_size = s.table_size();
    return d;
}

SchemeDescriptor segment_descriptor() {
    SchemeDescriptor d;
    d.variant = "segments";
    d.entity_type_count = 1;
    d.table_size = 2;
    return d;
}

Vocab vocab_from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    if (tokens.size() < Vocab::kNumSpecials)
        throw ArtifactError("checkpoint vocab is missing special tokens");
    for (size_t i = Vocab::kNumSpecials; i < tokens.size(); ++i) v.add(tokens[i]);
    return v;
}

template <class T>
void save_checkpoint(const std::string& path, const Model<T>& model, const CheckpointMeta& meta,
                     const OptimizerState<T>* opt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);

    json header = {{"version", 1},
                   {"dtype", dtype_name<T>()},
                   {"kind", to_string(meta.kind)},
                   {"config", config_to_json(model.cfg)},
                   {"vocab", meta.vocab_tokens},
                   {"scheme", scheme_to_json(meta.scheme)},
                   {"trained_epochs", meta.trained_epochs},
                   {"vocab_hash", meta.vocab_hash},
                   {"has_optimizer", opt != nullptr}};
    if (opt) {
        header["optimizer"] = {{"step", opt->step},
                               {"lr", opt->hyper.lr},
                               {"beta1", opt->hyper.beta1},
                               {"beta2", opt->hyper.beta2},
                               {"eps", opt->hyper.eps},
                               {"weight_decay", opt->hyper.weight_decay},
                               {"warmup_steps", opt->hyper.warmup_steps}};
    }
    std::string hs = header.dump();
    out.write(kMagic, 8);
    uint64_t len = hs.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    write_tensors(out, const_cast<Model<T>&>(model));
    if (opt) {
        write_tensors(out, const_cast<Model<T>&>(opt->m));
        write_tensors(out, const_cast<Model<T>&>(opt->v));
    }
    if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

template <class T>
CheckpointMeta load_checkpoint(const std::string& path, Model<T>& model,
                               OptimizerState<T>* opt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open checkpoint: " + path);
    json header = read_header(in, path);
    if (header.at("dtype") != dtype_name<T>())
        throw ArtifactError("checkpoint dtype " + header.at("dtype").get<std::string>() +
                            " does not match the requested precision");
    CheckpointMeta meta = meta_from_header(header);

    model.allocate(meta.config);
    model.kind = meta.kind;
    read_tensors(in, model, path);

    if (opt) {
        if (!header.value("has_optimizer", false))
            throw ArtifactError("checkpoint has no optimizer state: " + path);
        const json& oj = header.at("optimizer");
        AdamWConfig h;
        h.lr = oj.at("lr");
        h.beta1 = oj.at("beta1");
        h.beta2 = oj.at("beta2");
        h.eps = oj.at("eps");
        h.weight_decay = oj.at("weight_decay");
        h.warmup_steps = oj.at("warmup_steps");
        opt->init(meta.config, h);
        opt->step = oj.at("step");
        read_tensors(in, opt->m, path);
        read_tensors(in, opt->v, path);
    }
    return meta;
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open checkpoint: " + path);
    return meta_from_header(read_header(in, path));
}

template void save_checkpoint(const std::string&, const Model<float>&, const CheckpointMeta&,
                              const OptimizerState<float>*);
template void save_checkpoint(const std::string&, const Model<double>&, const CheckpointMeta&,
                              const OptimizerState<double>*);
template CheckpointMeta load_checkpoint(const std::string&, Model<float>&,
                                        OptimizerState<float>*);
template CheckpointMeta load_checkpoint(const std::string&, Model<double>&,
                                        OptimizerState<double>*);

}  // namespace kglm
