#include "kglm/kg.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;

namespace kglm {

namespace {

constexpr int32_t kMaxId = (1 << 21) - 1;  // pack() budget per field

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t b = 0;
    while (true) {
        size_t e = line.find('\t', b);
        if (e == std::string::npos) {
            out.push_back(line.substr(b));
            break;
        }
        out.push_back(line.substr(b, e - b));
        b = e + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

struct RawTriple {
    std::string h, r, t;
};

std::vector<RawTriple> read_triple_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open triple file: " + path);
    std::vector<RawTriple> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_tabs(line);
        if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty())
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected head<TAB>relation<TAB>tail, got " +
                              std::to_string(f.size()) + " fields");
        out.push_back({f[0], f[1], f[2]});
    }
    return out;
}

std::unordered_map<std::string, std::string> read_text_map(const std::string& path) {
    std::unordered_map<std::string, std::string> map;
    if (path.empty()) return map;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open text-mapping file: " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_tabs(line);
        if (f.size() < 2)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected id<TAB>text");
        map[f[0]] = f[1];
    }
    return map;
}

std::string pick_existing(const std::string& dir, std::initializer_list<const char*> names) {
    for (const char* n : names) {
        fs::path p = fs::path(dir) / n;
        if (fs::exists(p)) return p.string();
    }
    return {};
}

}  // namespace

bool KnowledgeGraph::typed() const {
    if (entities.empty()) return false;
    return std::all_of(entities.begin(), entities.end(),
                       [](const Entity& e) { return e.type_id >= 0; });
}

int32_t KnowledgeGraph::num_entity_types() const {
    int32_t mx = -1;
    for (const auto& e : entities) mx = std::max(mx, e.type_id);
    return mx + 1;
}

int32_t KnowledgeGraph::add_entity(const std::string& id, const std::string& text,
                                   int32_t type_id) {
    entities.push_back({id, text.empty() ? id : text, type_id});
    return static_cast<int32_t>(entities.size()) - 1;
}

int32_t KnowledgeGraph::add_relation(const std::string& id, const std::string& text) {
    relations.push_back({id, text.empty() ? id : text});
    return static_cast<int32_t>(relations.size()) - 1;
}

void KnowledgeGraph::add_triple(Split split, int32_t h, int32_t r, int32_t t) {
    if (h < 0 || h >= num_entities() || t < 0 || t >= num_entities() || r < 0 ||
        r >= num_relations())
        throw ConfigError("add_triple: unregistered entity or relation id");
    Triple tr{h, r, t, Direction::Forward};
    switch (split) {
        case Split::Train: train.push_back(tr); break;
        case Split::Val: val.push_back(tr); break;
        case Split::Test: test.push_back(tr); break;
    }
}

void KnowledgeGraph::finalize() {
    if (num_entities() > kMaxId || 2 * num_relations() > kMaxId)
        throw ConfigError("dataset exceeds id budget");
    triple_set_.clear();
    triple_set_.reserve(train.size() + val.size() + test.size());
    for (const auto* split : {&train, &val, &test})
        for (const auto& t : *split) triple_set_.insert(pack(t.head, t.relation, t.tail));
}

DatasetPaths resolve_dataset_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir);
    DatasetPaths p;
    p.train_path = pick_existing(dir, {"train.tsv", "train.txt"});
    p.val_path = pick_existing(dir, {"dev.tsv", "dev.txt", "valid.tsv", "valid.txt"});
    p.test_path = pick_existing(dir, {"test.tsv", "test.txt"});
    if (p.train_path.empty() || p.val_path.empty() || p.test_path.empty())
        throw ConfigError("dataset directory " + dir +
                          " must contain train/dev(valid)/test triple files");
    p.entity_text_path = pick_existing(dir, {"entity2text.txt", "entity2text.tsv"});
    p.relation_text_path = pick_existing(dir, {"relation2text.txt", "relation2text.tsv"});
    p.entity_type_path = pick_existing(dir, {"entity2type.txt", "entity2type.tsv"});
    return p;
}

KnowledgeGraph load_dataset(const DatasetPaths& paths) {
    KnowledgeGraph kg;
    auto ent_text = read_text_map(paths.entity_text_path);
    auto rel_text = read_text_map(paths.relation_text_path);
    auto ent_type = read_text_map(paths.entity_type_path);

    std::unordered_map<std::string, int32_t> ent_id, rel_id, type_id;

    auto intern_entity = [&](const std::string& s) {
        auto it = ent_id.find(s);
        if (it != ent_id.end()) return it->second;
        auto tx = ent_text.find(s);
        int32_t ty = -1;
        if (!ent_type.empty()) {
            auto ti = ent_type.find(s);
            if (ti != ent_type.end()) {
                auto di = type_id.find(ti->second);
                if (di == type_id.end())
                    di = type_id.emplace(ti->second, static_cast<int32_t>(type_id.size())).first;
                ty = di->second;
            }
        }
        int32_t id = kg.add_entity(s, tx == ent_text.end() ? s : tx->second, ty);
        ent_id.emplace(s, id);
        return id;
    };
    auto intern_relation = [&](const std::string& s) {
        auto it = rel_id.find(s);
        if (it != rel_id.end()) return it->second;
        auto tx = rel_text.find(s);
        int32_t id = kg.add_relation(s, tx == rel_text.end() ? s : tx->second);
        rel_id.emplace(s, id);
        return id;
    };

    // ids by first appearance in train, then val, then test
    const std::pair<const std::string*, std::vector<Triple>*> split_files[] = {
        {&paths.train_path, &kg.train}, {&paths.val_path, &kg.val}, {&paths.test_path, &kg.test}};

    for (auto [path, split] : split_files) {
        auto raw = read_triple_file(*path);
        std::unordered_set<uint64_t> seen;
        seen.reserve(raw.size());
        for (const auto& rt : raw) {
            int32_t h = intern_entity(rt.h);
            int32_t r = intern_relation(rt.r);
            int32_t t = intern_entity(rt.t);
            if (h > kMaxId || t > kMaxId || r > kMaxId)
                throw ConfigError("entity/relation id exceeds budget in " + *path);
            uint64_t key = KnowledgeGraph::pack(h, r, t);
            if (!seen.insert(key).second) {
                ++kg.duplicates_removed;
                std::cerr << "warning: duplicate triple in " << *path << ": " << rt.h << "\t"
                          << rt.r << "\t" << rt.t << " (deduplicated)\n";
                continue;
            }
            split->push_back({h, r, t, Direction::Forward});
        }
    }

    // splits must be pairwise disjoint as triple sets
    std::unordered_set<uint64_t> train_set, val_set;
    for (const auto& t : kg.train) train_set.insert(KnowledgeGraph::pack(t.head, t.relation, t.tail));
    for (const auto& t : kg.val) {
        uint64_t k = KnowledgeGraph::pack(t.head, t.relation, t.tail);
        if (train_set.count(k)) throw ConfigError("val split overlaps train split");
        val_set.insert(k);
    }
    for (const auto& t : kg.test) {
        uint64_t k = KnowledgeGraph::pack(t.head, t.relation, t.tail);
        if (train_set.count(k) || val_set.count(k))
            throw ConfigError("test split overlaps train or val split");
    }

    // entities first seen outside train are legal for textual models; record them
    std::unordered_set<int32_t> in_train;
    for (const auto& t : kg.train) {
        in_train.insert(t.head);
        in_train.insert(t.tail);
    }
    for (int32_t e = 0; e < kg.num_entities(); ++e)
        if (!in_train.count(e)) kg.entities_unseen_in_train.push_back(e);

    kg.finalize();
    return kg;
}

Triple invert(const Triple& t, const KnowledgeGraph& kg) {
    if (t.direction == Direction::Inverse)
        return {t.tail, kg.forward_relation(t.relation), t.head, Direction::Forward};
    return {t.tail, kg.inverse_relation(t.relation), t.head, Direction::Inverse};
}

std::vector<Triple> augment_inverses(const KnowledgeGraph& kg) {
    std::vector<Triple> out;
    out.reserve(2 * kg.train.size());
    out.insert(out.end(), kg.train.begin(), kg.train.end());
    for (const auto& t : kg.train) out.push_back(invert(t, kg));
    return out;
}

}  // namespace kglm
