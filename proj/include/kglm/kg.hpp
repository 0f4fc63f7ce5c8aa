#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "kglm/common.hpp"

namespace kglm {

enum class Direction : uint8_t { Forward, Inverse };

// Integer-id triple. For direction == Inverse the relation id refers to the
// inverse counterpart (forward id + n_relations).
struct Triple {
    int32_t head = 0;
    int32_t relation = 0;
    int32_t tail = 0;
    Direction direction = Direction::Forward;

    bool operator==(const Triple& o) const {
        return head == o.head && relation == o.relation && tail == o.tail &&
               direction == o.direction;
    }
};

struct Entity {
    std::string id;        // identifier string as it appears in the TSV files
    std::string text;      // surface text; falls back to id when unmapped
    int32_t type_id = -1;  // dense entity-type id, -1 when the schema is untyped
};

struct Relation {
    std::string id;
    std::string text;
};

enum class Split : uint8_t { Train, Val, Test };

// Knowledge graph with entity/relation vocabularies, train/val/test splits of
// forward triples, and a membership index over their union.
class KnowledgeGraph {
public:
    std::vector<Entity> entities;
    std::vector<Relation> relations;  // forward relations only
    std::vector<Triple> train, val, test;

    // load-time diagnostics
    int64_t duplicates_removed = 0;
    std::vector<int32_t> entities_unseen_in_train;

    int32_t num_entities() const { return static_cast<int32_t>(entities.size()); }
    int32_t num_relations() const { return static_cast<int32_t>(relations.size()); }

    // id of the inverse counterpart of a forward relation (and back)
    int32_t inverse_relation(int32_t rel) const {
        int32_t n = num_relations();
        return rel < n ? rel + n : rel - n;
    }
    int32_t forward_relation(int32_t rel) const {
        int32_t n = num_relations();
        return rel < n ? rel : rel - n;
    }

    const std::vector<Triple>& split(Split s) const {
        switch (s) {
            case Split::Train: return train;
            case Split::Val: return val;
            default: return test;
        }
    }

    // membership in D = train + val + test (forward payloads)
    bool contains(int32_t h, int32_t r, int32_t t) const {
        return triple_set_.count(pack(h, r, t)) != 0;
    }
    bool contains(const Triple& t) const { return contains(t.head, t.relation, t.tail); }
    size_t triple_set_size() const { return triple_set_.size(); }

    bool typed() const;  // true iff every entity carries a type id
    int32_t num_entity_types() const;

    // programmatic construction (fixtures, synthetic KGs)
    int32_t add_entity(const std::string& id, const std::string& text = "", int32_t type_id = -1);
    int32_t add_relation(const std::string& id, const std::string& text = "");
    void add_triple(Split split, int32_t h, int32_t r, int32_t t);
    void finalize();  // rebuilds the membership index, checks invariants

    static uint64_t pack(int32_t h, int32_t r, int32_t t) {
        return (static_cast<uint64_t>(h) << 42) | (static_cast<uint64_t>(r) << 21) |
               static_cast<uint64_t>(t);
    }

private:
    std::unordered_set<uint64_t> triple_set_;
};

struct DatasetPaths {
    std::string train_path, val_path, test_path;
    std::string entity_text_path;    // optional
    std::string relation_text_path;  // optional
    std::string entity_type_path;    // optional, enables the GER scheme
};

// Resolves the public benchmark layout under a directory: train/dev|valid/test
// with .tsv or .txt suffix, plus optional entity2text / relation2text /
// entity2type files.
DatasetPaths resolve_dataset_dir(const std::string& dir);

KnowledgeGraph load_dataset(const DatasetPaths& paths);

// Train triples followed by their inverses; |result| = 2 * |train|.
std::vector<Triple> augment_inverses(const KnowledgeGraph& kg);

// (h, r, t) <-> (t, r_inv, h)
Triple invert(const Triple& t, const KnowledgeGraph& kg);

}  // namespace kglm
