#pragma once

#include <string>

#include "kglm/kg.hpp"

namespace kglm {

enum class SchemeVariant : uint8_t { Base, GR, GER };

SchemeVariant scheme_variant_from_string(const std::string& s);
std::string to_string(SchemeVariant v);

// Maps every token role to an entity/relation-type id.
//
//   Base: entity = 0, forward relation = 1, inverse relation = 2
//   GR:   entity = 0, relation r gets 1 + 2r (forward) / 2 + 2r (inverse)
//   GER:  entity types 0 .. t_E-1, relation r gets t_E + 2r / t_E + 2r + 1
//
// One extra id (the last one) is reserved for special tokens and padding, so
// table_size = semantic_type_count + 1.
class ERTypeScheme {
public:
    SchemeVariant variant = SchemeVariant::Base;
    int32_t entity_type_count = 1;      // t_E
    int32_t forward_relation_count = 0; // n_R
    std::vector<int32_t> entity_type_of; // dense per-entity type (GER only)

    int32_t semantic_type_count() const {
        switch (variant) {
            case SchemeVariant::Base: return 3;
            case SchemeVariant::GR: return 2 * forward_relation_count + 1;
            default: return entity_type_count + 2 * forward_relation_count;
        }
    }
    int32_t table_size() const { return semantic_type_count() + 1; }
    int32_t reserved_id() const { return semantic_type_count(); }

    int32_t entity_type(int32_t entity_id) const {
        if (variant != SchemeVariant::GER) return 0;
        return entity_type_of[entity_id];
    }

    // relation id may be a forward id with an explicit direction, or an
    // already-inverted id (>= n_R) with direction Forward
    int32_t relation_type(int32_t relation_id, Direction dir) const {
        int32_t r = relation_id;
        if (r >= forward_relation_count) {
            r -= forward_relation_count;
            dir = Direction::Inverse;
        }
        int32_t d = dir == Direction::Inverse ? 1 : 0;
        switch (variant) {
            case SchemeVariant::Base: return 1 + d;
            case SchemeVariant::GR: return 1 + 2 * r + d;
            default: return entity_type_count + 2 * r + d;
        }
    }
};

// GER on an untyped KG is a configuration error.
ERTypeScheme build_scheme(const KnowledgeGraph& kg, SchemeVariant variant);

}  // namespace kglm
