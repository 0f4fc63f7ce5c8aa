#include "kglm/scheme.hpp"

#include <algorithm>
#include <map>

namespace kglm {

SchemeVariant scheme_variant_from_string(const std::string& s) {
    if (s == "base") return SchemeVariant::Base;
    if (s == "gr") return SchemeVariant::GR;
    if (s == "ger") return SchemeVariant::GER;
    throw ConfigError("unknown scheme variant: " + s + " (expected base|gr|ger)");
}

std::string to_string(SchemeVariant v) {
    switch (v) {
        case SchemeVariant::Base: return "base";
        case SchemeVariant::GR: return "gr";
        default: return "ger";
    }
}

ERTypeScheme build_scheme(const KnowledgeGraph& kg, SchemeVariant variant) {
    ERTypeScheme s;
    s.variant = variant;
    s.forward_relation_count = kg.num_relations();
    if (variant == SchemeVariant::GER) {
        if (!kg.typed())
            throw ConfigError("dataset schema has no entity types; GER scheme unavailable");
        // remap the KG's type ids to dense 0..t_E-1 sorted ascending, so the
        // assignment is deterministic regardless of load order
        std::map<int32_t, int32_t> dense;
        for (const auto& e : kg.entities) dense.emplace(e.type_id, 0);
        int32_t next = 0;
        for (auto& [raw, id] : dense) id = next++;
        s.entity_type_count = next;
        s.entity_type_of.resize(kg.entities.size());
        for (size_t i = 0; i < kg.entities.size(); ++i)
            s.entity_type_of[i] = dense.at(kg.entities[i].type_id);
    } else {
        s.entity_type_count = 1;
    }
    return s;
}

}  // namespace kglm
