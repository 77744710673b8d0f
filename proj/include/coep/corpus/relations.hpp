#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace coep {

/// The nine if-then relations, in canonical prompt order.
enum class Relation {
  kXIntent,
  kXNeed,
  kXAttr,
  kXEffect,
  kXReact,
  kXWant,
  kOReact,
  kOWant,
  kOEffect,
};

inline constexpr std::size_t kNumRelations = 9;

inline constexpr std::array<Relation, kNumRelations> kAllRelations = {
    Relation::kXIntent, Relation::kXNeed,  Relation::kXAttr,  Relation::kXEffect, Relation::kXReact,
    Relation::kXWant,   Relation::kOReact, Relation::kOWant,  Relation::kOEffect,
};

std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view name);
std::size_t relation_index(Relation r);

/// "[Agent role] [relation]" phrase used as the second IM input segment.
std::string_view reformulate_relation(Relation r);

/// The six event-event relations used for sequential knowledge.
enum class SequentialRelation {
  kCauses,
  kCausesDesire,
  kHasSubevent,
  kHasFirstSubevent,
  kHasPrerequisite,
  kHasLastSubevent,
};

std::string_view sequential_relation_name(SequentialRelation r);
std::optional<SequentialRelation> parse_sequential_relation(std::string_view name);

/// True when the tail happens after the head (the "head >> tail" arrow);
/// HasPrerequisite and HasLastSubevent point the other way.
bool is_forward(SequentialRelation r);

}  // namespace coep
