#include "coep/corpus/relations.hpp"

namespace coep {

namespace {

struct RelationInfo {
  Relation relation;
  std::string_view name;
  std::string_view phrase;
};

constexpr RelationInfo kRelationTable[] = {
    {Relation::kXIntent, "xIntent", "PersonX intent"},
    {Relation::kXNeed, "xNeed", "PersonX need"},
    {Relation::kXAttr, "xAttr", "PersonX attribute"},
    {Relation::kXEffect, "xEffect", "PersonX effect"},
    {Relation::kXReact, "xReact", "PersonX react"},
    {Relation::kXWant, "xWant", "PersonX want"},
    {Relation::kOReact, "oReact", "Other react"},
    {Relation::kOWant, "oWant", "Other want"},
    {Relation::kOEffect, "oEffect", "Other effect"},
};

struct SequentialInfo {
  SequentialRelation relation;
  std::string_view name;
  bool forward;
};

constexpr SequentialInfo kSequentialTable[] = {
    {SequentialRelation::kCauses, "Causes", true},
    {SequentialRelation::kCausesDesire, "CausesDesire", true},
    {SequentialRelation::kHasSubevent, "HasSubevent", true},
    {SequentialRelation::kHasFirstSubevent, "HasFirstSubevent", true},
    {SequentialRelation::kHasPrerequisite, "HasPrerequisite", false},
    {SequentialRelation::kHasLastSubevent, "HasLastSubevent", false},
};

}  // namespace

std::size_t relation_index(Relation r) { return static_cast<std::size_t>(r); }

std::string_view relation_name(Relation r) { return kRelationTable[relation_index(r)].name; }

std::string_view reformulate_relation(Relation r) { return kRelationTable[relation_index(r)].phrase; }

std::optional<Relation> parse_relation(std::string_view name) {
  for (const auto& info : kRelationTable) {
    if (info.name == name) return info.relation;
  }
  return std::nullopt;
}

std::string_view sequential_relation_name(SequentialRelation r) {
  return kSequentialTable[static_cast<std::size_t>(r)].name;
}

std::optional<SequentialRelation> parse_sequential_relation(std::string_view name) {
  for (const auto& info : kSequentialTable) {
    if (info.name == name) return info.relation;
  }
  return std::nullopt;
}

bool is_forward(SequentialRelation r) { return kSequentialTable[static_cast<std::size_t>(r)].forward; }

}  // namespace coep
