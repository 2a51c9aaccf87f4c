#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mygo {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    auto operator<=>(const Triple&) const = default;
};

/// Entity/relation vocabularies plus the three triple splits. Ids are dense
/// and follow line order in entities.tsv / relations.tsv.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;
    KnowledgeGraph(std::vector<std::string> entities, std::vector<std::string> relations);

    std::size_t entity_count() const { return entity_names_.size(); }
    std::size_t relation_count() const { return relation_names_.size(); }
    const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
    const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }
    const std::vector<std::string>& entity_names() const { return entity_names_; }
    const std::vector<std::string>& relation_names() const { return relation_names_; }

    /// Returns false when the name is unknown.
    bool find_entity(const std::string& name, EntityId& out) const;
    bool find_relation(const std::string& name, RelationId& out) const;

    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;

    /// Throws DataError if an id is out of range, a split holds a duplicate,
    /// or two splits share a triple.
    void validate() const;

private:
    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, EntityId> entity_ids_;
    std::unordered_map<std::string, RelationId> relation_ids_;
};

/// Reads entities.tsv, relations.tsv, train.tsv, valid.tsv and test.tsv.
KnowledgeGraph load_graph(const std::filesystem::path& dir);
/// Writes the five files load_graph reads.
void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& dir);

/// Known answers for every (entity, relation) query over train, valid and test.
class FilterIndex {
public:
    FilterIndex() = default;
    explicit FilterIndex(const KnowledgeGraph& graph);

    /// Sorted known tails of (head, relation, ?); empty for unseen pairs.
    std::span<const EntityId> tails(EntityId head, RelationId relation) const;
    /// Sorted known heads of (?, relation, tail).
    std::span<const EntityId> heads(EntityId tail, RelationId relation) const;

private:
    static std::uint64_t key(EntityId e, RelationId r) {
        return (static_cast<std::uint64_t>(e) << 32) | r;
    }
    std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_;
};

}  // namespace mygo
