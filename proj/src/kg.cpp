#include "mygo/kg.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "mygo/errors.hpp"
#include "mygo/text.hpp"

namespace mygo {

namespace fs = std::filesystem;

KnowledgeGraph::KnowledgeGraph(std::vector<std::string> entities, std::vector<std::string> relations)
    : entity_names_(std::move(entities)), relation_names_(std::move(relations)) {
    for (std::size_t i = 0; i < entity_names_.size(); ++i)
        if (!entity_ids_.emplace(entity_names_[i], static_cast<EntityId>(i)).second)
            throw DataError("duplicate entity name '" + entity_names_[i] + "'");
    for (std::size_t i = 0; i < relation_names_.size(); ++i)
        if (!relation_ids_.emplace(relation_names_[i], static_cast<RelationId>(i)).second)
            throw DataError("duplicate relation name '" + relation_names_[i] + "'");
}

bool KnowledgeGraph::find_entity(const std::string& name, EntityId& out) const {
    auto it = entity_ids_.find(name);
    if (it == entity_ids_.end()) return false;
    out = it->second;
    return true;
}

bool KnowledgeGraph::find_relation(const std::string& name, RelationId& out) const {
    auto it = relation_ids_.find(name);
    if (it == relation_ids_.end()) return false;
    out = it->second;
    return true;
}

void KnowledgeGraph::validate() const {
    std::set<Triple> seen;
    const std::pair<const char*, const std::vector<Triple>*> splits[] = {
        {"train", &train}, {"valid", &valid}, {"test", &test}};
    for (const auto& [name, split] : splits) {
        std::set<Triple> local;
        for (const Triple& t : *split) {
            if (t.head >= entity_count() || t.tail >= entity_count() || t.relation >= relation_count())
                throw DataError(std::string(name) + ": triple id out of range");
            if (!local.insert(t).second)
                throw DataError(std::string(name) + ": duplicate triple (" + entity_name(t.head) + ", " +
                                relation_name(t.relation) + ", " + entity_name(t.tail) + ")");
        }
        for (const Triple& t : local)
            if (seen.count(t))
                throw DataError(std::string(name) + ": triple also present in an earlier split (" +
                                entity_name(t.head) + ", " + relation_name(t.relation) + ", " +
                                entity_name(t.tail) + ")");
        seen.insert(local.begin(), local.end());
    }
}

namespace {

std::vector<std::string> read_names(const fs::path& path) {
    LineReader reader(path);
    std::vector<std::string> names;
    std::string line;
    while (reader.next(line)) {
        if (line.find('\t') != std::string::npos) throw reader.error("name must not contain tabs");
        names.push_back(line);
    }
    return names;
}

std::vector<Triple> read_triples(const fs::path& path, const KnowledgeGraph& graph) {
    LineReader reader(path);
    std::vector<Triple> triples;
    std::string line;
    while (reader.next(line)) {
        const auto cols = split(line, '\t');
        if (cols.size() != 3)
            throw reader.error("expected 3 tab-separated columns, got " + std::to_string(cols.size()));
        Triple t;
        if (!graph.find_entity(cols[0], t.head)) throw reader.error("unknown entity '" + cols[0] + "'");
        if (!graph.find_relation(cols[1], t.relation))
            throw reader.error("unknown relation '" + cols[1] + "'");
        if (!graph.find_entity(cols[2], t.tail)) throw reader.error("unknown entity '" + cols[2] + "'");
        triples.push_back(t);
    }
    return triples;
}

void write_triples(const fs::path& path, const KnowledgeGraph& graph, const std::vector<Triple>& triples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const Triple& t : triples)
        out << graph.entity_name(t.head) << '\t' << graph.relation_name(t.relation) << '\t'
            << graph.entity_name(t.tail) << '\n';
}

}  // namespace

KnowledgeGraph load_graph(const fs::path& dir) {
    try {
        KnowledgeGraph graph(read_names(dir / "entities.tsv"), read_names(dir / "relations.tsv"));
        graph.train = read_triples(dir / "train.tsv", graph);
        graph.valid = read_triples(dir / "valid.tsv", graph);
        graph.test = read_triples(dir / "test.tsv", graph);
        graph.validate();
        return graph;
    } catch (const DataError& e) {
        throw DataError(std::string("loading graph from ") + dir.string() + ": " + e.what());
    }
}

void save_graph(const KnowledgeGraph& graph, const fs::path& dir) {
    fs::create_directories(dir);
    const std::pair<const char*, const std::vector<std::string>*> vocabs[] = {
        {"entities.tsv", &graph.entity_names()}, {"relations.tsv", &graph.relation_names()}};
    for (const auto& [file, names] : vocabs) {
        std::ofstream out(dir / file, std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / file).string());
        for (const auto& n : *names) out << n << '\n';
    }
    write_triples(dir / "train.tsv", graph, graph.train);
    write_triples(dir / "valid.tsv", graph, graph.valid);
    write_triples(dir / "test.tsv", graph, graph.test);
}

FilterIndex::FilterIndex(const KnowledgeGraph& graph) {
    for (const auto* split : {&graph.train, &graph.valid, &graph.test})
        for (const Triple& t : *split) {
            tails_[key(t.head, t.relation)].push_back(t.tail);
            heads_[key(t.tail, t.relation)].push_back(t.head);
        }
    for (auto* index : {&tails_, &heads_})
        for (auto& [k, v] : *index) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
}

std::span<const EntityId> FilterIndex::tails(EntityId head, RelationId relation) const {
    auto it = tails_.find(key(head, relation));
    if (it == tails_.end()) return {};
    return it->second;
}

std::span<const EntityId> FilterIndex::heads(EntityId tail, RelationId relation) const {
    auto it = heads_.find(key(tail, relation));
    if (it == heads_.end()) return {};
    return it->second;
}

}  // namespace mygo
