#pragma once

#include "twotsd/domain.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace twotsd {

// ---------------------------------------------------------------------------
// Resource information storage: key = device, value = newest idle profile.
// ---------------------------------------------------------------------------

struct ResourceLookup {
    std::vector<ResourceProfile> profiles; // input order, known devices only
    std::vector<DeviceId> missing;
};

class ResourceStore {
public:
    // Throws Error(stale_update) when profile.updated_at is older than the stored one.
    void upsert(const ResourceProfile& profile);

    [[nodiscard]] ResourceLookup get(const std::vector<DeviceId>& devices) const;
    [[nodiscard]] std::optional<ResourceProfile> find(const DeviceId& device) const;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::vector<ResourceProfile> all() const;

    // Replaces the whole store (snapshot restore).
    void restore(const std::vector<ResourceProfile>& profiles);

private:
    mutable std::shared_mutex mu_;
    std::map<DeviceId, ResourceProfile> profiles_;
};

// ---------------------------------------------------------------------------
// Historical record storage: append-only log with a (collaborator, task_type)
// index and a timestamp index.
// ---------------------------------------------------------------------------

using RecordId = std::uint64_t;

struct StoredRecord {
    RecordId id = 0;
    PerformanceRecord record;
    bool operator==(const StoredRecord&) const = default;
};

struct TimeInterval {
    Timestamp from = 0; // inclusive
    Timestamp to = 0;   // inclusive
};

struct LastK {
    std::size_t k = 1;
};

struct HistoryQuery {
    DeviceId collaborator;
    TaskType task_type;
    std::variant<TimeInterval, LastK> window = LastK{20};
};

class RecordStore {
public:
    // Assigns dense, increasing ids starting at 1. Throws Error(duplicate_record)
    // if the record carries a record_id token that was already appended.
    RecordId append(const PerformanceRecord& rec);

    // Ascending (timestamp, id) order.
    [[nodiscard]] std::vector<PerformanceRecord> query(const HistoryQuery& q) const;

    // Drops records with at < cutoff. Returns the number removed.
    std::size_t prune_before(Timestamp cutoff);

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::vector<StoredRecord> log() const;
    [[nodiscard]] RecordId next_id() const;
    // Tokens of pruned records; still rejected on append.
    [[nodiscard]] std::vector<std::string> retired_tokens() const;

    // Used by snapshot restore.
    void restore(std::vector<StoredRecord> log, RecordId next_id, const std::vector<std::string>& retired = {});

private:
    using Key = std::pair<DeviceId, TaskType>;
    struct Order {
        Timestamp at;
        RecordId id;
        auto operator<=>(const Order&) const = default;
    };

    void index_locked(const StoredRecord& sr);

    mutable std::shared_mutex mu_;
    std::map<RecordId, StoredRecord> log_;
    std::map<Key, std::map<Order, RecordId>> by_pair_;
    std::multimap<Timestamp, RecordId> by_time_;
    std::set<std::string> tokens_;
    RecordId next_id_ = 1;
};

// ---------------------------------------------------------------------------
// Trust semantics storage: root -> task type -> device -> semantics leaf.
// ---------------------------------------------------------------------------

using NodeId = std::uint32_t;

enum class NodeKind { root, task_type, device, semantics };

struct TreeNode {
    NodeId self = 0;
    NodeKind kind = NodeKind::root;
    std::optional<NodeId> parent;
    std::vector<NodeId> children; // sorted by key
    std::variant<std::monostate, TaskType, DeviceId, TrustSemantics> payload;

    [[nodiscard]] std::size_t depth() const noexcept { return static_cast<std::size_t>(kind); }
    bool operator==(const TreeNode&) const = default;
};

// <self, parent, children> view of a node.
struct Triplet {
    NodeId self = 0;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
};

class SemanticsTree {
public:
    SemanticsTree();

    void upsert(const TrustSemantics& ts);

    // One entry per device under the task type, ordered by DeviceId.
    [[nodiscard]] std::vector<TrustSemantics> by_task_type(const TaskType& tt) const;
    [[nodiscard]] std::optional<TrustSemantics> find(const TaskType& tt, const DeviceId& device) const;

    [[nodiscard]] std::size_t node_count() const;
    [[nodiscard]] std::vector<TaskType> task_types() const;
    [[nodiscard]] std::vector<TreeNode> nodes() const;
    [[nodiscard]] Triplet triplet(NodeId id) const;

    // Throws Error(invalid_field) describing the first violated shape invariant.
    void check_invariants() const;

    void restore(std::vector<TreeNode> nodes);

    static constexpr NodeId root_id = 0;

private:
    NodeId add_child_locked(NodeId parent, NodeKind kind,
                            std::variant<std::monostate, TaskType, DeviceId, TrustSemantics> payload);
    [[nodiscard]] std::string key_of_locked(NodeId id) const;
    void rebuild_lookup_locked();
    void check_invariants_locked() const;

    mutable std::shared_mutex mu_;
    std::vector<TreeNode> nodes_;
    std::map<TaskType, NodeId> type_nodes_;
    std::map<std::pair<TaskType, DeviceId>, NodeId> device_nodes_;
};

// ---------------------------------------------------------------------------
// The teacher's memory module and its snapshot file.
// ---------------------------------------------------------------------------

struct RetentionConfig {
    std::optional<double> horizon_s; // unlimited when empty
};

class MemoryModule {
public:
    ResourceStore resources;
    RecordStore records;
    SemanticsTree tree;

    static constexpr int snapshot_version = 1;

    [[nodiscard]] std::string snapshot_text() const;
    static void load_snapshot_text(MemoryModule& into, const std::string& text);

    void save(const std::filesystem::path& path) const;
    static void load(MemoryModule& into, const std::filesystem::path& path);
};

} // namespace twotsd
