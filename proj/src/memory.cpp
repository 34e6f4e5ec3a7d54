#include "twotsd/memory.hpp"

#include "twotsd/codec.hpp"
#include "twotsd/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace twotsd {

// ---------------------------------------------------------------------------
// ResourceStore

void ResourceStore::upsert(const ResourceProfile& profile) {
    std::unique_lock lock(mu_);
    auto it = profiles_.find(profile.device);
    if (it != profiles_.end() && profile.updated_at < it->second.updated_at) {
        throw Error(Errc::stale_update, "profile for " + profile.device.str() + " at " +
                                            std::to_string(profile.updated_at) + " is older than stored " +
                                            std::to_string(it->second.updated_at));
    }
    profiles_.insert_or_assign(profile.device, profile);
}

ResourceLookup ResourceStore::get(const std::vector<DeviceId>& devices) const {
    std::shared_lock lock(mu_);
    ResourceLookup out;
    for (const auto& d : devices) {
        auto it = profiles_.find(d);
        if (it == profiles_.end()) {
            out.missing.push_back(d);
        } else {
            out.profiles.push_back(it->second);
        }
    }
    return out;
}

std::optional<ResourceProfile> ResourceStore::find(const DeviceId& device) const {
    std::shared_lock lock(mu_);
    auto it = profiles_.find(device);
    if (it == profiles_.end()) return std::nullopt;
    return it->second;
}

std::size_t ResourceStore::size() const {
    std::shared_lock lock(mu_);
    return profiles_.size();
}

std::vector<ResourceProfile> ResourceStore::all() const {
    std::shared_lock lock(mu_);
    std::vector<ResourceProfile> out;
    out.reserve(profiles_.size());
    for (const auto& [_, p] : profiles_) out.push_back(p);
    return out;
}

void ResourceStore::restore(const std::vector<ResourceProfile>& profiles) {
    std::map<DeviceId, ResourceProfile> fresh;
    for (const auto& p : profiles) {
        if (!fresh.emplace(p.device, p).second) {
            throw Error(Errc::malformed, "duplicate profile for " + p.device.str());
        }
    }
    std::unique_lock lock(mu_);
    profiles_ = std::move(fresh);
}

// ---------------------------------------------------------------------------
// RecordStore

void RecordStore::index_locked(const StoredRecord& sr) {
    const auto& r = sr.record;
    by_pair_[{r.collaborator, r.task_type}].emplace(Order{r.at, sr.id}, sr.id);
    by_time_.emplace(r.at, sr.id);
    if (!r.record_id.empty()) tokens_.insert(r.record_id);
}

RecordId RecordStore::append(const PerformanceRecord& rec) {
    std::unique_lock lock(mu_);
    if (!rec.record_id.empty() && tokens_.contains(rec.record_id)) {
        throw Error(Errc::duplicate_record, "record_id '" + rec.record_id + "' already stored");
    }
    const RecordId id = next_id_++;
    auto [it, _] = log_.emplace(id, StoredRecord{id, rec});
    index_locked(it->second);
    return id;
}

std::vector<PerformanceRecord> RecordStore::query(const HistoryQuery& q) const {
    std::shared_lock lock(mu_);
    std::vector<PerformanceRecord> out;
    auto pit = by_pair_.find({q.collaborator, q.task_type});
    if (pit == by_pair_.end()) return out;
    const auto& ordered = pit->second;

    if (const auto* interval = std::get_if<TimeInterval>(&q.window)) {
        auto lo = ordered.lower_bound(Order{interval->from, 0});
        for (auto it = lo; it != ordered.end() && it->first.at <= interval->to; ++it) {
            out.push_back(log_.at(it->second).record);
        }
        return out;
    }

    const auto k = std::get<LastK>(q.window).k;
    const auto take = std::min(k, ordered.size());
    auto it = ordered.end();
    std::advance(it, -static_cast<std::ptrdiff_t>(take));
    out.reserve(take);
    for (; it != ordered.end(); ++it) out.push_back(log_.at(it->second).record);
    return out;
}

std::size_t RecordStore::prune_before(Timestamp cutoff) {
    std::unique_lock lock(mu_);
    std::size_t removed = 0;
    auto end = by_time_.lower_bound(cutoff);
    for (auto it = by_time_.begin(); it != end; ++it) {
        const auto id = it->second;
        const auto& r = log_.at(id).record;
        auto pit = by_pair_.find({r.collaborator, r.task_type});
        pit->second.erase(Order{r.at, id});
        if (pit->second.empty()) by_pair_.erase(pit);
        // Tokens are retained so a pruned record cannot be replayed.
        log_.erase(id);
        ++removed;
    }
    by_time_.erase(by_time_.begin(), end);
    return removed;
}

std::size_t RecordStore::size() const {
    std::shared_lock lock(mu_);
    return log_.size();
}

std::vector<StoredRecord> RecordStore::log() const {
    std::shared_lock lock(mu_);
    std::vector<StoredRecord> out;
    out.reserve(log_.size());
    for (const auto& [_, sr] : log_) out.push_back(sr);
    return out;
}

RecordId RecordStore::next_id() const {
    std::shared_lock lock(mu_);
    return next_id_;
}

std::vector<std::string> RecordStore::retired_tokens() const {
    std::shared_lock lock(mu_);
    std::set<std::string> live;
    for (const auto& [_, sr] : log_) {
        if (!sr.record.record_id.empty()) live.insert(sr.record.record_id);
    }
    std::vector<std::string> out;
    for (const auto& t : tokens_) {
        if (!live.contains(t)) out.push_back(t);
    }
    return out;
}

void RecordStore::restore(std::vector<StoredRecord> log, RecordId next_id, const std::vector<std::string>& retired) {
    std::unique_lock lock(mu_);
    log_.clear();
    by_pair_.clear();
    by_time_.clear();
    tokens_.clear();
    for (auto& sr : log) {
        if (sr.id >= next_id) throw Error(Errc::malformed, "record id beyond next_id in snapshot");
        auto [it, inserted] = log_.emplace(sr.id, std::move(sr));
        if (!inserted) throw Error(Errc::malformed, "duplicate record id in snapshot");
        index_locked(it->second);
    }
    tokens_.insert(retired.begin(), retired.end());
    next_id_ = next_id;
}

// ---------------------------------------------------------------------------
// SemanticsTree

SemanticsTree::SemanticsTree() {
    nodes_.push_back(TreeNode{root_id, NodeKind::root, std::nullopt, {}, std::monostate{}});
}

std::string SemanticsTree::key_of_locked(NodeId id) const {
    const auto& n = nodes_[id];
    switch (n.kind) {
    case NodeKind::task_type: return std::get<TaskType>(n.payload).str();
    case NodeKind::device: return std::get<DeviceId>(n.payload).str();
    default: return {};
    }
}

NodeId SemanticsTree::add_child_locked(
    NodeId parent, NodeKind kind, std::variant<std::monostate, TaskType, DeviceId, TrustSemantics> payload) {
    const auto id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(TreeNode{id, kind, parent, {}, std::move(payload)});
    auto& siblings = nodes_[parent].children;
    const auto key = key_of_locked(id);
    auto pos = std::lower_bound(siblings.begin(), siblings.end(), key,
                                [this](NodeId a, const std::string& k) { return key_of_locked(a) < k; });
    siblings.insert(pos, id);
    return id;
}

void SemanticsTree::upsert(const TrustSemantics& ts) {
    std::unique_lock lock(mu_);
    auto tit = type_nodes_.find(ts.task_type);
    NodeId type_node = 0;
    if (tit == type_nodes_.end()) {
        type_node = add_child_locked(root_id, NodeKind::task_type, ts.task_type);
        type_nodes_.emplace(ts.task_type, type_node);
    } else {
        type_node = tit->second;
    }

    const auto dkey = std::make_pair(ts.task_type, ts.device);
    auto dit = device_nodes_.find(dkey);
    if (dit == device_nodes_.end()) {
        const auto device_node = add_child_locked(type_node, NodeKind::device, ts.device);
        device_nodes_.emplace(dkey, device_node);
        add_child_locked(device_node, NodeKind::semantics, ts);
        return;
    }
    const auto leaf = nodes_[dit->second].children.front();
    nodes_[leaf].payload = ts;
}

std::vector<TrustSemantics> SemanticsTree::by_task_type(const TaskType& tt) const {
    std::shared_lock lock(mu_);
    std::vector<TrustSemantics> out;
    auto it = type_nodes_.find(tt);
    if (it == type_nodes_.end()) return out;
    for (auto device_node : nodes_[it->second].children) {
        for (auto leaf : nodes_[device_node].children) {
            out.push_back(std::get<TrustSemantics>(nodes_[leaf].payload));
        }
    }
    return out;
}

std::optional<TrustSemantics> SemanticsTree::find(const TaskType& tt, const DeviceId& device) const {
    std::shared_lock lock(mu_);
    auto it = device_nodes_.find({tt, device});
    if (it == device_nodes_.end()) return std::nullopt;
    return std::get<TrustSemantics>(nodes_[nodes_[it->second].children.front()].payload);
}

std::size_t SemanticsTree::node_count() const {
    std::shared_lock lock(mu_);
    return nodes_.size();
}

std::vector<TaskType> SemanticsTree::task_types() const {
    std::shared_lock lock(mu_);
    std::vector<TaskType> out;
    for (const auto& [tt, _] : type_nodes_) out.push_back(tt);
    return out;
}

std::vector<TreeNode> SemanticsTree::nodes() const {
    std::shared_lock lock(mu_);
    return nodes_;
}

Triplet SemanticsTree::triplet(NodeId id) const {
    std::shared_lock lock(mu_);
    if (id >= nodes_.size()) throw Error(Errc::invalid_field, "no node " + std::to_string(id));
    const auto& n = nodes_[id];
    return {n.self, n.parent, n.children};
}

void SemanticsTree::check_invariants() const {
    std::shared_lock lock(mu_);
    check_invariants_locked();
}

void SemanticsTree::check_invariants_locked() const {
    auto fail = [](const std::string& what) { throw Error(Errc::invalid_field, "tree: " + what); };
    if (nodes_.empty() || nodes_[0].kind != NodeKind::root || nodes_[0].parent ||
        !std::holds_alternative<std::monostate>(nodes_[0].payload)) {
        fail("node 0 must be a payload-free root");
    }
    for (const auto& n : nodes_) {
        if (n.self >= nodes_.size() || &nodes_[n.self] != &n) fail("node ids must be dense");
        if (n.kind != NodeKind::root) {
            if (!n.parent || *n.parent >= nodes_.size()) fail("non-root node without parent");
            const auto& p = nodes_[*n.parent];
            if (p.depth() + 1 != n.depth()) fail("level skip at node " + std::to_string(n.self));
            if (std::count(p.children.begin(), p.children.end(), n.self) != 1) {
                fail("parent does not list child " + std::to_string(n.self));
            }
        } else if (n.self != root_id) {
            fail("more than one root");
        }
        const bool payload_ok =
            (n.kind == NodeKind::root && std::holds_alternative<std::monostate>(n.payload)) ||
            (n.kind == NodeKind::task_type && std::holds_alternative<TaskType>(n.payload)) ||
            (n.kind == NodeKind::device && std::holds_alternative<DeviceId>(n.payload)) ||
            (n.kind == NodeKind::semantics && std::holds_alternative<TrustSemantics>(n.payload));
        if (!payload_ok) fail("payload does not match kind at node " + std::to_string(n.self));
        if (n.kind == NodeKind::semantics && !n.children.empty()) fail("semantics leaf with children");
        if (n.kind == NodeKind::device && n.children.size() != 1) {
            fail("device node must hold exactly one semantics leaf");
        }
        for (std::size_t i = 0; i < n.children.size(); ++i) {
            const auto c = n.children[i];
            if (c >= nodes_.size() || nodes_[c].parent != n.self) fail("child/parent mismatch");
            if (i > 0 && !(key_of_locked(n.children[i - 1]) < key_of_locked(c))) {
                fail("children not strictly ordered under node " + std::to_string(n.self));
            }
        }
        if (n.kind == NodeKind::semantics) {
            const auto& ts = std::get<TrustSemantics>(n.payload);
            const auto& dev = nodes_[*n.parent];
            const auto& type = nodes_[*dev.parent];
            if (std::get<DeviceId>(dev.payload) != ts.device ||
                std::get<TaskType>(type.payload) != ts.task_type) {
                fail("leaf payload disagrees with its path");
            }
        }
    }
}

void SemanticsTree::rebuild_lookup_locked() {
    type_nodes_.clear();
    device_nodes_.clear();
    for (const auto& n : nodes_) {
        if (n.kind == NodeKind::task_type) type_nodes_.emplace(std::get<TaskType>(n.payload), n.self);
        if (n.kind == NodeKind::device) {
            const auto& tt = std::get<TaskType>(nodes_[*n.parent].payload);
            device_nodes_.emplace(std::make_pair(tt, std::get<DeviceId>(n.payload)), n.self);
        }
    }
}

void SemanticsTree::restore(std::vector<TreeNode> nodes) {
    std::unique_lock lock(mu_);
    auto previous = std::move(nodes_);
    nodes_ = std::move(nodes);
    try {
        check_invariants_locked();
    } catch (...) {
        nodes_ = std::move(previous);
        throw;
    }
    rebuild_lookup_locked();
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

std::string_view kind_name(NodeKind k) {
    switch (k) {
    case NodeKind::root: return "root";
    case NodeKind::task_type: return "task_type";
    case NodeKind::device: return "device";
    case NodeKind::semantics: return "semantics";
    }
    return "root";
}

NodeKind parse_kind(const std::string& s) {
    for (auto k : {NodeKind::root, NodeKind::task_type, NodeKind::device, NodeKind::semantics}) {
        if (kind_name(k) == s) return k;
    }
    throw Error(Errc::malformed, "unknown node kind '" + s + "'");
}

constexpr const char* snapshot_format = "twotsd-memory-snapshot";

} // namespace

std::string MemoryModule::snapshot_text() const {
    json j;
    j["format"] = snapshot_format;
    j["version"] = snapshot_version;
    j["resources"] = resources.all();

    json recs = json::array();
    for (const auto& sr : records.log()) recs.push_back(json{{"id", sr.id}, {"record", sr.record}});
    j["records"] = json{
        {"next_id", records.next_id()}, {"log", std::move(recs)}, {"retired_tokens", records.retired_tokens()}};

    json nodes = json::array();
    for (const auto& n : tree.nodes()) {
        json jn{{"self", n.self},
                {"kind", std::string(kind_name(n.kind))},
                {"parent", n.parent ? json(*n.parent) : json(nullptr)},
                {"children", n.children}};
        std::visit(
            [&jn](const auto& p) {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, std::monostate>) {
                    jn["payload"] = nullptr;
                } else {
                    jn["payload"] = p;
                }
            },
            n.payload);
        nodes.push_back(std::move(jn));
    }
    j["tree"] = json{{"nodes", std::move(nodes)}};
    return j.dump(2) + "\n";
}

void MemoryModule::load_snapshot_text(MemoryModule& into, const std::string& text) {
    try {
        const auto j = json::parse(text);
        if (!j.is_object() || j.value("format", "") != snapshot_format) {
            throw Error(Errc::malformed, "not a memory snapshot");
        }
        if (j.at("version").get<int>() != snapshot_version) {
            throw Error(Errc::version_mismatch,
                        "snapshot version " + j.at("version").dump() + ", expected " +
                            std::to_string(snapshot_version));
        }

        auto profiles = j.at("resources").get<std::vector<ResourceProfile>>();

        std::vector<StoredRecord> log;
        for (const auto& e : j.at("records").at("log")) {
            log.push_back({e.at("id").get<RecordId>(), e.at("record").get<PerformanceRecord>()});
        }
        const auto next_id = j.at("records").at("next_id").get<RecordId>();
        const auto retired = j.at("records").at("retired_tokens").get<std::vector<std::string>>();

        std::vector<TreeNode> nodes;
        for (const auto& jn : j.at("tree").at("nodes")) {
            TreeNode n;
            n.self = jn.at("self").get<NodeId>();
            n.kind = parse_kind(jn.at("kind").get<std::string>());
            if (!jn.at("parent").is_null()) n.parent = jn.at("parent").get<NodeId>();
            n.children = jn.at("children").get<std::vector<NodeId>>();
            const auto& p = jn.at("payload");
            switch (n.kind) {
            case NodeKind::root: n.payload = std::monostate{}; break;
            case NodeKind::task_type: n.payload = p.get<TaskType>(); break;
            case NodeKind::device: n.payload = p.get<DeviceId>(); break;
            case NodeKind::semantics: n.payload = p.get<TrustSemantics>(); break;
            }
            nodes.push_back(std::move(n));
        }

        MemoryModule staged;
        staged.resources.restore(profiles);
        staged.records.restore(std::move(log), next_id, retired);
        staged.tree.restore(std::move(nodes));

        // Commit only after every part parsed and validated.
        into.resources.restore(profiles);
        into.records.restore(staged.records.log(), next_id, retired);
        into.tree.restore(staged.tree.nodes());
    } catch (const json::exception& e) {
        throw Error(Errc::malformed, std::string("snapshot: ") + e.what());
    }
}

void MemoryModule::save(const std::filesystem::path& path) const {
    const auto text = snapshot_text();
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io, "cannot write " + tmp);
        out << text;
        if (!out) throw Error(Errc::io, "short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

void MemoryModule::load(MemoryModule& into, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    load_snapshot_text(into, ss.str());
}

} // namespace twotsd
