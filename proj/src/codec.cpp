#include "twotsd/codec.hpp"

#include "twotsd/error.hpp"

#include <initializer_list>

namespace twotsd {

namespace {

const json& field(const json& j, const char* name) {
    if (!j.is_object()) throw Error(Errc::malformed, std::string("expected object holding '") + name + "'");
    auto it = j.find(name);
    if (it == j.end()) throw Error(Errc::malformed, std::string("missing field '") + name + "'");
    return *it;
}

double get_number(const json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_number()) throw Error(Errc::malformed, std::string("field '") + name + "' must be a number");
    return v.get<double>();
}

std::int64_t get_int(const json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_number_integer()) {
        throw Error(Errc::malformed, std::string("field '") + name + "' must be an integer");
    }
    return v.get<std::int64_t>();
}

std::string get_string(const json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_string()) throw Error(Errc::malformed, std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

bool get_bool(const json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_boolean()) throw Error(Errc::malformed, std::string("field '") + name + "' must be a boolean");
    return v.get<bool>();
}

Extensions get_extra(const json& j) {
    Extensions out;
    auto it = j.find("extra");
    if (it == j.end()) return out;
    if (!it->is_object()) throw Error(Errc::malformed, "field 'extra' must be an object");
    for (const auto& [k, v] : it->items()) {
        if (!v.is_string()) throw Error(Errc::malformed, "extra values must be strings");
        out.emplace(k, v.get<std::string>());
    }
    return out;
}

void only_keys(const json& j, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw Error(Errc::malformed, "expected an object");
    for (const auto& [k, _] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw Error(Errc::malformed, "unexpected field '" + k + "'");
    }
}

void put_extra(json& j, const Extensions& extra) {
    if (!extra.empty()) j["extra"] = extra;
}

} // namespace

double fraction_from_json(const json& j, const char* name) {
    const auto& v = field(j, name);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_fraction(v.get<std::string>());
    throw Error(Errc::malformed, std::string("field '") + name + "' must be a number or percent string");
}

void to_json(json& j, const DeviceId& v) { j = v.str(); }

void from_json(const json& j, DeviceId& v) {
    if (!j.is_string()) throw Error(Errc::malformed, "device id must be a string");
    v = DeviceId(j.get<std::string>());
}

void to_json(json& j, const TaskType& v) { j = v.str(); }

void from_json(const json& j, TaskType& v) {
    if (!j.is_string()) throw Error(Errc::malformed, "task type must be a string");
    v = TaskType(j.get<std::string>());
}

void to_json(json& j, const Task& v) {
    j = json{{"task_id", v.task_id},         {"owner", v.owner},
             {"task_type", v.task_type},     {"size_mb", v.size_mb},
             {"density_cpb", v.density_cpb}, {"deadline_s", v.deadline_s}};
    put_extra(j, v.extra);
}

void from_json(const json& j, Task& v) {
    only_keys(j, {"task_id", "owner", "task_type", "size_mb", "density_cpb", "deadline_s", "extra"});
    Task t;
    t.task_id = get_string(j, "task_id");
    t.owner = field(j, "owner").get<DeviceId>();
    t.task_type = field(j, "task_type").get<TaskType>();
    t.size_mb = get_number(j, "size_mb");
    t.density_cpb = get_number(j, "density_cpb");
    t.deadline_s = get_number(j, "deadline_s");
    t.extra = get_extra(j);
    v = validate_task(std::move(t));
}

void to_json(json& j, const ResourceProfile& v) {
    j = json{{"device", v.device},
             {"cpu_cps", v.cpu_cps},
             {"storage_mb", v.storage_mb},
             {"bandwidth_mbps", v.bandwidth_mbps},
             {"updated_at", v.updated_at}};
}

void from_json(const json& j, ResourceProfile& v) {
    only_keys(j, {"device", "cpu_cps", "storage_mb", "bandwidth_mbps", "updated_at"});
    ResourceProfile p;
    p.device = field(j, "device").get<DeviceId>();
    p.cpu_cps = get_number(j, "cpu_cps");
    p.storage_mb = get_number(j, "storage_mb");
    p.bandwidth_mbps = get_number(j, "bandwidth_mbps");
    p.updated_at = get_int(j, "updated_at");
    v = validate_profile(std::move(p));
}

void to_json(json& j, const PerformanceRecord& v) {
    j = json{{"record_id", v.record_id},
             {"owner", v.owner},
             {"collaborator", v.collaborator},
             {"task_type", v.task_type},
             {"at", v.at},
             {"throughput_mbps", v.throughput_mbps},
             {"loss_rate", v.loss_rate},
             {"proc_speed_mbps", v.proc_speed_mbps},
             {"accuracy", v.accuracy},
             {"verdict", to_string(v.verdict)}};
    put_extra(j, v.extra);
}

void from_json(const json& j, PerformanceRecord& v) {
    only_keys(j, {"record_id", "owner", "collaborator", "task_type", "at", "throughput_mbps", "loss_rate",
                  "proc_speed_mbps", "accuracy", "verdict", "extra"});
    PerformanceRecord r;
    r.record_id = j.contains("record_id") ? get_string(j, "record_id") : std::string{};
    r.owner = field(j, "owner").get<DeviceId>();
    r.collaborator = field(j, "collaborator").get<DeviceId>();
    r.task_type = field(j, "task_type").get<TaskType>();
    r.at = get_int(j, "at");
    r.throughput_mbps = get_number(j, "throughput_mbps");
    r.loss_rate = fraction_from_json(j, "loss_rate");
    r.proc_speed_mbps = get_number(j, "proc_speed_mbps");
    r.accuracy = fraction_from_json(j, "accuracy");
    r.verdict = parse_verdict(get_string(j, "verdict"));
    r.extra = get_extra(j);
    v = validate_record(std::move(r));
}

void to_json(json& j, const TimeWindow& v) { j = json{{"from", v.from}, {"to", v.to}}; }

void from_json(const json& j, TimeWindow& v) {
    only_keys(j, {"from", "to"});
    v.from = get_int(j, "from");
    v.to = get_int(j, "to");
}

void to_json(json& j, const TrustSemantics& v) {
    j = json{{"device", v.device},
             {"task_type", v.task_type},
             {"state", to_string(v.state)},
             {"comm_trends",
              {{"throughput", to_string(v.comm.throughput)}, {"loss_rate", to_string(v.comm.loss_rate)}}},
             {"comp_trends",
              {{"accuracy", to_string(v.comp.accuracy)}, {"proc_speed", to_string(v.comp.proc_speed)}}},
             {"window", v.window ? json(*v.window) : json(nullptr)},
             {"extracted_at", v.extracted_at},
             {"record_count", v.record_count},
             {"engine", v.engine}};
}

void from_json(const json& j, TrustSemantics& v) {
    only_keys(j, {"device", "task_type", "state", "comm_trends", "comp_trends", "window", "extracted_at",
                  "record_count", "engine"});
    TrustSemantics ts;
    ts.device = field(j, "device").get<DeviceId>();
    ts.task_type = field(j, "task_type").get<TaskType>();
    ts.state = parse_trust_state(get_string(j, "state"));
    const auto& comm = field(j, "comm_trends");
    const auto& comp = field(j, "comp_trends");
    if (comm.size() != 2 || comp.size() != 2) {
        throw Error(Errc::malformed, "trend maps must hold exactly their two metrics");
    }
    ts.comm.throughput = parse_trend(get_string(comm, "throughput"));
    ts.comm.loss_rate = parse_trend(get_string(comm, "loss_rate"));
    ts.comp.accuracy = parse_trend(get_string(comp, "accuracy"));
    ts.comp.proc_speed = parse_trend(get_string(comp, "proc_speed"));
    const auto& w = field(j, "window");
    if (!w.is_null()) ts.window = w.get<TimeWindow>();
    ts.extracted_at = get_int(j, "extracted_at");
    const auto count = get_int(j, "record_count");
    if (count < 0) throw Error(Errc::malformed, "record_count must be >= 0");
    ts.record_count = static_cast<std::size_t>(count);
    ts.engine = get_string(j, "engine");
    v = validate_semantics(std::move(ts));
}

void to_json(json& j, const StageResult& v) {
    j = json{{"stage", to_string(v.stage)}, {"passed", v.passed}, {"carry", v.carry}, {"note", v.note}};
}

void from_json(const json& j, StageResult& v) {
    only_keys(j, {"stage", "passed", "carry", "note"});
    v.stage = parse_stage(get_string(j, "stage"));
    v.passed = get_bool(j, "passed");
    v.carry = get_number(j, "carry");
    v.note = get_string(j, "note");
}

void to_json(json& j, const MatchVerdict& v) {
    j = json{{"device", v.device}, {"task_id", v.task_id}, {"stages", v.stages}, {"matched", v.matched}};
}

void from_json(const json& j, MatchVerdict& v) {
    only_keys(j, {"device", "task_id", "stages", "matched"});
    v.device = field(j, "device").get<DeviceId>();
    v.task_id = get_string(j, "task_id");
    v.stages = field(j, "stages").get<std::vector<StageResult>>();
    v.matched = get_bool(j, "matched");
}

void to_json(json& j, const Candidate& v) {
    j = json{{"semantics", v.semantics}, {"matched", v.matched}, {"stages", v.stages}};
}

void from_json(const json& j, Candidate& v) {
    only_keys(j, {"semantics", "matched", "stages"});
    v.semantics = field(j, "semantics").get<TrustSemantics>();
    v.matched = get_bool(j, "matched");
    const auto& stages = field(j, "stages");
    if (!stages.is_array()) throw Error(Errc::malformed, "field 'stages' must be an array");
    v.stages = stages.get<std::vector<StageResult>>();
}

void to_json(json& j, const CandidateBundle& v) {
    j = json{{"task_id", v.task_id}, {"candidates", v.candidates}, {"generated_at", v.generated_at}};
}

void from_json(const json& j, CandidateBundle& v) {
    only_keys(j, {"task_id", "candidates", "generated_at"});
    CandidateBundle b;
    b.task_id = get_string(j, "task_id");
    const auto& cands = field(j, "candidates");
    if (!cands.is_array()) throw Error(Errc::malformed, "field 'candidates' must be an array");
    b.candidates = cands.get<std::vector<Candidate>>();
    b.generated_at = get_int(j, "generated_at");
    validate_bundle(b);
    v = std::move(b);
}

void validate_bundle(const CandidateBundle& bundle) {
    for (std::size_t i = 0; i < bundle.candidates.size(); ++i) {
        const auto& c = bundle.candidates[i];
        if (!c.matched || c.semantics.state != TrustState::trusted) {
            throw Error(Errc::invalid_field, "bundle candidate " + c.semantics.device.str() +
                                                 " is not trusted and matched");
        }
        if (i > 0 && !(bundle.candidates[i - 1].semantics.device < c.semantics.device)) {
            throw Error(Errc::invalid_field, "bundle candidates must be strictly ordered by device");
        }
    }
}

} // namespace twotsd
