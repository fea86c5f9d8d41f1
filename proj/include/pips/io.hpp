#pragma once

#include "pips/chain_analysis.hpp"
#include "pips/online.hpp"
#include "pips/policy_switching.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace pips::io {

using json = nlohmann::json;

/// File missing, unreadable, or not in the expected syntax.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model file parsed but failed validation.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(ValidationReport report)
        : std::runtime_error("model failed validation:\n" + report.to_string()),
          report_(std::move(report)) {}

    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

/// Formats with 12 significant digits.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt_row(std::span<const double> row) {
    std::string out = "(";
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ", ";
        out += fmt(row[i]);
    }
    return out + ")";
}

inline std::string fmt_row(std::span<const Action> row) {
    std::string out = "(";
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(row[i]);
    }
    return out + ")";
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("failed writing " + path);
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(what + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

inline json model_to_json(const MdpModel& m) {
    return json{{"name", m.name()},
                {"gamma", m.gamma()},
                {"num_states", m.num_states()},
                {"actions_per_state", m.actions_per_state()},
                {"rewards", m.rewards()},
                {"transitions", m.transitions()}};
}

/// Builds a model from the JSON schema without validating it.
inline MdpModel model_from_json(const json& j) {
    try {
        return MdpModel(j.value("name", std::string{}), j.at("gamma").get<double>(),
                        j.at("num_states").get<std::size_t>(),
                        j.at("actions_per_state").get<std::vector<std::size_t>>(),
                        j.at("rewards").get<MdpModel::RewardTable>(),
                        j.at("transitions").get<MdpModel::TransitionTable>());
    } catch (const json::exception& e) {
        throw IoError(std::string("model does not match the schema: ") + e.what());
    }
}

inline std::string model_to_string(const MdpModel& m) { return model_to_json(m).dump(1) + "\n"; }

/// Parses and validates; throws IoError or ValidationError.
inline MdpModel load_model(const std::string& path) {
    MdpModel m = model_from_json(parse_json(read_file(path), path));
    auto report = validate_model(m);
    if (!report.ok()) throw ValidationError(std::move(report));
    return m;
}

inline void save_model(const MdpModel& m, const std::string& path) {
    write_file(path, model_to_string(m));
}

// ---------------------------------------------------------------------------
// Policies and values
// ---------------------------------------------------------------------------

inline constexpr const char* kIndexing = "remaining-horizon";

/// entries[j-1][x] is the action at remaining horizon j.
inline json policy_to_json(const FiniteHorizonPolicy& p) {
    return json{{"indexing", kIndexing}, {"horizon", p.horizon()}, {"entries", p.levels()}};
}

inline FiniteHorizonPolicy policy_from_json(const json& j) {
    try {
        if (j.at("indexing").get<std::string>() != kIndexing)
            throw IoError("policy file must declare \"indexing\": \"remaining-horizon\"");
        FiniteHorizonPolicy p(j.at("entries").get<std::vector<std::vector<Action>>>());
        if (p.horizon() != j.at("horizon").get<std::size_t>())
            throw IoError("policy horizon field disagrees with its entries");
        return p;
    } catch (const json::exception& e) {
        throw IoError(std::string("policy does not match the schema: ") + e.what());
    } catch (const PreconditionError& e) {
        throw IoError(e.what());
    }
}

/// values[h][x] for h = 0..H.
inline json values_to_json(const ValueTable& v) {
    return json{{"indexing", kIndexing}, {"horizon", v.horizon()}, {"values", v.rows()}};
}

inline FiniteHorizonPolicy load_policy(const std::string& path) {
    return policy_from_json(parse_json(read_file(path), path));
}

/// A JSON array of numbers, one per state.
inline ValueRow load_value_row(const std::string& path) {
    try {
        return parse_json(read_file(path), path).get<ValueRow>();
    } catch (const json::exception& e) {
        throw IoError(path + ": expected an array of numbers: " + e.what());
    }
}

/// A JSON array of actions, one per state.
inline StationaryPolicy load_stationary_policy(const std::string& path) {
    try {
        return parse_json(read_file(path), path).get<StationaryPolicy>();
    } catch (const json::exception& e) {
        throw IoError(path + ": expected an array of action indices: " + e.what());
    }
}

/// Whitespace-separated state indices.
inline std::vector<State> parse_schedule(const std::string& text) {
    std::vector<State> out;
    std::istringstream in(text);
    std::string token;
    while (in >> token) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size() || token.front() == '-')
            throw IoError("schedule entry '" + token + "' is not a state index");
        out.push_back(static_cast<State>(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports and traces
// ---------------------------------------------------------------------------

inline json report_to_json(const ImprovementReport& r) {
    json changed = json::array();
    for (const auto& c : r.changed)
        changed.push_back({{"level", c.level}, {"state", c.state}, {"old", c.old_action},
                           {"new", c.new_action}});
    json suggestions = json::array();
    for (const auto& s : r.suggestions)
        suggestions.push_back({{"source", s.source}, {"level", s.level}, {"action", s.action},
                               {"verdict", to_string(s.verdict)}});
    return json{{"state", r.state},
                {"changed", changed},
                {"value_gain", r.value_gain},
                {"candidates_examined", r.candidates_examined},
                {"budget_hit", r.budget_hit},
                {"fallback_used", r.fallback_used},
                {"suggestions", suggestions}};
}

inline json step_to_json(const StepRecord& rec) {
    return json{{"k", rec.k},
                {"state", rec.state},
                {"action", rec.action},
                {"reward", rec.reward},
                {"changed_levels", rec.changed_levels},
                {"suggestions_accepted", rec.suggestions_accepted},
                {"suggestions_rejected", rec.suggestions_rejected},
                {"value_at_state", rec.value_at_state}};
}

inline json local_report_to_json(const LocalOptReport& r) {
    json classes = json::array();
    for (const auto& c : r.classes)
        classes.push_back({{"members", c.members},
                           {"recurrent", c.recurrent},
                           {"improvable_empty", c.improvable_empty}});
    return json{{"verdict", to_string(r.verdict)},
                {"classes", classes},
                {"globally_optimal", r.globally_optimal}};
}

inline json trace_summary_to_json(const OnlineTrace& t) {
    json j{{"summary", true},
           {"steps", t.records.size()},
           {"lambda", policy_to_json(t.final_policy)},
           {"K", t.stabilization_step ? json(*t.stabilization_step) : json(nullptr)},
           {"monotone", t.monotone}};
    if (t.local_optimality) j["local_optimality"] = local_report_to_json(*t.local_optimality);
    return j;
}

/// One JSON object per step followed by a summary object.
inline void write_trace_jsonl(std::ostream& out, const OnlineTrace& t) {
    for (const auto& rec : t.records) out << step_to_json(rec).dump() << '\n';
    out << trace_summary_to_json(t).dump() << '\n';
}

/// Header "H,error" and one row per horizon.
inline void write_error_csv(std::ostream& out, std::span<const HorizonError> rows) {
    out << "H,error\n";
    for (const auto& r : rows) out << r.horizon << ',' << fmt(r.error) << '\n';
}

} // namespace pips::io
