#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "trayforge/catalog.hpp"
#include "trayforge/errors.hpp"
#include "trayforge/packer.hpp"

namespace trayforge {

enum class ActionKind { Place, Stage, Discard, PlaceHolder, PlaceDivider, Done };

/// One robot instruction. Place carries the full target; PlaceHolder and
/// PlaceDivider carry the column they belong to and the target y.
struct Action {
    ActionKind kind = ActionKind::Done;
    std::string id;
    int instance = 0;
    double x_mm = 0.0;
    double y_mm = 0.0;
    double z_mm = 0.0;
    int column = 0;
    int layer = 0;
};

inline json action_to_json(const Action& a) {
    json j;
    switch (a.kind) {
        case ActionKind::Place:
            j["action"] = "place";
            j["id"] = a.id;
            j["instance"] = a.instance;
            j["x_mm"] = round6(a.x_mm);
            j["y_mm"] = round6(a.y_mm);
            j["z_mm"] = round6(a.z_mm);
            j["column"] = a.column;
            j["layer"] = a.layer;
            break;
        case ActionKind::Stage:
            j["action"] = "stage";
            j["id"] = a.id;
            break;
        case ActionKind::Discard:
            j["action"] = "discard";
            j["id"] = a.id;
            break;
        case ActionKind::PlaceHolder:
            j["action"] = "place_holder";
            j["column"] = a.column;
            j["y_mm"] = round6(a.y_mm);
            break;
        case ActionKind::PlaceDivider:
            j["action"] = "place_divider";
            j["column"] = a.column;
            j["y_mm"] = round6(a.y_mm);
            break;
        case ActionKind::Done:
            j["action"] = "done";
            break;
    }
    return j;
}

/// Drives assembly from a stream of detections. The plan order is fixed by
/// the layout; instruments that arrive early are staged (when the plan still
/// wants more of that id) and drained the moment their slot comes up,
/// anything surplus is discarded. Holders and dividers are fetched by the
/// robot itself, so those steps fire as soon as they reach the plan front.
class Sequencer {
public:
    explicit Sequencer(const TrayLayout& layout,
                       std::optional<int> stage_capacity = std::nullopt)
        : capacity_(stage_capacity) {
        if (capacity_ && *capacity_ < 0)
            throw ValidationError("stage capacity must be >= 0");
        plan_ = placement_order(layout);
        for (const Placement& p : layout.placements)
            targets_[{p.id, p.instance}] = p;
        for (std::size_t i = 0; i < layout.dividers.size(); ++i)
            divider_y_[static_cast<int>(i)] = layout.dividers[i].y_mm;
        for (const Holder& h : layout.holders) holder_y_[h.column] = h.y_mm;
        for (const PlanStep& s : plan_)
            if (s.kind == StepKind::PlaceInstrument) ++wanted_[s.ref.id];
        drain_auto(pending_);
        if (complete()) pending_.push_back({ActionKind::Done});
    }

    bool complete() const { return next_ == plan_.size(); }

    /// Instrument slots not yet filled, in plan order.
    std::vector<InstanceRef> remaining() const {
        std::vector<InstanceRef> out;
        for (std::size_t i = next_; i < plan_.size(); ++i)
            if (plan_[i].kind == StepKind::PlaceInstrument) out.push_back(plan_[i].ref);
        return out;
    }

    /// Actions issued before any detection (leading holder, empty plans).
    std::vector<Action> take_pending() { return std::exchange(pending_, {}); }

    /// Feed one detection; returns every action it triggers, in order.
    std::vector<Action> on_detected(const std::string& id) {
        if (complete())
            throw AlreadyCompleteError("detection of \"" + id +
                                       "\" after the plan completed");
        std::vector<Action> out = take_pending();

        if (front_wants(id)) {
            place_front(out);
            drain(out);
        } else if (wanted_[id] > staged_[id]) {
            if (capacity_ && staged_total_ >= *capacity_)
                throw StageFullError("stage is full; cannot hold \"" + id + "\"");
            ++staged_[id];
            ++staged_total_;
            out.push_back({ActionKind::Stage, id});
        } else {
            out.push_back({ActionKind::Discard, id});
        }

        if (complete()) out.push_back({ActionKind::Done});
        return out;
    }

private:
    bool front_wants(const std::string& id) const {
        return next_ < plan_.size() && plan_[next_].kind == StepKind::PlaceInstrument &&
               plan_[next_].ref.id == id;
    }

    void place_front(std::vector<Action>& out) {
        const PlanStep& step = plan_[next_];
        const Placement& p = targets_.at({step.ref.id, step.ref.instance});
        out.push_back({ActionKind::Place, p.id, p.instance, p.x_mm, p.y_mm, p.z_mm,
                       p.column, p.layer});
        --wanted_[p.id];
        ++next_;
        drain_auto(out);
    }

    /// Keep placing from the stage while the plan front is already staged.
    void drain(std::vector<Action>& out) {
        while (next_ < plan_.size() && plan_[next_].kind == StepKind::PlaceInstrument &&
               staged_[plan_[next_].ref.id] > 0) {
            --staged_[plan_[next_].ref.id];
            --staged_total_;
            place_front(out);
        }
    }

    /// Holder and divider steps do not wait for detections.
    void drain_auto(std::vector<Action>& out) {
        while (next_ < plan_.size() && plan_[next_].kind != StepKind::PlaceInstrument) {
            const PlanStep& step = plan_[next_];
            Action a;
            a.kind = step.kind == StepKind::PlaceHolder ? ActionKind::PlaceHolder
                                                        : ActionKind::PlaceDivider;
            a.column = step.column;
            a.y_mm = step.kind == StepKind::PlaceHolder ? holder_y_.at(step.column)
                                                        : divider_y_.at(step.column);
            out.push_back(a);
            ++next_;
        }
    }

    std::vector<PlanStep> plan_;
    std::map<std::pair<std::string, int>, Placement> targets_;
    std::map<int, double> divider_y_; // keyed by the column the divider follows
    std::map<int, double> holder_y_;
    std::map<std::string, int> wanted_; // instrument slots not yet placed
    std::map<std::string, int> staged_;
    std::size_t next_ = 0;
    int staged_total_ = 0;
    std::optional<int> capacity_;
    std::vector<Action> pending_;
};

struct ReplayResult {
    bool complete = false;
    std::vector<InstanceRef> missing; // unplaced slots, in plan order
};

/// Run a detection event stream (JSONL, one {"event":"detected","id":...}
/// per line) against a layout, writing one action object per line.
inline ReplayResult replay(const TrayLayout& layout, std::istream& in, std::ostream& out,
                           std::optional<int> stage_capacity = std::nullopt) {
    Sequencer seq(layout, stage_capacity);
    for (const Action& a : seq.take_pending()) out << action_to_json(a).dump() << "\n";

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        json ev;
        try {
            ev = json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("events:" + std::to_string(lineno) + ": " + e.what());
        }
        if (!ev.is_object() || ev.value("event", "") != "detected" || !ev.contains("id") ||
            !ev["id"].is_string())
            throw ParseError("events:" + std::to_string(lineno) +
                             ": expected {\"event\":\"detected\",\"id\":...}");
        for (const Action& a : seq.on_detected(ev["id"].get<std::string>()))
            out << action_to_json(a).dump() << "\n";
    }
    return {seq.complete(), seq.remaining()};
}

} // namespace trayforge
