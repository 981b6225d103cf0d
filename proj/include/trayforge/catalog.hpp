#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trayforge/errors.hpp"

namespace trayforge {

using json = nlohmann::ordered_json;

/// Round to 6 decimals for serialization; output files are byte-stable.
inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

// ---------------------------------------------------------------------------
// Instrument groups
// ---------------------------------------------------------------------------

/// The named groups drive merge sets and holder placement; everything else
/// packs as an independent column keyed by its Other name.
enum class GroupKind { Ring, RingThick, Needle, Thumb, Gun, Other };

struct InstrumentGroup {
    GroupKind kind = GroupKind::Other;
    std::string other_name; // nonempty iff kind == Other

    static InstrumentGroup ring() { return {GroupKind::Ring, {}}; }
    static InstrumentGroup ring_thick() { return {GroupKind::RingThick, {}}; }
    static InstrumentGroup needle() { return {GroupKind::Needle, {}}; }
    static InstrumentGroup thumb() { return {GroupKind::Thumb, {}}; }
    static InstrumentGroup gun() { return {GroupKind::Gun, {}}; }
    static InstrumentGroup other(std::string name) {
        if (name.empty()) throw ValidationError("Other group requires a nonempty name");
        return {GroupKind::Other, std::move(name)};
    }

    /// Ring-type groups are the holder-requiring ones.
    bool is_ring_type() const {
        return kind == GroupKind::Ring || kind == GroupKind::RingThick;
    }

    /// Canonical packing order: named groups first, Other sorted by name.
    int rank() const { return static_cast<int>(kind); }

    std::string label() const {
        switch (kind) {
            case GroupKind::Ring: return "ring";
            case GroupKind::RingThick: return "ring_thick";
            case GroupKind::Needle: return "needle";
            case GroupKind::Thumb: return "thumb";
            case GroupKind::Gun: return "gun";
            case GroupKind::Other: return "other:" + other_name;
        }
        return "other:?";
    }

    static InstrumentGroup from_label(const std::string& s) {
        if (s == "ring") return ring();
        if (s == "ring_thick") return ring_thick();
        if (s == "needle") return needle();
        if (s == "thumb") return thumb();
        if (s == "gun") return gun();
        if (s.rfind("other:", 0) == 0) return other(s.substr(6));
        throw ValidationError("unknown instrument group \"" + s + "\"");
    }

    friend bool operator==(const InstrumentGroup& a, const InstrumentGroup& b) {
        return a.kind == b.kind && (a.kind != GroupKind::Other || a.other_name == b.other_name);
    }
    friend bool operator!=(const InstrumentGroup& a, const InstrumentGroup& b) { return !(a == b); }
    friend bool operator<(const InstrumentGroup& a, const InstrumentGroup& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.other_name < b.other_name;
    }
};

// ---------------------------------------------------------------------------
// Core value types
// ---------------------------------------------------------------------------

struct InstrumentSpec {
    std::string id;
    InstrumentGroup group;
    double length_mm = 0.0; // longest planar extent
    double width_mm = 0.0;  // planar extent perpendicular to length
    double height_mm = 0.0; // stacking thickness
    bool magnetic = true;   // carried for gripper logic, unused by the packer

    friend bool operator==(const InstrumentSpec&, const InstrumentSpec&) = default;
};

struct TraySpec {
    double length_mm = 0.0; // axis along which columns accumulate
    double width_mm = 0.0;  // axis along which instruments lie
    double depth_mm = 0.0;  // vertical stacking budget
    double divider_thickness_mm = 20.0;

    friend bool operator==(const TraySpec&, const TraySpec&) = default;
};

struct Padding {
    double px_mm = 0.0;
    double py_mm = 0.0;
    double pz_mm = 0.0;

    friend bool operator==(const Padding&, const Padding&) = default;
};

struct ChecklistItem {
    std::string id;
    int qty = 1;
};

struct Checklist {
    std::string procedure_name;
    std::vector<ChecklistItem> items;
};

/// One expanded instrument instance: (id, k) with k in [0, qty).
struct InstanceRef {
    std::string id;
    int instance = 0;

    friend bool operator==(const InstanceRef&, const InstanceRef&) = default;
    friend bool operator<(const InstanceRef& a, const InstanceRef& b) {
        if (a.id != b.id) return a.id < b.id;
        return a.instance < b.instance;
    }
};

// ---------------------------------------------------------------------------
// Merge policy
// ---------------------------------------------------------------------------

/// A merge set is a collection of groups packed as one combined group.
using MergeSet = std::set<InstrumentGroup>;

/// levels[0] is always "no merging"; each later level may only grow the
/// merge sets of the previous one (containment chain).
struct MergePolicy {
    std::vector<std::vector<MergeSet>> levels;

    static MergePolicy defaults() {
        MergePolicy p;
        const MergeSet rings = {InstrumentGroup::ring(), InstrumentGroup::ring_thick()};
        const MergeSet nt = {InstrumentGroup::needle(), InstrumentGroup::thumb()};
        const MergeSet ntg = {InstrumentGroup::needle(), InstrumentGroup::thumb(),
                              InstrumentGroup::gun()};
        p.levels.push_back({});          // L0: no merging
        p.levels.push_back({rings});     // L1
        p.levels.push_back({rings, nt}); // L2
        p.levels.push_back({rings, ntg}); // L3
        return p;
    }

    int max_level() const { return static_cast<int>(levels.size()) - 1; }

    /// Every merge set of level k must be contained in some set of level k+1.
    bool containment_chain_holds() const {
        for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
            for (const MergeSet& ms : levels[k]) {
                bool contained = false;
                for (const MergeSet& next : levels[k + 1]) {
                    if (std::includes(next.begin(), next.end(), ms.begin(), ms.end())) {
                        contained = true;
                        break;
                    }
                }
                if (!contained) return false;
            }
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// log1p-normalized planar dimensions, the dimensional meta-feature pair.
inline std::array<double, 2> meta_features(const InstrumentSpec& spec) {
    return {std::log1p(spec.length_mm), std::log1p(spec.width_mm)};
}

inline void validate_spec(const InstrumentSpec& s) {
    if (s.id.empty()) throw ValidationError("instrument with empty id");
    if (s.width_mm <= 0)
        throw ValidationError("instrument \"" + s.id + "\": width_mm must be > 0");
    if (s.length_mm < s.width_mm)
        throw ValidationError("instrument \"" + s.id + "\": length_mm must be >= width_mm");
    if (s.height_mm <= 0)
        throw ValidationError("instrument \"" + s.id + "\": height_mm must be > 0");
    if (s.group.kind == GroupKind::Other && s.group.other_name.empty())
        throw ValidationError("instrument \"" + s.id + "\": Other group requires a name");
}

inline void validate_tray(const TraySpec& t) {
    if (t.length_mm <= 0 || t.width_mm <= 0 || t.depth_mm <= 0)
        throw ValidationError("tray dimensions must be > 0");
    if (t.divider_thickness_mm <= 0)
        throw ValidationError("divider_thickness_mm must be > 0");
    if (t.divider_thickness_mm >= t.length_mm)
        throw ValidationError("divider_thickness_mm must be < tray length_mm");
}

inline void validate_padding(const Padding& p) {
    if (p.px_mm < 0 || p.py_mm < 0 || p.pz_mm < 0)
        throw ValidationError("padding must be >= 0");
}

namespace detail {

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

inline double require_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number())
        throw ParseError(where + ": missing numeric field \"" + key + "\"");
    return j[key].get<double>();
}

inline std::string require_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_string())
        throw ParseError(where + ": missing string field \"" + key + "\"");
    return j[key].get<std::string>();
}

} // namespace detail

inline std::vector<InstrumentSpec> catalog_from_json(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("instruments") || !j["instruments"].is_array())
        throw ParseError(where + ": expected {\"instruments\":[...]}");
    std::vector<InstrumentSpec> out;
    std::set<std::string> seen;
    for (const json& rec : j["instruments"]) {
        InstrumentSpec s;
        s.id = detail::require_string(rec, "id", where);
        s.group = InstrumentGroup::from_label(detail::require_string(rec, "group", where));
        s.length_mm = detail::require_number(rec, "length_mm", where);
        s.width_mm = detail::require_number(rec, "width_mm", where);
        s.height_mm = detail::require_number(rec, "height_mm", where);
        s.magnetic = rec.contains("magnetic") ? rec["magnetic"].get<bool>() : true;
        validate_spec(s);
        if (!seen.insert(s.id).second)
            throw ValidationError("duplicate instrument id \"" + s.id + "\"");
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<InstrumentSpec> load_catalog(const std::string& path) {
    return catalog_from_json(detail::parse_json_file(path), path);
}

inline json catalog_to_json(const std::vector<InstrumentSpec>& specs) {
    json arr = json::array();
    for (const InstrumentSpec& s : specs) {
        json rec;
        rec["id"] = s.id;
        rec["group"] = s.group.label();
        rec["length_mm"] = s.length_mm;
        rec["width_mm"] = s.width_mm;
        rec["height_mm"] = s.height_mm;
        rec["magnetic"] = s.magnetic;
        arr.push_back(std::move(rec));
    }
    return json{{"instruments", std::move(arr)}};
}

inline Checklist load_checklist(const std::string& path) {
    const json j = detail::parse_json_file(path);
    if (!j.is_object() || !j.contains("items") || !j["items"].is_array())
        throw ParseError(path + ": expected {\"procedure\":...,\"items\":[...]}");
    Checklist c;
    c.procedure_name = j.contains("procedure") ? j["procedure"].get<std::string>() : "";
    for (const json& rec : j["items"]) {
        ChecklistItem item;
        item.id = detail::require_string(rec, "id", path);
        if (!rec.contains("qty") || !rec["qty"].is_number_integer())
            throw ParseError(path + ": item \"" + item.id + "\" missing integer qty");
        item.qty = rec["qty"].get<int>();
        if (item.qty < 1)
            throw ValidationError("checklist item \"" + item.id + "\": qty must be >= 1");
        c.items.push_back(std::move(item));
    }
    return c;
}

inline TraySpec tray_from_json(const json& j, const std::string& where) {
    TraySpec t;
    t.length_mm = detail::require_number(j, "length_mm", where);
    t.width_mm = detail::require_number(j, "width_mm", where);
    t.depth_mm = detail::require_number(j, "depth_mm", where);
    if (j.contains("divider_thickness_mm"))
        t.divider_thickness_mm = j["divider_thickness_mm"].get<double>();
    validate_tray(t);
    return t;
}

inline TraySpec load_tray(const std::string& path) {
    return tray_from_json(detail::parse_json_file(path), path);
}

inline Padding load_padding(const std::string& path) {
    const json j = detail::parse_json_file(path);
    Padding p;
    p.px_mm = detail::require_number(j, "px_mm", path);
    p.py_mm = detail::require_number(j, "py_mm", path);
    p.pz_mm = detail::require_number(j, "pz_mm", path);
    validate_padding(p);
    return p;
}

/// Fast id -> spec lookup over a validated catalog.
class CatalogIndex {
public:
    CatalogIndex() = default;
    explicit CatalogIndex(const std::vector<InstrumentSpec>& specs) {
        for (const InstrumentSpec& s : specs) by_id_.emplace(s.id, s);
    }

    const InstrumentSpec& at(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end())
            throw UnknownInstrumentError("instrument \"" + id + "\" not in catalog");
        return it->second;
    }

    bool contains(const std::string& id) const { return by_id_.count(id) != 0; }
    std::size_t size() const { return by_id_.size(); }

private:
    std::map<std::string, InstrumentSpec> by_id_;
};

/// Expand checklist quantities to individual (id, k) instances, validating
/// every id against the catalog.
inline std::vector<InstanceRef> expand_checklist(const Checklist& checklist,
                                                 const CatalogIndex& catalog) {
    std::vector<InstanceRef> out;
    for (const ChecklistItem& item : checklist.items) {
        if (!catalog.contains(item.id))
            throw UnknownInstrumentError("checklist references unknown instrument \"" +
                                         item.id + "\"");
        for (int k = 0; k < item.qty; ++k) out.push_back({item.id, k});
    }
    return out;
}

} // namespace trayforge
