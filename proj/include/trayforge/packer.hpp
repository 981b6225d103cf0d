#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trayforge/catalog.hpp"
#include "trayforge/errors.hpp"

namespace trayforge {

/// Base footprint (along tray length) reserved by a ring-handle holder rail.
inline constexpr double kHolderBaseMm = 60.0;

namespace detail {
inline constexpr double kGeomEps = 1e-9;
}

// ---------------------------------------------------------------------------
// Layout types
// ---------------------------------------------------------------------------

/// x_mm: footprint center along tray width. y_mm: base coordinate of the
/// column the instrument lies in. z_mm: top face of the instrument.
struct Placement {
    std::string id;
    int instance = 0;
    double x_mm = 0.0;
    double y_mm = 0.0;
    double z_mm = 0.0;
    int column = 0;
    int layer = 0;
};

/// Divider center along tray length; thickness comes from the tray spec.
struct Divider {
    double y_mm = 0.0;
};

/// Ring-handle holder rail occupying a column; y_mm is the column center.
struct Holder {
    int column = 0;
    double y_mm = 0.0;
};

struct ColumnInfo {
    int index = 0;
    double y_start_mm = 0.0;
    double width_mm = 0.0;
    std::string group; // label of the (possibly merged) group packed here
    bool ring = false; // column carries a holder rail
};

struct TrayLayout {
    int merge_level = 0;
    std::vector<Placement> placements;
    std::vector<Divider> dividers;
    std::vector<Holder> holders;
    std::vector<ColumnInfo> columns;
    TraySpec tray;
    Padding padding;
};

/// Work counters for the packing loop itself (instances, layers, columns,
/// groups across all attempted merge levels). Sorting is excluded.
struct PackStats {
    long long steps = 0;
    int columns = 0;
    int layers = 0;
    int merge_level = 0;
};

// ---------------------------------------------------------------------------
// Packing
// ---------------------------------------------------------------------------

namespace detail {

struct QueueItem {
    InstanceRef ref;
    const InstrumentSpec* spec = nullptr;
};

/// A (possibly merged) group destined for its own run of columns.
struct PackGroup {
    std::vector<InstrumentGroup> members; // sorted, unique
    std::vector<QueueItem> items;

    bool ring() const {
        return std::all_of(members.begin(), members.end(),
                           [](const InstrumentGroup& g) { return g.is_ring_type(); });
    }

    std::string label() const {
        std::string out;
        for (const InstrumentGroup& g : members) {
            if (!out.empty()) out += "+";
            out += g.label();
        }
        return out;
    }

    /// Canonical order: lowest member rank first, then member label.
    std::pair<int, std::string> order_key() const {
        int rank = 1 << 20;
        for (const InstrumentGroup& g : members) rank = std::min(rank, g.rank());
        return {rank, members.empty() ? std::string{} : members.front().label()};
    }
};

/// Thrown internally when columns run past the tray length; pack() reacts
/// by escalating to the next merge level.
struct LengthOverflowSignal {};

inline std::vector<PackGroup> build_groups(const std::vector<QueueItem>& items,
                                           const MergePolicy& policy, int level) {
    const std::vector<MergeSet>& merges = policy.levels.at(level);

    // Key every instrument by its merge set when one applies, else by itself.
    std::map<std::vector<InstrumentGroup>, PackGroup> by_key;
    for (const QueueItem& item : items) {
        std::vector<InstrumentGroup> key;
        for (const MergeSet& ms : merges) {
            if (ms.count(item.spec->group)) {
                key.assign(ms.begin(), ms.end());
                break;
            }
        }
        if (key.empty()) key = {item.spec->group};
        PackGroup& g = by_key[key];
        g.members = key;
        g.items.push_back(item);
    }

    std::vector<PackGroup> out;
    out.reserve(by_key.size());
    for (auto& [key, g] : by_key) out.push_back(std::move(g));
    std::sort(out.begin(), out.end(), [](const PackGroup& a, const PackGroup& b) {
        return a.order_key() < b.order_key();
    });

    // Longest first; remaining keys only make the order reproducible.
    for (PackGroup& g : out) {
        std::sort(g.items.begin(), g.items.end(), [](const QueueItem& a, const QueueItem& b) {
            if (a.spec->length_mm != b.spec->length_mm)
                return a.spec->length_mm > b.spec->length_mm;
            if (a.spec->width_mm != b.spec->width_mm) return a.spec->width_mm > b.spec->width_mm;
            return a.ref < b.ref;
        });
    }
    return out;
}

inline TrayLayout try_pack(const std::vector<QueueItem>& items, const TraySpec& tray,
                           const Padding& pad, const MergePolicy& policy, int level,
                           PackStats& stats) {
    TrayLayout lay;
    lay.merge_level = level;
    lay.tray = tray;
    lay.padding = pad;

    double y_off = 0.0;

    for (const PackGroup& group : build_groups(items, policy, level)) {
        ++stats.steps;
        const bool ring = group.ring();
        std::size_t qi = 0;

        while (qi < group.items.size()) {
            // Open a column at y_off; base coordinate is shared by all its
            // placements, width grows with the widest instrument placed.
            ++stats.steps;
            const int col_index = static_cast<int>(lay.columns.size());
            double z = 0.0;
            double col_w = ring ? kHolderBaseMm : 0.0;
            int layer = 0;

            for (;;) {
                if (qi >= group.items.size()) break;
                const QueueItem& head = group.items[qi];
                if (z + head.spec->height_mm > tray.depth_mm + detail::kGeomEps) {
                    if (layer == 0)
                        throw DepthOverflowError(
                            head.ref.id, "instrument \"" + head.ref.id +
                                             "\" is taller than the tray depth");
                    break; // column is full; remaining items open a new one
                }

                // The longest remaining instrument fixes the slot width for
                // the whole layer, so slots never collide.
                ++stats.steps;
                const double slot_w = head.spec->length_mm + 2.0 * pad.px_mm;
                const int n_max =
                    static_cast<int>(std::floor(tray.width_mm / slot_w + detail::kGeomEps));
                if (n_max < 1)
                    throw WidthOverflowError(head.ref.id,
                                             "instrument \"" + head.ref.id +
                                                 "\" (plus x padding) is wider than the tray");

                double layer_h = 0.0;
                for (int slot = 0; slot < n_max && qi < group.items.size(); ++slot) {
                    const QueueItem& it = group.items[qi];
                    if (z + it.spec->height_mm > tray.depth_mm + detail::kGeomEps)
                        break; // too tall for this level of the stack
                    ++stats.steps;
                    lay.placements.push_back({it.ref.id, it.ref.instance,
                                              (slot + 0.5) * slot_w, y_off,
                                              z + it.spec->height_mm, col_index, layer});
                    layer_h = std::max(layer_h, it.spec->height_mm);
                    col_w = std::max(col_w, it.spec->width_mm + 2.0 * pad.py_mm);
                    ++qi;
                }

                ++stats.layers;
                ++layer;
                z += layer_h + pad.pz_mm;
                if (ring) break; // holder rails carry a single layer
            }

            if (y_off + col_w > tray.length_mm + detail::kGeomEps)
                throw LengthOverflowSignal{};

            lay.columns.push_back({col_index, y_off, col_w, group.label(), ring});
            if (ring) lay.holders.push_back({col_index, y_off + 0.5 * col_w});
            lay.dividers.push_back({y_off + col_w + 0.5 * tray.divider_thickness_mm});
            y_off += col_w + tray.divider_thickness_mm;
            ++stats.columns;
        }
    }

    // The divider recorded after the final column has nothing to separate.
    if (!lay.dividers.empty()) lay.dividers.pop_back();
    return lay;
}

} // namespace detail

/// Pack every checklist instance into the tray, escalating through the merge
/// policy whenever the columns outrun the tray length.
inline TrayLayout pack(const std::vector<InstrumentSpec>& catalog, const Checklist& checklist,
                       const TraySpec& tray, const Padding& padding,
                       const MergePolicy& policy = MergePolicy::defaults(),
                       PackStats* stats = nullptr) {
    validate_tray(tray);
    validate_padding(padding);
    for (const InstrumentSpec& s : catalog) validate_spec(s);
    if (policy.levels.empty() || !policy.levels.front().empty())
        throw ValidationError("merge policy must start with a no-merge level");
    if (!policy.containment_chain_holds())
        throw ValidationError("merge policy levels must form a containment chain");

    const CatalogIndex index(catalog);
    std::vector<detail::QueueItem> items;
    for (const InstanceRef& ref : expand_checklist(checklist, index))
        items.push_back({ref, &index.at(ref.id)});

    PackStats local;
    PackStats& st = stats ? *stats : local;
    st = PackStats{};

    for (int level = 0; level <= policy.max_level(); ++level) {
        const PackStats checkpoint = st;
        try {
            TrayLayout lay = detail::try_pack(items, tray, padding, policy, level, st);
            st.merge_level = level;
            return lay;
        } catch (const detail::LengthOverflowSignal&) {
            // steps keeps the wasted attempt; the structural counters only
            // ever describe the layout that is actually returned.
            st.columns = checkpoint.columns;
            st.layers = checkpoint.layers;
        }
    }
    throw LengthOverflowError("instruments exceed the tray length at every merge level");
}

// ---------------------------------------------------------------------------
// Assembly order
// ---------------------------------------------------------------------------

enum class StepKind { PlaceHolder, PlaceInstrument, PlaceDivider };

struct PlanStep {
    StepKind kind = StepKind::PlaceInstrument;
    InstanceRef ref;    // meaningful for PlaceInstrument only
    int column = 0;     // column being assembled (divider: column it follows)
};

/// Deterministic assembly sequence: per column, holder first, instruments
/// bottom layer up and left to right, then the divider that closes it.
inline std::vector<PlanStep> placement_order(const TrayLayout& lay) {
    std::vector<PlanStep> plan;
    std::vector<std::vector<const Placement*>> per_col(lay.columns.size());
    for (const Placement& p : lay.placements) {
        if (p.column < 0 || p.column >= static_cast<int>(per_col.size()))
            throw InvalidLayoutError("placement \"" + p.id + "\" references missing column");
        per_col[p.column].push_back(&p);
    }
    for (const ColumnInfo& col : lay.columns) {
        auto& ps = per_col[col.index];
        std::sort(ps.begin(), ps.end(), [](const Placement* a, const Placement* b) {
            if (a->layer != b->layer) return a->layer < b->layer;
            if (a->x_mm != b->x_mm) return a->x_mm < b->x_mm;
            return std::make_pair(a->id, a->instance) < std::make_pair(b->id, b->instance);
        });
        if (col.ring) plan.push_back({StepKind::PlaceHolder, {}, col.index});
        for (const Placement* p : ps)
            plan.push_back({StepKind::PlaceInstrument, {p->id, p->instance}, col.index});
        if (col.index + 1 < static_cast<int>(lay.columns.size()))
            plan.push_back({StepKind::PlaceDivider, {}, col.index});
    }
    return plan;
}

/// The instrument subsequence of placement_order; the hand-off plan.
inline std::vector<InstanceRef> plan_instances(const TrayLayout& lay) {
    std::vector<InstanceRef> out;
    for (const PlanStep& step : placement_order(lay))
        if (step.kind == StepKind::PlaceInstrument) out.push_back(step.ref);
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks a layout against the geometry it claims: known instruments, stacks
/// inside the tray, disjoint slots, columns separated by dividers.
inline void validate_layout(const TrayLayout& lay, const CatalogIndex& catalog) {
    constexpr double tol = 1e-6;
    validate_tray(lay.tray);
    validate_padding(lay.padding);
    if (lay.merge_level < 0) throw InvalidLayoutError("merge_level must be >= 0");

    for (std::size_t i = 0; i < lay.columns.size(); ++i) {
        const ColumnInfo& c = lay.columns[i];
        if (c.index != static_cast<int>(i))
            throw InvalidLayoutError("column indices must be 0..k-1 in order");
        if (c.width_mm <= 0) throw InvalidLayoutError("column width must be > 0");
        if (c.y_start_mm < -tol || c.y_start_mm + c.width_mm > lay.tray.length_mm + tol)
            throw InvalidLayoutError("column " + std::to_string(i) + " exceeds tray length");
        if (i > 0) {
            const ColumnInfo& prev = lay.columns[i - 1];
            const double gap = c.y_start_mm - (prev.y_start_mm + prev.width_mm);
            if (gap < lay.tray.divider_thickness_mm - tol)
                throw InvalidLayoutError("columns " + std::to_string(i - 1) + " and " +
                                         std::to_string(i) + " leave no room for a divider");
        }
    }

    const std::size_t expected_dividers = lay.columns.empty() ? 0 : lay.columns.size() - 1;
    if (lay.dividers.size() != expected_dividers)
        throw InvalidLayoutError("expected one divider between each pair of columns");
    for (std::size_t i = 0; i < lay.dividers.size(); ++i) {
        const double y = lay.dividers[i].y_mm;
        const double half = 0.5 * lay.tray.divider_thickness_mm;
        if (y - half < lay.columns[i].y_start_mm + lay.columns[i].width_mm - tol ||
            y + half > lay.columns[i + 1].y_start_mm + tol)
            throw InvalidLayoutError("divider " + std::to_string(i) +
                                     " does not sit between its columns");
    }

    std::vector<bool> holder_seen(lay.columns.size(), false);
    for (const Holder& h : lay.holders) {
        if (h.column < 0 || h.column >= static_cast<int>(lay.columns.size()))
            throw InvalidLayoutError("holder references missing column");
        if (!lay.columns[h.column].ring)
            throw InvalidLayoutError("holder placed in a non-ring column");
        if (holder_seen[h.column]) throw InvalidLayoutError("duplicate holder in a column");
        holder_seen[h.column] = true;
    }
    for (const ColumnInfo& c : lay.columns)
        if (c.ring && !holder_seen[c.index])
            throw InvalidLayoutError("ring column " + std::to_string(c.index) +
                                     " is missing its holder");

    std::set<std::pair<std::string, int>> seen;
    std::map<std::pair<int, int>, std::vector<const Placement*>> slots;
    for (const Placement& p : lay.placements) {
        const InstrumentSpec& spec = catalog.at(p.id); // throws UnknownInstrumentError
        if (!seen.insert({p.id, p.instance}).second)
            throw InvalidLayoutError("duplicate placement of \"" + p.id + "\" instance " +
                                     std::to_string(p.instance));
        if (p.column < 0 || p.column >= static_cast<int>(lay.columns.size()))
            throw InvalidLayoutError("placement \"" + p.id + "\" references missing column");
        if (p.layer < 0) throw InvalidLayoutError("placement layer must be >= 0");
        const ColumnInfo& col = lay.columns[p.column];
        if (std::abs(p.y_mm - col.y_start_mm) > tol)
            throw InvalidLayoutError("placement \"" + p.id +
                                     "\" y_mm must equal its column base");
        if (spec.width_mm > col.width_mm + tol)
            throw InvalidLayoutError("placement \"" + p.id + "\" is wider than its column");
        if (p.x_mm - 0.5 * spec.length_mm < -tol ||
            p.x_mm + 0.5 * spec.length_mm > lay.tray.width_mm + tol)
            throw InvalidLayoutError("placement \"" + p.id + "\" exceeds tray width");
        if (p.z_mm > lay.tray.depth_mm + tol)
            throw InvalidLayoutError("placement \"" + p.id + "\" exceeds tray depth");
        if (p.z_mm - spec.height_mm < -tol)
            throw InvalidLayoutError("placement \"" + p.id + "\" sinks below the tray floor");
        slots[{p.column, p.layer}].push_back(&p);
    }

    for (const auto& [key, ps] : slots) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const double li = catalog.at(ps[i]->id).length_mm;
            for (std::size_t j = i + 1; j < ps.size(); ++j) {
                const double lj = catalog.at(ps[j]->id).length_mm;
                if (std::abs(ps[i]->x_mm - ps[j]->x_mm) < 0.5 * (li + lj) - tol)
                    throw InvalidLayoutError("placements \"" + ps[i]->id + "\" and \"" +
                                             ps[j]->id + "\" overlap in column " +
                                             std::to_string(key.first));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline json layout_to_json(const TrayLayout& lay, const std::vector<InstrumentSpec>& catalog) {
    json j;
    j["merge_level"] = lay.merge_level;

    json placements = json::array();
    for (const Placement& p : lay.placements) {
        json rec;
        rec["id"] = p.id;
        rec["instance"] = p.instance;
        rec["x_mm"] = round6(p.x_mm);
        rec["y_mm"] = round6(p.y_mm);
        rec["z_mm"] = round6(p.z_mm);
        rec["column"] = p.column;
        rec["layer"] = p.layer;
        placements.push_back(std::move(rec));
    }
    j["placements"] = std::move(placements);

    json dividers = json::array();
    for (const Divider& d : lay.dividers) dividers.push_back(json{{"y_mm", round6(d.y_mm)}});
    j["dividers"] = std::move(dividers);

    json holders = json::array();
    for (const Holder& h : lay.holders)
        holders.push_back(json{{"column", h.column}, {"y_mm", round6(h.y_mm)}});
    j["holders"] = std::move(holders);

    json columns = json::array();
    for (const ColumnInfo& c : lay.columns) {
        json rec;
        rec["index"] = c.index;
        rec["y_start_mm"] = round6(c.y_start_mm);
        rec["width_mm"] = round6(c.width_mm);
        rec["group"] = c.group;
        rec["ring"] = c.ring;
        columns.push_back(std::move(rec));
    }
    j["columns"] = std::move(columns);

    // Embed the specs the placements use so the file replays standalone.
    std::set<std::string> used;
    for (const Placement& p : lay.placements) used.insert(p.id);
    json instruments = json::array();
    for (const InstrumentSpec& s : catalog) {
        if (!used.count(s.id)) continue;
        json rec;
        rec["id"] = s.id;
        rec["group"] = s.group.label();
        rec["length_mm"] = round6(s.length_mm);
        rec["width_mm"] = round6(s.width_mm);
        rec["height_mm"] = round6(s.height_mm);
        rec["magnetic"] = s.magnetic;
        instruments.push_back(std::move(rec));
    }
    j["instruments"] = std::move(instruments);

    j["tray"] = json{{"length_mm", round6(lay.tray.length_mm)},
                     {"width_mm", round6(lay.tray.width_mm)},
                     {"depth_mm", round6(lay.tray.depth_mm)},
                     {"divider_thickness_mm", round6(lay.tray.divider_thickness_mm)}};
    j["padding"] = json{{"px_mm", round6(lay.padding.px_mm)},
                        {"py_mm", round6(lay.padding.py_mm)},
                        {"pz_mm", round6(lay.padding.pz_mm)}};
    return j;
}

struct LoadedLayout {
    TrayLayout layout;
    std::vector<InstrumentSpec> instruments;
};

inline LoadedLayout layout_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected a layout object");
    LoadedLayout out;
    TrayLayout& lay = out.layout;
    try {
        lay.merge_level = j.at("merge_level").get<int>();
        for (const json& rec : j.at("placements")) {
            Placement p;
            p.id = rec.at("id").get<std::string>();
            p.instance = rec.at("instance").get<int>();
            p.x_mm = rec.at("x_mm").get<double>();
            p.y_mm = rec.at("y_mm").get<double>();
            p.z_mm = rec.at("z_mm").get<double>();
            p.column = rec.at("column").get<int>();
            p.layer = rec.at("layer").get<int>();
            lay.placements.push_back(std::move(p));
        }
        for (const json& rec : j.at("dividers"))
            lay.dividers.push_back({rec.at("y_mm").get<double>()});
        for (const json& rec : j.at("holders"))
            lay.holders.push_back({rec.at("column").get<int>(), rec.at("y_mm").get<double>()});
        for (const json& rec : j.at("columns")) {
            ColumnInfo c;
            c.index = rec.at("index").get<int>();
            c.y_start_mm = rec.at("y_start_mm").get<double>();
            c.width_mm = rec.at("width_mm").get<double>();
            c.group = rec.at("group").get<std::string>();
            c.ring = rec.at("ring").get<bool>();
            lay.columns.push_back(std::move(c));
        }
        out.instruments = catalog_from_json(json{{"instruments", j.at("instruments")}}, where);
        lay.tray = tray_from_json(j.at("tray"), where);
        lay.padding.px_mm = j.at("padding").at("px_mm").get<double>();
        lay.padding.py_mm = j.at("padding").at("py_mm").get<double>();
        lay.padding.pz_mm = j.at("padding").at("pz_mm").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
    return out;
}

inline LoadedLayout load_layout(const std::string& path) {
    return layout_from_json(detail::parse_json_file(path), path);
}

} // namespace trayforge
