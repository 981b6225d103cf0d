#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "trayforge/catalog.hpp"
#include "trayforge/errors.hpp"
#include "trayforge/geometry.hpp"
#include "trayforge/packer.hpp"
#include "trayforge/rng.hpp"

namespace trayforge {

// The simulator is a quasi-static jitter-in-slack model: no momentum, no
// friction, bodies rattle inside the free space their surroundings leave
// them. Its contract is ordinal — structured layouts contact less than loose
// ones — not metric; absolute counts are not comparable to bench data.

struct SimParams {
    double eps_mm = 0.5;        // contact proximity (powder-transfer range)
    double kappa = 6.0;         // instability gain per unsupported area
    double z_gain = 0.35;       // vertical rattle, fraction of the z slack
    double gate_slack_mm = 2.0; // movement left to holder-gated instruments
    double wiggle_share = 0.15; // individual share of a chained body's jitter
    double swap_rate = 0.1;     // loose-pile re-stacking chance per step
    int sampling_attempts = 10000;
};

enum class Mode { Displacement, Tilt };

inline std::string mode_label(Mode m) {
    return m == Mode::Displacement ? "displacement" : "tilt";
}

struct ExcitationProfile {
    Mode mode = Mode::Displacement;
    double duration_s = 15.0;
    double freq_lo_hz = 1.5;
    double freq_hi_hz = 1.8;
    double amplitude_mm = 100.0;
    double tilt_deg = 30.0;
    double tilt_ramp_s = 3.0;

    static ExcitationProfile displacement() { return {}; }
    static ExcitationProfile tilt() {
        ExcitationProfile p;
        p.mode = Mode::Tilt;
        return p;
    }
};

inline void validate_profile(const ExcitationProfile& p) {
    if (p.duration_s <= 0 || p.amplitude_mm <= 0 || p.tilt_deg <= 0 || p.tilt_ramp_s <= 0 ||
        p.freq_lo_hz <= 0 || p.freq_hi_hz < p.freq_lo_hz)
        throw ValidationError("excitation profile fields must be positive (freq_hi >= freq_lo)");
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

/// One movable footprint. The cell [x_lo,x_hi]x[y_lo,y_hi] bounds where the
/// rect CENTER may go; it encodes every wall the body can reach (neighbors
/// at rest, dividers, holder gates, tray walls).
struct SimBody {
    std::string id;
    int instance = 0;
    OrientedRect rest;
    double z_top_mm = 0.0;
    double height_mm = 0.0;
    double x_lo = 0.0, x_hi = 0.0;
    double y_lo = 0.0, y_hi = 0.0;
    double z_slack_mm = 0.0;
    double instability = 1.0; // 1 + kappa * (1 - supported area fraction)
    int chain = -1;           // stringer id; chained bodies move together
    int column = -1, layer = -1; // -1 outside layout-derived scenes
    bool gated = false;          // pinned by a holder gate
    bool bag = false;            // merged sterilizer-bag body
};

struct SimScene {
    TraySpec tray;
    std::vector<SimBody> bodies;
    int control = -1;
};

/// Pick the powder-coated instrument for a trial: any body that is an
/// actual instrument (bags cannot be coated).
inline int pick_control(const SimScene& scene, Rng& rng) {
    std::vector<int> candidates;
    for (std::size_t i = 0; i < scene.bodies.size(); ++i)
        if (!scene.bodies[i].bag) candidates.push_back(static_cast<int>(i));
    if (candidates.empty()) throw ValidationError("scene has no instrument to coat");
    return candidates[rng.below(candidates.size())];
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::array<double, 4> body_aabb(const SimBody& b) {
    return {b.rest.center.x - b.rest.aabb_hx(), b.rest.center.y - b.rest.aabb_hy(),
            b.rest.center.x + b.rest.aabb_hx(), b.rest.center.y + b.rest.aabb_hy()};
}

/// Cells + instability for a layout-derived scene. Unvalidated on purpose:
/// baseline B feeds reflowed (possibly over-deep) stacks through here.
inline SimScene build_scene(const TrayLayout& lay, const CatalogIndex& catalog, int control,
                            const SimParams& params) {
    SimScene scene;
    scene.tray = lay.tray;
    scene.control = control;

    // Divider faces bound each column's reachable span along y.
    const double half_t = 0.5 * lay.tray.divider_thickness_mm;
    std::vector<std::pair<double, double>> y_faces(lay.columns.size());
    for (std::size_t c = 0; c < lay.columns.size(); ++c) {
        y_faces[c].first = c == 0 ? 0.0 : lay.dividers[c - 1].y_mm + half_t;
        y_faces[c].second =
            c + 1 == lay.columns.size() ? lay.tray.length_mm : lay.dividers[c].y_mm - half_t;
    }

    for (const Placement& p : lay.placements) {
        const InstrumentSpec& spec = catalog.at(p.id);
        const ColumnInfo& col = lay.columns[p.column];
        SimBody b;
        b.id = p.id;
        b.instance = p.instance;
        b.rest = {{p.x_mm, col.y_start_mm + 0.5 * col.width_mm}, 0.5 * spec.length_mm,
                  0.5 * spec.width_mm, 0.0};
        b.z_top_mm = p.z_mm;
        b.height_mm = spec.height_mm;
        b.column = p.column;
        b.layer = p.layer;
        b.gated = col.ring;
        if (b.gated) {
            b.x_lo = b.rest.center.x - params.gate_slack_mm;
            b.x_hi = b.rest.center.x + params.gate_slack_mm;
            b.y_lo = b.rest.center.y - params.gate_slack_mm;
            b.y_hi = b.rest.center.y + params.gate_slack_mm;
            b.z_slack_mm = params.gate_slack_mm;
        } else {
            b.y_lo = y_faces[p.column].first + b.rest.hy;
            b.y_hi = y_faces[p.column].second - b.rest.hy;
            b.z_slack_mm = lay.padding.pz_mm;
        }
        scene.bodies.push_back(std::move(b));
    }

    // x cells: free space up to the same-layer neighbors' rest edges (or the
    // tray walls); both sides of a gap can reach into it, which is exactly
    // how rattling neighbors meet.
    std::map<std::pair<int, int>, std::vector<int>> strata;
    for (std::size_t i = 0; i < scene.bodies.size(); ++i) {
        const SimBody& b = scene.bodies[i];
        if (!b.gated) strata[{b.column, b.layer}].push_back(static_cast<int>(i));
    }
    for (auto& [key, idx] : strata) {
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            return scene.bodies[a].rest.center.x < scene.bodies[b].rest.center.x;
        });
        for (std::size_t k = 0; k < idx.size(); ++k) {
            SimBody& b = scene.bodies[idx[k]];
            const double lo_edge =
                k == 0 ? 0.0
                       : scene.bodies[idx[k - 1]].rest.center.x + scene.bodies[idx[k - 1]].rest.hx;
            const double hi_edge =
                k + 1 == idx.size()
                    ? lay.tray.width_mm
                    : scene.bodies[idx[k + 1]].rest.center.x - scene.bodies[idx[k + 1]].rest.hx;
            b.x_lo = lo_edge + b.rest.hx;
            b.x_hi = hi_edge - b.rest.hx;
        }
    }

    // Instability: how much of the footprint rests on the layer below.
    std::map<std::pair<int, int>, std::vector<std::array<double, 4>>> support;
    for (const SimBody& b : scene.bodies)
        support[{b.column, b.layer}].push_back(body_aabb(b));
    for (SimBody& b : scene.bodies) {
        if (b.layer <= 0) continue; // the floor carries layer 0
        const auto below = support.find({b.column, b.layer - 1});
        const std::array<double, 4> q = body_aabb(b);
        const double area = (q[2] - q[0]) * (q[3] - q[1]);
        const double covered =
            below == support.end() || area <= 0 ? 0.0 : covered_area(q, below->second) / area;
        b.instability = 1.0 + params.kappa * (1.0 - std::min(1.0, covered));
    }
    return scene;
}

} // namespace detail

/// Turn a packed (validated) layout into a simulation scene; condition C.
inline SimScene scene_from_layout(const TrayLayout& lay, const CatalogIndex& catalog,
                                  int control, const SimParams& params = {}) {
    validate_layout(lay, catalog);
    SimScene scene = detail::build_scene(lay, catalog, control, params);
    if (control < 0 || control >= static_cast<int>(scene.bodies.size()))
        throw ValidationError("control index out of range");
    return scene;
}

// ---------------------------------------------------------------------------
// Baseline scenes
// ---------------------------------------------------------------------------

enum class BaselineKind { HumanLoose, NoAlgorithm };

namespace detail {

inline bool fits_in_tray(const OrientedRect& r, const TraySpec& tray) {
    for (const Vec2& c : r.corners())
        if (c.x < 0 || c.y < 0 || c.x > tray.width_mm || c.y > tray.length_mm) return false;
    return true;
}

inline bool clear_of(const OrientedRect& r, const std::vector<SimBody>& placed) {
    for (const SimBody& b : placed)
        if (rects_overlap(r, b.rest)) return false;
    return true;
}

/// Tray A: ring instruments threaded on a stringer (one rigid-ish chain),
/// needle and thumb groups sealed as one sterilizer-bag body each,
/// everything else tossed in loose. No dividers, no holders.
inline SimScene human_loose_scene(const std::vector<InstanceRef>& instances,
                                  const CatalogIndex& catalog, const TraySpec& tray,
                                  std::uint64_t seed, const SimParams& params) {
    SimScene scene;
    scene.tray = tray;
    Rng rng(seed);

    std::vector<const InstrumentSpec*> chain;
    std::vector<InstanceRef> chain_refs;
    std::map<GroupKind, std::vector<const InstrumentSpec*>> bags;
    std::vector<std::pair<InstanceRef, const InstrumentSpec*>> loose;
    for (const InstanceRef& ref : instances) {
        const InstrumentSpec& spec = catalog.at(ref.id);
        if (spec.group.is_ring_type()) {
            chain.push_back(&spec);
            chain_refs.push_back(ref);
        } else if (spec.group.kind == GroupKind::Needle || spec.group.kind == GroupKind::Thumb) {
            bags[spec.group.kind].push_back(&spec);
        } else {
            loose.push_back({ref, &spec});
        }
    }

    auto sample = [&](double hx, double hy, bool rotate,
                      const char* what) -> OrientedRect {
        for (int attempt = 0; attempt < params.sampling_attempts; ++attempt) {
            OrientedRect r;
            r.angle_rad = rotate ? rng.uniform(0.0, 2.0 * 3.141592653589793) : 0.0;
            r.hx = hx;
            r.hy = hy;
            r.center = {rng.uniform(r.aabb_hx(), tray.width_mm - r.aabb_hx()),
                        rng.uniform(r.aabb_hy(), tray.length_mm - r.aabb_hy())};
            if (!fits_in_tray(r, tray) || !clear_of(r, scene.bodies)) continue;
            return r;
        }
        throw PlacementSamplingExhaustedError(std::string("could not place ") + what +
                                              " in the tray");
    };

    // The stringer: members side by side, lengths perpendicular to the rod,
    // touching — powder travels along a stringer. Placed as one rigid unit.
    if (!chain.empty()) {
        double rod_len = 0.0, max_len = 0.0;
        for (const InstrumentSpec* s : chain) {
            rod_len += s->width_mm;
            max_len = std::max(max_len, s->length_mm);
        }
        const OrientedRect frame = sample(0.5 * max_len, 0.5 * rod_len, true, "the stringer");
        const Vec2 rod{-std::sin(frame.angle_rad), std::cos(frame.angle_rad)};
        double run = -0.5 * rod_len;
        for (std::size_t k = 0; k < chain.size(); ++k) {
            const InstrumentSpec& s = *chain[k];
            SimBody b;
            b.id = chain_refs[k].id;
            b.instance = chain_refs[k].instance;
            b.rest = {frame.center + (run + 0.5 * s.width_mm) * rod, 0.5 * s.length_mm,
                      0.5 * s.width_mm, frame.angle_rad};
            run += s.width_mm;
            b.z_top_mm = s.height_mm;
            b.height_mm = s.height_mm;
            b.chain = 0;
            scene.bodies.push_back(std::move(b));
        }
    }

    for (const auto& [kind, members] : bags) {
        double area = 0.0, max_len = 0.0, max_w = 0.0, max_h = 0.0;
        for (const InstrumentSpec* s : members) {
            area += s->length_mm * s->width_mm;
            max_len = std::max(max_len, s->length_mm);
            max_w = std::max(max_w, s->width_mm);
            max_h = std::max(max_h, s->height_mm);
        }
        const double bag_l = max_len + 20.0;
        const double bag_w = std::max(max_w + 20.0, 1.4 * area / bag_l);
        SimBody b;
        b.id = "bag:" + InstrumentGroup{kind, {}}.label();
        b.rest = sample(0.5 * bag_l, 0.5 * bag_w, true, b.id.c_str());
        b.z_top_mm = max_h;
        b.height_mm = max_h;
        b.bag = true;
        scene.bodies.push_back(std::move(b));
    }

    // Big footprints first keeps rejection sampling cheap.
    std::sort(loose.begin(), loose.end(), [](const auto& a, const auto& b) {
        const double aa = a.second->length_mm * a.second->width_mm;
        const double bb = b.second->length_mm * b.second->width_mm;
        if (aa != bb) return aa > bb;
        return a.first < b.first;
    });
    for (const auto& [ref, spec] : loose) {
        SimBody b;
        b.id = ref.id;
        b.instance = ref.instance;
        b.rest = sample(0.5 * spec->length_mm, 0.5 * spec->width_mm, true, ref.id.c_str());
        b.z_top_mm = spec->height_mm;
        b.height_mm = spec->height_mm;
        scene.bodies.push_back(std::move(b));
    }

    // Loose bodies can roam the whole tray; everyone sits on the floor.
    for (SimBody& b : scene.bodies) {
        b.x_lo = b.rest.aabb_hx();
        b.x_hi = tray.width_mm - b.rest.aabb_hx();
        b.y_lo = b.rest.aabb_hy();
        b.y_hi = tray.length_mm - b.rest.aabb_hy();
        b.z_slack_mm = params.gate_slack_mm;
    }
    return scene;
}

/// Tray B: the packed structure (columns, dividers, holders) with the
/// instance order inside each column shuffled, then re-flowed through the
/// same layer rules — no descending-length discipline, so long instruments
/// end up overhanging short ones. Depth overruns are allowed: a human
/// stacking by hand does not re-open the next column.
inline TrayLayout no_algorithm_layout(TrayLayout lay, const CatalogIndex& catalog,
                                      std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<Placement>> per_col(lay.columns.size());
    for (Placement& p : lay.placements) per_col[p.column].push_back(std::move(p));
    lay.placements.clear();

    for (const ColumnInfo& col : lay.columns) {
        std::vector<Placement>& ps = per_col[col.index];
        std::sort(ps.begin(), ps.end(), [](const Placement& a, const Placement& b) {
            if (a.layer != b.layer) return a.layer < b.layer;
            if (a.x_mm != b.x_mm) return a.x_mm < b.x_mm;
            return std::make_pair(a.id, a.instance) < std::make_pair(b.id, b.instance);
        });
        for (std::size_t k = ps.size(); k > 1; --k)
            std::swap(ps[k - 1], ps[rng.below(k)]);

        double z = 0.0;
        int layer = 0;
        std::size_t i = 0;
        while (i < ps.size()) {
            // Grow the layer while the widening slots still fit the tray.
            std::size_t count = 1;
            double max_len = catalog.at(ps[i].id).length_mm;
            while (i + count < ps.size()) {
                const double cand = std::max(max_len, catalog.at(ps[i + count].id).length_mm);
                const double w = cand + 2.0 * lay.padding.px_mm;
                if (static_cast<double>(count + 1) * w > lay.tray.width_mm + 1e-9) break;
                max_len = cand;
                ++count;
            }
            const double slot_w = max_len + 2.0 * lay.padding.px_mm;
            double layer_h = 0.0;
            for (std::size_t s = 0; s < count; ++s) {
                Placement p = ps[i + s];
                const InstrumentSpec& spec = catalog.at(p.id);
                p.x_mm = (static_cast<double>(s) + 0.5) * slot_w;
                p.z_mm = z + spec.height_mm;
                p.layer = layer;
                layer_h = std::max(layer_h, spec.height_mm);
                lay.placements.push_back(std::move(p));
            }
            z += layer_h + lay.padding.pz_mm;
            ++layer;
            i += count;
        }
    }
    return lay;
}

} // namespace detail

/// Generate a manually assembled tray: HumanLoose is the stringer-and-bags
/// pile (tray A), NoAlgorithm keeps dividers and holders but shuffles each
/// column (tray B). Deterministic in `seed`; the control is left unset.
inline SimScene baseline_scene(const Checklist& checklist,
                               const std::vector<InstrumentSpec>& catalog, const TraySpec& tray,
                               const Padding& padding, BaselineKind kind, std::uint64_t seed,
                               const SimParams& params = {}) {
    validate_tray(tray);
    const CatalogIndex index(catalog);
    if (kind == BaselineKind::HumanLoose) {
        const std::vector<InstanceRef> instances = expand_checklist(checklist, index);
        return detail::human_loose_scene(instances, index, tray, Rng::mix(seed, 0xA11CEull),
                                         params);
    }
    TrayLayout lay = pack(catalog, checklist, tray, padding);
    lay = detail::no_algorithm_layout(std::move(lay), index, Rng::mix(seed, 0xB0B5ull));
    return detail::build_scene(lay, index, -1, params);
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

struct TrialReport {
    std::uint64_t seed = 0;
    std::set<int> contacts;
    int count = 0;
};

namespace detail {

struct ChainBounds {
    std::vector<int> members;
    double dx_lo = 0, dx_hi = 0, dy_lo = 0, dy_hi = 0;
};

inline std::map<int, ChainBounds> chain_bounds(const SimScene& scene) {
    std::map<int, ChainBounds> chains;
    for (std::size_t i = 0; i < scene.bodies.size(); ++i) {
        const SimBody& b = scene.bodies[i];
        if (b.chain < 0) continue;
        ChainBounds& cb = chains[b.chain];
        if (cb.members.empty()) {
            cb.dx_lo = cb.dy_lo = -1e300;
            cb.dx_hi = cb.dy_hi = 1e300;
        }
        cb.members.push_back(static_cast<int>(i));
        cb.dx_lo = std::max(cb.dx_lo, b.x_lo - b.rest.center.x);
        cb.dx_hi = std::min(cb.dx_hi, b.x_hi - b.rest.center.x);
        cb.dy_lo = std::max(cb.dy_lo, b.y_lo - b.rest.center.y);
        cb.dy_hi = std::min(cb.dy_hi, b.y_hi - b.rest.center.y);
    }
    return chains;
}

/// Vertical proximity: gap between the two z extents (negative = overlap).
inline double z_gap(double top_a, double h_a, double top_b, double h_b) {
    return std::max((top_a - h_a) - top_b, (top_b - h_b) - top_a);
}

} // namespace detail

/// One seeded excitation run. Bodies jitter inside their cells (anchored at
/// the rest pose — no random walk), the control body's inflated footprint is
/// swept against everyone else each step, and touched bodies accumulate.
inline TrialReport run_trial(const SimScene& scene, const ExcitationProfile& profile,
                             std::uint64_t seed, const SimParams& params = {}) {
    validate_profile(profile);
    const int n = static_cast<int>(scene.bodies.size());
    if (scene.control < 0 || scene.control >= n)
        throw ValidationError("control index out of range");

    TrialReport report;
    report.seed = seed;
    Rng rng(seed);

    std::map<int, detail::ChainBounds> chains = detail::chain_bounds(scene);
    std::vector<int> swappable; // loose-pile bodies that re-stacking may lift
    for (int i = 0; i < n; ++i)
        if (scene.bodies[i].column < 0 && scene.bodies[i].chain < 0) swappable.push_back(i);

    std::vector<double> ox(n, 0.0), oy(n, 0.0), oz(n, 0.0), z_lift(n, 0.0);

    auto sweep = [&]() {
        const SimBody& ctl = scene.bodies[scene.control];
        OrientedRect ctl_rect = ctl.rest;
        ctl_rect.center = ctl_rect.center + Vec2{ox[scene.control], oy[scene.control]};
        const double ctl_top = ctl.z_top_mm + oz[scene.control] + z_lift[scene.control];
        for (int j = 0; j < n; ++j) {
            if (j == scene.control || report.contacts.count(j)) continue;
            const SimBody& b = scene.bodies[j];
            const double gap =
                detail::z_gap(ctl_top, ctl.height_mm, b.z_top_mm + oz[j] + z_lift[j],
                              b.height_mm);
            if (gap > params.eps_mm) continue;
            OrientedRect r = b.rest;
            r.center = r.center + Vec2{ox[j], oy[j]};
            if (rects_overlap(ctl_rect, r, params.eps_mm))
                report.contacts.insert(j);
        }
    };

    // Shared per-step state: the chained bodies' common shift.
    std::map<int, Vec2> chain_shift;

    auto jitter_step = [&](double planar_scale, double jitter_scale, double z_scale,
                           int slide_axis, double slide_frac) {
        // slide_axis: -1 none, 0 x-low, 1 x-high, 2 y-low, 3 y-high.
        if (!swappable.empty() && profile.mode == Mode::Displacement) {
            if (rng.next_double() < params.swap_rate) {
                const int pick = swappable[rng.below(swappable.size())];
                if (z_lift[pick] > 0.0) {
                    z_lift[pick] = 0.0;
                } else {
                    // Hop onto the nearest pile neighbor, as a z shake does.
                    int best = -1;
                    double best_d = 1e300;
                    for (int j : swappable) {
                        if (j == pick) continue;
                        const Vec2 d = scene.bodies[j].rest.center -
                                       scene.bodies[pick].rest.center;
                        const double dist = dot(d, d);
                        if (dist < best_d) {
                            best_d = dist;
                            best = j;
                        }
                    }
                    if (best >= 0) z_lift[pick] = scene.bodies[best].z_top_mm;
                }
            }
        }

        chain_shift.clear();
        for (auto& [cid, cb] : chains) {
            const double dx = rng.symmetric(), dy = rng.symmetric();
            Vec2 shift{0.0, 0.0};
            shift.x = clamp_to(planar_scale * dx * 0.5 * (cb.dx_hi - cb.dx_lo), cb.dx_lo,
                               cb.dx_hi);
            shift.y = clamp_to(planar_scale * dy * 0.5 * (cb.dy_hi - cb.dy_lo), cb.dy_lo,
                               cb.dy_hi);
            if (slide_axis == 0) shift.x = clamp_to(slide_frac * cb.dx_lo + shift.x, cb.dx_lo, cb.dx_hi);
            if (slide_axis == 1) shift.x = clamp_to(slide_frac * cb.dx_hi + shift.x, cb.dx_lo, cb.dx_hi);
            if (slide_axis == 2) shift.y = clamp_to(slide_frac * cb.dy_lo + shift.y, cb.dy_lo, cb.dy_hi);
            if (slide_axis == 3) shift.y = clamp_to(slide_frac * cb.dy_hi + shift.y, cb.dy_lo, cb.dy_hi);
            chain_shift[cid] = shift;
        }

        for (int i = 0; i < n; ++i) {
            const SimBody& b = scene.bodies[i];
            const double dx = rng.symmetric();
            const double dy = rng.symmetric();
            const double dz = rng.symmetric();
            const double hx = 0.5 * std::max(0.0, b.x_hi - b.x_lo);
            const double hy = 0.5 * std::max(0.0, b.y_hi - b.y_lo);
            double x, y;
            if (b.chain >= 0) {
                const Vec2 shift = chain_shift[b.chain];
                x = b.rest.center.x + shift.x +
                    params.wiggle_share * jitter_scale * b.instability * dx * hx;
                y = b.rest.center.y + shift.y +
                    params.wiggle_share * jitter_scale * b.instability * dy * hy;
            } else {
                double tx = b.rest.center.x, ty = b.rest.center.y;
                if (slide_axis == 0) tx += slide_frac * (b.x_lo - b.rest.center.x);
                if (slide_axis == 1) tx += slide_frac * (b.x_hi - b.rest.center.x);
                if (slide_axis == 2) ty += slide_frac * (b.y_lo - b.rest.center.y);
                if (slide_axis == 3) ty += slide_frac * (b.y_hi - b.rest.center.y);
                x = tx + jitter_scale * b.instability * dx * hx;
                y = ty + jitter_scale * b.instability * dy * hy;
            }
            ox[i] = clamp_to(x, b.x_lo, b.x_hi) - b.rest.center.x;
            oy[i] = clamp_to(y, b.y_lo, b.y_hi) - b.rest.center.y;
            const double dz_mm = z_scale * b.instability * dz * b.z_slack_mm;
            oz[i] = std::clamp(dz_mm, -b.z_slack_mm, b.z_slack_mm);
        }
        sweep();
    };

    sweep(); // rest contacts: a stringer's neighbors already touch

    if (profile.mode == Mode::Displacement) {
        const double freq = rng.uniform(profile.freq_lo_hz, profile.freq_hi_hz);
        const int steps =
            static_cast<int>(std::llround(profile.duration_s * freq * 2.0)); // half-cycles
        const double amp_ratio =
            profile.amplitude_mm / std::max(scene.tray.width_mm, scene.tray.length_mm);
        const double z_scale = params.z_gain * profile.amplitude_mm / 100.0;
        for (int s = 0; s < steps; ++s)
            jitter_step(amp_ratio, amp_ratio, z_scale, -1, 0.0);
    } else {
        const int steps = static_cast<int>(std::ceil(profile.tilt_ramp_s * 10.0));
        const double full = std::sin(profile.tilt_deg * 3.141592653589793 / 180.0);
        for (int axis = 0; axis < 4; ++axis) {
            for (int s = 1; s <= steps; ++s) {
                const double theta =
                    profile.tilt_deg * static_cast<double>(s) / steps * 3.141592653589793 / 180.0;
                const double g = std::sin(theta) / full;
                jitter_step(0.0, 0.1 * g, params.z_gain * g, axis, g);
            }
        }
    }

    report.count = static_cast<int>(report.contacts.size());
    return report;
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

/// Equal-n pooled form: (m1 - m2) / sqrt((s1^2 + s2^2) / 2).
inline double cohens_d(double mean1, double std1, double mean2, double std2) {
    if (std1 < 0 || std2 < 0) throw ValidationError("standard deviations must be >= 0");
    const double pooled = std::sqrt(0.5 * (std1 * std1 + std2 * std2));
    if (pooled == 0.0)
        throw ZeroVarianceError("Cohen's d undefined: both standard deviations are zero");
    return (mean1 - mean2) / pooled;
}

struct TrialSummary {
    std::uint64_t seed = 0;
    int count = 0;
};

struct StudyReport {
    std::string condition;
    std::string mode;
    int n = 0;
    double mean = 0.0;
    double stddev = 0.0; // population form
    std::optional<double> cohens_d_vs_A;
    std::vector<TrialSummary> trials;
};

/// Builds the scene for one trial; receives the trial seed and must set the
/// control itself (a fresh control per trial is part of the protocol).
using SceneSource = std::function<SimScene(std::uint64_t)>;

/// Run n_trials per condition. Trial t of every condition uses seed
/// base_seed + t; per-condition streams are separated by salting with the
/// condition name. Results are indexed by trial, so thread count and
/// completion order cannot change a single byte of the report.
inline std::vector<StudyReport> run_study(
    const std::vector<std::pair<std::string, SceneSource>>& sources,
    const ExcitationProfile& profile, int n_trials, std::uint64_t base_seed, int threads = 1,
    const SimParams& params = {}) {
    validate_profile(profile);
    if (n_trials < 1) throw ValidationError("n_trials must be >= 1");
    if (sources.empty()) throw ValidationError("study needs at least one condition");

    struct Job {
        int cond;
        int trial;
    };
    std::vector<Job> jobs;
    for (int c = 0; c < static_cast<int>(sources.size()); ++c)
        for (int t = 0; t < n_trials; ++t) jobs.push_back({c, t});

    std::vector<std::vector<int>> counts(sources.size(), std::vector<int>(n_trials, 0));
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto worker = [&]() {
        for (;;) {
            const std::size_t k = cursor.fetch_add(1);
            if (k >= jobs.size()) return;
            const Job job = jobs[k];
            try {
                const std::uint64_t trial_seed = base_seed + static_cast<std::uint64_t>(job.trial);
                const std::uint64_t salt =
                    detail::fnv1a(sources[job.cond].first + "/" + mode_label(profile.mode));
                SimScene scene = sources[job.cond].second(trial_seed);
                counts[job.cond][job.trial] =
                    run_trial(scene, profile, Rng::mix(trial_seed, salt), params).count;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int nthreads = std::max(1, threads);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<StudyReport> reports;
    for (std::size_t c = 0; c < sources.size(); ++c) {
        StudyReport r;
        r.condition = sources[c].first;
        r.mode = mode_label(profile.mode);
        r.n = n_trials;
        double sum = 0.0;
        for (int t = 0; t < n_trials; ++t) {
            r.trials.push_back({base_seed + static_cast<std::uint64_t>(t), counts[c][t]});
            sum += counts[c][t];
        }
        r.mean = sum / n_trials;
        double ss = 0.0;
        for (int t = 0; t < n_trials; ++t)
            ss += (counts[c][t] - r.mean) * (counts[c][t] - r.mean);
        r.stddev = std::sqrt(ss / n_trials);
        reports.push_back(std::move(r));
    }

    // Effect size against condition "A" when present (A itself reads 0).
    const auto ref = std::find_if(reports.begin(), reports.end(),
                                  [](const StudyReport& r) { return r.condition == "A"; });
    if (ref != reports.end()) {
        for (StudyReport& r : reports) {
            try {
                r.cohens_d_vs_A = cohens_d(ref->mean, ref->stddev, r.mean, r.stddev);
            } catch (const ZeroVarianceError&) {
                r.cohens_d_vs_A = std::nullopt;
            }
        }
    }
    return reports;
}

/// The three study conditions for one checklist + tray: A loose,
/// B structured-but-shuffled, C the packed layout.
inline std::vector<std::pair<std::string, SceneSource>> standard_study_sources(
    const std::vector<InstrumentSpec>& catalog, const Checklist& checklist,
    const TraySpec& tray, const Padding& padding, const SimParams& params = {}) {
    const TrayLayout layout = pack(catalog, checklist, tray, padding);
    const CatalogIndex index(catalog);

    SceneSource a = [=](std::uint64_t seed) {
        SimScene sc = baseline_scene(checklist, catalog, tray, padding,
                                     BaselineKind::HumanLoose, seed, params);
        Rng r(Rng::mix(seed, 0xC047A01ull));
        sc.control = pick_control(sc, r);
        return sc;
    };
    SceneSource b = [=](std::uint64_t seed) {
        SimScene sc = baseline_scene(checklist, catalog, tray, padding,
                                     BaselineKind::NoAlgorithm, seed, params);
        Rng r(Rng::mix(seed, 0xC047B02ull));
        sc.control = pick_control(sc, r);
        return sc;
    };
    SceneSource c = [=](std::uint64_t seed) {
        SimScene sc = detail::build_scene(layout, index, -1, params);
        Rng r(Rng::mix(seed, 0xC047C03ull));
        sc.control = pick_control(sc, r);
        return sc;
    };
    return {{"A", a}, {"B", b}, {"C", c}};
}

/// Same three conditions, but anchored on an existing layout file: C is the
/// layout as loaded, A and B are rebuilt from the checklist it implies.
inline std::vector<std::pair<std::string, SceneSource>> layout_study_sources(
    const TrayLayout& layout, const std::vector<InstrumentSpec>& instruments,
    const SimParams& params = {}) {
    const CatalogIndex index(instruments);
    validate_layout(layout, index);

    Checklist checklist;
    std::map<std::string, int> qty;
    for (const Placement& p : layout.placements) {
        if (qty.count(p.id) == 0) checklist.items.push_back({p.id, 0});
        ++qty[p.id];
    }
    for (ChecklistItem& item : checklist.items) item.qty = qty[item.id];

    const TraySpec tray = layout.tray;
    const Padding padding = layout.padding;
    SceneSource a = [=](std::uint64_t seed) {
        SimScene sc = baseline_scene(checklist, instruments, tray, padding,
                                     BaselineKind::HumanLoose, seed, params);
        Rng r(Rng::mix(seed, 0xC047A01ull));
        sc.control = pick_control(sc, r);
        return sc;
    };
    SceneSource b = [=](std::uint64_t seed) {
        SimScene sc = baseline_scene(checklist, instruments, tray, padding,
                                     BaselineKind::NoAlgorithm, seed, params);
        Rng r(Rng::mix(seed, 0xC047B02ull));
        sc.control = pick_control(sc, r);
        return sc;
    };
    SceneSource c = [=](std::uint64_t seed) {
        SimScene sc = detail::build_scene(layout, index, -1, params);
        Rng r(Rng::mix(seed, 0xC047C03ull));
        sc.control = pick_control(sc, r);
        return sc;
    };
    return {{"A", a}, {"B", b}, {"C", c}};
}

inline json study_to_json(const std::vector<StudyReport>& reports) {
    json arr = json::array();
    for (const StudyReport& r : reports) {
        json rec;
        rec["condition"] = r.condition;
        rec["mode"] = r.mode;
        rec["n"] = r.n;
        rec["mean"] = round6(r.mean);
        rec["std"] = round6(r.stddev);
        rec["cohens_d_vs_A"] = r.cohens_d_vs_A ? json(round6(*r.cohens_d_vs_A)) : json(nullptr);
        json trials = json::array();
        for (const TrialSummary& t : r.trials)
            trials.push_back(json{{"seed", t.seed}, {"count", t.count}});
        rec["trials"] = std::move(trials);
        arr.push_back(std::move(rec));
    }
    return arr;
}

} // namespace trayforge
