// Acceptance gate: one line per criterion, nonzero exit if any fail.
// Built as a plain binary (no test framework) so the output reads as a
// checklist; each criterion also carries a wall-clock budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trayforge/catalog.hpp"
#include "trayforge/packer.hpp"
#include "trayforge/pose.hpp"
#include "trayforge/rng.hpp"
#include "trayforge/sequencer.hpp"
#include "trayforge/simkit.hpp"

namespace tf = trayforge;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> g_notes;

void expect(bool ok, const std::string& msg) {
    if (!ok) g_notes.push_back(msg);
}

tf::InstrumentSpec make_spec(std::string id, tf::InstrumentGroup g, double l, double w,
                             double h) {
    tf::InstrumentSpec s;
    s.id = std::move(id);
    s.group = g;
    s.length_mm = l;
    s.width_mm = w;
    s.height_mm = h;
    return s;
}

struct PackFixture {
    std::string name;
    std::vector<tf::InstrumentSpec> catalog;
    tf::Checklist checklist;
    tf::TraySpec tray;
    tf::Padding padding;
};

tf::TraySpec make_tray(double l, double w, double d, double div = 20.0) {
    tf::TraySpec t;
    t.length_mm = l;
    t.width_mm = w;
    t.depth_mm = d;
    t.divider_thickness_mm = div;
    return t;
}

// The mixed-group checklist used by the study and CLI criteria. Every group
// keeps equal in-group slot geometry except the scissors, whose three lengths
// all exceed half the tray width so columns stay one instrument per layer.
PackFixture study_fixture() {
    PackFixture f;
    f.name = "study";
    f.catalog = {
        make_spec("hemostat", tf::InstrumentGroup::ring(), 140, 12, 8),
        make_spec("heavy_hemostat", tf::InstrumentGroup::ring_thick(), 150, 14, 11),
        make_spec("needle_driver", tf::InstrumentGroup::needle(), 150, 13, 9),
        make_spec("thumb_forceps", tf::InstrumentGroup::thumb(), 130, 10, 6),
        make_spec("ligator", tf::InstrumentGroup::gun(), 170, 40, 22),
        make_spec("scissors_l", tf::InstrumentGroup::other("scissors"), 170, 26, 10),
        make_spec("scissors_m", tf::InstrumentGroup::other("scissors"), 165, 18, 10),
        make_spec("scissors_s", tf::InstrumentGroup::other("scissors"), 160, 12, 10),
    };
    f.checklist.procedure_name = "mixed laparotomy add-on";
    f.checklist.items = {{"hemostat", 4},      {"heavy_hemostat", 2}, {"needle_driver", 6},
                         {"thumb_forceps", 6}, {"ligator", 1},        {"scissors_l", 3},
                         {"scissors_m", 3},    {"scissors_s", 2}};
    f.tray = make_tray(600, 320, 60);
    f.padding = {4, 4, 4};
    return f;
}

int checklist_instances(const tf::Checklist& c) {
    int n = 0;
    for (const tf::ChecklistItem& item : c.items) n += item.qty;
    return n;
}

// ---------------------------------------------------------------------------
// Criterion 1: a bank of packing fixtures upholds every layout invariant, and
// an impossible width raises the dedicated overflow error.

void check_packed_layout(const PackFixture& f) {
    const tf::CatalogIndex index(f.catalog);
    tf::PackStats stats;
    const tf::TrayLayout lay =
        tf::pack(f.catalog, f.checklist, f.tray, f.padding, tf::MergePolicy::defaults(), &stats);

    try {
        tf::validate_layout(lay, index);
    } catch (const std::exception& e) {
        expect(false, f.name + ": validate_layout rejected the packed tray: " + e.what());
        return;
    }

    std::map<std::string, std::set<int>> seen;
    for (const tf::Placement& p : lay.placements) {
        if (!seen[p.id].insert(p.instance).second)
            expect(false, f.name + ": duplicate instance " + p.id);
        const tf::InstrumentSpec& s = index.at(p.id);
        if (s.group.is_ring_type()) {
            expect(p.layer == 0, f.name + ": ring instrument stacked above the holder rail");
            bool held = false;
            for (const tf::Holder& h : lay.holders) held |= h.column == p.column;
            expect(held, f.name + ": ring column " + std::to_string(p.column) + " has no holder");
        }
        expect(p.z_mm <= f.tray.depth_mm + 1e-9, f.name + ": instrument pokes above the rim");
    }
    for (const tf::ChecklistItem& item : f.checklist.items) {
        const int got = seen.count(item.id) ? static_cast<int>(seen[item.id].size()) : 0;
        expect(got == item.qty, f.name + ": " + item.id + " placed " + std::to_string(got) +
                                    " of " + std::to_string(item.qty));
    }
    expect(stats.steps >= static_cast<long long>(lay.placements.size()),
           f.name + ": step counter below placement count");

    const tf::TrayLayout again =
        tf::pack(f.catalog, f.checklist, f.tray, f.padding, tf::MergePolicy::defaults());
    expect(tf::layout_to_json(lay, f.catalog).dump() == tf::layout_to_json(again, f.catalog).dump(),
           f.name + ": repacking the same inputs changed the layout");
}

void criterion_packing_fixtures() {
    std::vector<PackFixture> fixtures;

    {
        PackFixture f;
        f.name = "single scalpel";
        f.catalog = {make_spec("scalpel", tf::InstrumentGroup::other("scalpel"), 100, 10, 5)};
        f.checklist.items = {{"scalpel", 1}};
        f.tray = make_tray(400, 300, 80);
        f.padding = {5, 5, 5};
        fixtures.push_back(f);
    }
    {
        PackFixture f;
        f.name = "five-high stack";
        f.catalog = {make_spec("scalpel", tf::InstrumentGroup::other("scalpel"), 100, 10, 5)};
        f.checklist.items = {{"scalpel", 5}};
        f.tray = make_tray(400, 300, 80);
        f.padding = {5, 5, 5};
        fixtures.push_back(f);
    }
    {
        PackFixture f;
        f.name = "ring rails";
        f.catalog = {make_spec("hemostat", tf::InstrumentGroup::ring(), 120, 15, 8)};
        f.checklist.items = {{"hemostat", 6}};
        f.tray = make_tray(400, 400, 80);
        f.padding = {5, 5, 5};
        fixtures.push_back(f);
    }
    {
        PackFixture f;
        f.name = "ring merge";
        f.catalog = {make_spec("clamp", tf::InstrumentGroup::ring(), 100, 12, 8),
                     make_spec("heavy_clamp", tf::InstrumentGroup::ring_thick(), 100, 14, 10)};
        f.checklist.items = {{"clamp", 1}, {"heavy_clamp", 1}};
        f.tray = make_tray(100, 320, 60);
        f.padding = {4, 4, 4};
        fixtures.push_back(f);
    }
    {
        PackFixture f;
        f.name = "full merge";
        f.catalog = {make_spec("needle_driver", tf::InstrumentGroup::needle(), 100, 30, 5),
                     make_spec("thumb_forceps", tf::InstrumentGroup::thumb(), 100, 30, 5),
                     make_spec("ligator", tf::InstrumentGroup::gun(), 100, 30, 5)};
        f.checklist.items = {{"needle_driver", 1}, {"thumb_forceps", 1}, {"ligator", 1}};
        f.tray = make_tray(46, 320, 60);
        f.padding = {4, 4, 4};
        fixtures.push_back(f);
    }
    fixtures.push_back(study_fixture());

    const std::vector<tf::InstrumentGroup> palette = {
        tf::InstrumentGroup::ring(),          tf::InstrumentGroup::ring_thick(),
        tf::InstrumentGroup::needle(),        tf::InstrumentGroup::thumb(),
        tf::InstrumentGroup::gun(),           tf::InstrumentGroup::other("retractor"),
        tf::InstrumentGroup::other("elevator"), tf::InstrumentGroup::other("rongeur")};
    tf::Rng rng(20260818);
    for (int k = 0; k < 18; ++k) {
        PackFixture f;
        f.name = "generated " + std::to_string(k);
        const int kinds = 1 + static_cast<int>(rng.next_u64() % 4);
        std::vector<int> picks;
        for (int i = 0; i < kinds; ++i) {
            int g;
            do {
                g = static_cast<int>(rng.next_u64() % palette.size());
            } while (std::find(picks.begin(), picks.end(), g) != picks.end());
            picks.push_back(g);
            const double w = 10.0 + 30.0 * rng.next_double();
            const double l = 60.0 + 180.0 * rng.next_double();
            const double h = 4.0 + 20.0 * rng.next_double();
            const std::string id = "inst" + std::to_string(k) + "_" + std::to_string(i);
            f.catalog.push_back(make_spec(id, palette[g], l, w, h));
            f.checklist.items.push_back({id, 1 + static_cast<int>(rng.next_u64() % 3)});
        }
        f.tray = make_tray(2200, 260.0 + 160.0 * rng.next_double(),
                           60.0 + 20.0 * rng.next_double());
        const double px = 6.0 * rng.next_double();
        f.padding = {px, 6.0 * rng.next_double(), 6.0 * rng.next_double()};
        fixtures.push_back(f);
    }

    expect(fixtures.size() == 24, "fixture bank should hold 24 packable trays");
    for (const PackFixture& f : fixtures) check_packed_layout(f);

    // 25th fixture: a blade longer than the tray is wide must refuse to pack.
    bool width_raised = false;
    try {
        const std::vector<tf::InstrumentSpec> cat = {
            make_spec("long_blade", tf::InstrumentGroup::other("blade"), 300, 10, 5)};
        tf::Checklist chk;
        chk.items = {{"long_blade", 1}};
        tf::pack(cat, chk, make_tray(400, 200, 80), {0, 0, 0});
    } catch (const tf::WidthOverflowError& e) {
        width_raised = std::string(e.what()).size() > 0;
    } catch (const std::exception& e) {
        expect(false, std::string("width overflow raised the wrong error: ") + e.what());
    }
    expect(width_raised, "oversized instrument did not raise the width overflow error");
}

// ---------------------------------------------------------------------------
// Criterion 2: packing effort (step counter) grows linearly with the number of
// requested instruments.

void criterion_linear_steps() {
    const std::vector<tf::InstrumentSpec> cat = {
        make_spec("probe", tf::InstrumentGroup::other("probe"), 100, 10, 5)};
    const tf::TraySpec tray = make_tray(3000, 1020, 50);
    const tf::Padding pad = {0, 0, 0};

    const std::vector<int> sizes = {100, 1000, 10000};
    std::vector<double> xs, ys;
    for (int n : sizes) {
        tf::Checklist chk;
        chk.items = {{"probe", n}};
        tf::PackStats stats;
        const tf::TrayLayout lay = tf::pack(cat, chk, tray, pad, tf::MergePolicy::defaults(), &stats);
        expect(static_cast<int>(lay.placements.size()) == n,
               "expected " + std::to_string(n) + " placements");
        xs.push_back(static_cast<double>(n));
        ys.push_back(static_cast<double>(stats.steps));
    }
    expect(ys[0] < ys[1] && ys[1] < ys[2], "step counter is not increasing with size");

    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double fit = slope * xs[i] + intercept;
        ss_res += (ys[i] - fit) * (ys[i] - fit);
        ss_tot += (ys[i] - sy / n) * (ys[i] - sy / n);
    }
    const double r2 = 1.0 - ss_res / ss_tot;
    std::ostringstream msg;
    msg << "steps vs size fit r^2 = " << r2 << " (need >= 0.99)";
    expect(r2 >= 0.99, msg.str());
}

// ---------------------------------------------------------------------------
// Criterion 3: the pooled effect size reproduces two hand-computed references.

void criterion_effect_size() {
    const double d1 = tf::cohens_d(11.4, 5.004, 4.0, 1.096);
    const double d2 = tf::cohens_d(7.8, 3.763, 1.8, 0.4);
    std::ostringstream m1, m2;
    m1 << "cohens_d(11.4, 5.004, 4.0, 1.096) = " << d1 << " (want 2.04 +/- 0.01)";
    m2 << "cohens_d(7.8, 3.763, 1.8, 0.4) = " << d2 << " (want 2.24 +/- 0.01)";
    expect(std::fabs(d1 - 2.04) <= 0.01, m1.str());
    expect(std::fabs(d2 - 2.24) <= 0.01, m2.str());
}

// ---------------------------------------------------------------------------
// Criterion 4: across 100 seeded trials per condition, in both excitation
// modes, the ordinal contact counts separate the three loading conditions and
// never cross a divider in the column-confined layouts.

void criterion_study_separation() {
    const PackFixture f = study_fixture();
    const tf::TrayLayout lay = tf::pack(f.catalog, f.checklist, f.tray, f.padding);
    const auto sources = tf::layout_study_sources(lay, f.catalog);
    expect(sources.size() == 3 && sources[0].first == "A" && sources[2].first == "C",
           "study sources should run conditions A, B, C");

    const int trials = 100;
    const std::uint64_t base_seed = 2026;

    for (const tf::ExcitationProfile& profile :
         {tf::ExcitationProfile::displacement(), tf::ExcitationProfile::tilt()}) {
        const std::string mode = tf::mode_label(profile.mode);
        const auto reports = tf::run_study(sources, profile, trials, base_seed, 4);

        std::map<std::string, const tf::StudyReport*> by_name;
        for (const tf::StudyReport& r : reports) by_name[r.condition] = &r;
        const tf::StudyReport& ra = *by_name.at("A");
        const tf::StudyReport& rb = *by_name.at("B");
        const tf::StudyReport& rc = *by_name.at("C");

        std::ostringstream order;
        order << mode << ": mean contacts not ordered C < B < A (C=" << rc.mean
              << " B=" << rb.mean << " A=" << ra.mean << ")";
        expect(rc.mean < rb.mean && rb.mean < ra.mean, order.str());

        expect(rc.cohens_d_vs_A.has_value(), mode + ": effect size A vs C was suppressed");
        if (rc.cohens_d_vs_A) {
            std::ostringstream dm;
            dm << mode << ": effect size A vs C = " << *rc.cohens_d_vs_A << " (need > 0.8)";
            expect(*rc.cohens_d_vs_A > 0.8, dm.str());
        }

        // Replay conditions B and C trial by trial (same seed derivation as the
        // study runner) to show no contact ever crosses a divider.
        for (std::size_t ci = 1; ci < sources.size(); ++ci) {
            const std::string& name = sources[ci].first;
            const std::uint64_t salt = tf::detail::fnv1a(name + "/" + mode);
            const tf::StudyReport& recorded = *by_name.at(name);
            for (int t = 0; t < trials; ++t) {
                const std::uint64_t trial_seed = base_seed + static_cast<std::uint64_t>(t);
                const tf::SimScene scene = sources[ci].second(trial_seed);
                const tf::TrialReport rep =
                    tf::run_trial(scene, profile, tf::Rng::mix(trial_seed, salt));
                if (rep.count != recorded.trials[t].count) {
                    expect(false, mode + "/" + name + ": replayed trial " + std::to_string(t) +
                                      " disagrees with the study runner");
                    break;
                }
                const int home = scene.bodies[scene.control].column;
                if (home < 0) {
                    expect(false, mode + "/" + name + ": control body lost its column");
                    break;
                }
                bool crossed = false;
                for (int j : rep.contacts) crossed |= scene.bodies[j].column != home;
                if (crossed) {
                    expect(false, mode + "/" + name + ": trial " + std::to_string(t) +
                                      " recorded a cross-divider contact");
                    break;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 5: a 36-angle rotated-rectangle sweep recovers the planted
// rotation within one degree; a disk reports as degenerate; whole-pixel
// translation leaves the estimate bitwise unchanged.

constexpr double kPi = 3.14159265358979323846;

std::vector<tf::Vec2> rect_contour(double cx, double cy, double a, double b, double theta_deg) {
    const double c = std::cos(theta_deg * kPi / 180.0);
    const double s = std::sin(theta_deg * kPi / 180.0);
    return {
        {cx + a * c - b * s, cy + a * s + b * c},
        {cx - a * c - b * s, cy - a * s + b * c},
        {cx - a * c + b * s, cy - a * s - b * c},
        {cx + a * c + b * s, cy + a * s - b * c},
    };
}

double angle_distance(double a, double b) {
    double d = std::fabs(a - b);
    d = std::fmod(d, 180.0);
    return std::min(d, 180.0 - d);
}

void criterion_pose_sweep() {
    for (int k = 0; k < 36; ++k) {
        const double theta = 5.0 + k * (170.0 / 35.0);
        const tf::Mask m = tf::mask_from_contour(rect_contour(150, 150, 120, 12, theta), 1.0);
        const tf::PoseEstimate est = tf::principal_axes(m);
        std::ostringstream msg;
        msg << "rect at " << theta << " deg: ";
        expect(!est.degenerate, msg.str() + "unexpectedly degenerate");
        const double err = angle_distance(est.rz_deg, theta);
        std::ostringstream em;
        em << msg.str() << "recovered " << est.rz_deg << " (error " << err << " deg)";
        expect(err <= 1.0, em.str());
        expect(std::fabs(est.elongation - 10.0) <= 0.8,
               msg.str() + "elongation drifted from 10");
    }

    std::vector<tf::Vec2> disk;
    for (int i = 0; i < 72; ++i) {
        const double phi = 2.0 * kPi * i / 72;
        disk.push_back({32.0 + 15.0 * std::cos(phi), 32.0 + 15.0 * std::sin(phi)});
    }
    expect(tf::principal_axes(tf::mask_from_contour(disk, 1.0)).degenerate,
           "disk should report a degenerate pose");

    const auto base_poly = rect_contour(150, 150, 120, 12, 61.0);
    auto moved_poly = base_poly;
    for (tf::Vec2& p : moved_poly) {
        p.x += 31.0;
        p.y += 17.0;
    }
    const tf::PoseEstimate base = tf::principal_axes(tf::mask_from_contour(base_poly, 1.0));
    const tf::PoseEstimate moved = tf::principal_axes(tf::mask_from_contour(moved_poly, 1.0));
    expect(moved.rz_deg == base.rz_deg, "whole-pixel translation changed the angle");
    expect(moved.elongation == base.elongation, "whole-pixel translation changed the elongation");
    expect(std::fabs((moved.cx_px - base.cx_px) - 31.0) <= 1e-9 &&
               std::fabs((moved.cy_px - base.cy_px) - 17.0) <= 1e-9,
           "centroid did not follow the translation");
}

// ---------------------------------------------------------------------------
// Criterion 6: every detection order of a six-instrument checklist completes
// the assembly plan with the stage drained and placements in plan order; junk
// detections are discarded, one each.

void criterion_sequencing_permutations() {
    const std::vector<tf::InstrumentSpec> cat = {
        make_spec("scalpel", tf::InstrumentGroup::other("scalpel"), 150, 14, 6),
        make_spec("forceps", tf::InstrumentGroup::other("forceps"), 145, 13, 6),
        make_spec("probe", tf::InstrumentGroup::other("probe"), 140, 12, 6),
        make_spec("hook", tf::InstrumentGroup::other("hook"), 135, 11, 6),
        make_spec("spreader", tf::InstrumentGroup::other("spreader"), 130, 10, 6),
        make_spec("curette", tf::InstrumentGroup::other("curette"), 125, 9, 6),
    };
    tf::Checklist chk;
    for (const tf::InstrumentSpec& s : cat) chk.items.push_back({s.id, 1});
    const tf::TrayLayout lay = tf::pack(cat, chk, make_tray(600, 300, 40), {2, 2, 2});

    std::vector<tf::InstanceRef> plan;
    for (const tf::PlanStep& s : tf::placement_order(lay))
        if (s.kind == tf::StepKind::PlaceInstrument) plan.push_back(s.ref);
    expect(plan.size() == 6, "plan should contain six instrument placements");

    std::vector<std::string> order;
    for (const tf::InstrumentSpec& s : cat) order.push_back(s.id);
    std::sort(order.begin(), order.end());

    int permutations = 0;
    do {
        ++permutations;
        tf::Sequencer seq(lay);
        std::vector<tf::Action> all = seq.take_pending();
        for (const std::string& id : order) {
            const std::vector<tf::Action> acts = seq.on_detected(id);
            all.insert(all.end(), acts.begin(), acts.end());
        }
        if (!seq.complete() || !seq.remaining().empty()) {
            expect(false, "a detection order left the plan unfinished");
            break;
        }
        std::vector<tf::InstanceRef> placed;
        int discards = 0, done = 0, stages = 0, unstaged = 0;
        for (const tf::Action& a : all) {
            if (a.kind == tf::ActionKind::Place) {
                placed.push_back({a.id, a.instance});
                --unstaged;
            }
            if (a.kind == tf::ActionKind::Stage) {
                ++stages;
                ++unstaged;
            }
            if (a.kind == tf::ActionKind::Discard) ++discards;
            if (a.kind == tf::ActionKind::Done) ++done;
        }
        (void)stages;
        if (placed.size() != plan.size() ||
            !std::equal(plan.begin(), plan.end(), placed.begin())) {
            expect(false, "a detection order placed instruments out of plan order");
            break;
        }
        if (discards != 0 || done != 1) {
            expect(false, "a clean detection order produced discards or a missing done");
            break;
        }
    } while (std::next_permutation(order.begin(), order.end()));
    expect(permutations == 720, "expected all 720 detection orders");

    tf::Sequencer seq(lay);
    std::vector<tf::Action> all = seq.take_pending();
    std::vector<std::string> noisy;
    for (const tf::InstanceRef& r : plan) noisy.push_back(r.id);
    noisy.insert(noisy.begin(), "ghost_shears");
    noisy.insert(noisy.begin() + 3, "ghost_clip");
    noisy.insert(noisy.end() - 1, "ghost_rasp");
    for (const std::string& id : noisy) {
        const std::vector<tf::Action> acts = seq.on_detected(id);
        all.insert(all.end(), acts.begin(), acts.end());
    }
    int discards = 0;
    for (const tf::Action& a : all)
        if (a.kind == tf::ActionKind::Discard) ++discards;
    expect(discards == 3, "three junk detections should yield exactly three discards");
    expect(seq.complete(), "junk detections must not stall the plan");
}

// ---------------------------------------------------------------------------
// Criterion 7: the CLI produces byte-identical outputs across repeated runs
// and across worker thread counts.

bool read_file(const fs::path& p, std::string& out) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    out = ss.str();
    return true;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TRAYFORGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

void criterion_cli_stability() {
    const PackFixture f = study_fixture();
    const fs::path dir =
        fs::temp_directory_path() /
        ("trayforge-accept-" +
         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);

    {
        std::ofstream(dir / "catalog.json") << tf::catalog_to_json(f.catalog).dump(2) << "\n";
        tf::json chk;
        chk["procedure"] = f.checklist.procedure_name;
        chk["items"] = tf::json::array();
        for (const tf::ChecklistItem& item : f.checklist.items)
            chk["items"].push_back({{"id", item.id}, {"qty", item.qty}});
        std::ofstream(dir / "checklist.json") << chk.dump(2) << "\n";
        tf::json tray = {{"length_mm", f.tray.length_mm},
                         {"width_mm", f.tray.width_mm},
                         {"depth_mm", f.tray.depth_mm},
                         {"divider_thickness_mm", f.tray.divider_thickness_mm}};
        std::ofstream(dir / "tray.json") << tray.dump(2) << "\n";
        tf::json pad = {{"px_mm", f.padding.px_mm},
                        {"py_mm", f.padding.py_mm},
                        {"pz_mm", f.padding.pz_mm}};
        std::ofstream(dir / "padding.json") << pad.dump(2) << "\n";
    }

    const std::string inputs = "--catalog " + (dir / "catalog.json").string() + " --checklist " +
                               (dir / "checklist.json").string() + " --tray " +
                               (dir / "tray.json").string() + " --padding " +
                               (dir / "padding.json").string();

    expect(run_cli("pack " + inputs + " --out " + (dir / "layout_a.json").string()) == 0,
           "pack run 1 failed");
    expect(run_cli("pack " + inputs + " --out " + (dir / "layout_b.json").string()) == 0,
           "pack run 2 failed");

    const std::string sim = "simulate --layout " + (dir / "layout_a.json").string() +
                            " --trials 5 --seed 7 --mode displacement";
    expect(run_cli(sim + " --threads 1 --out " + (dir / "study_1.json").string()) == 0,
           "simulate run 1 failed");
    expect(run_cli(sim + " --threads 1 --out " + (dir / "study_2.json").string()) == 0,
           "simulate run 2 failed");
    expect(run_cli(sim + " --threads 2 --out " + (dir / "study_3.json").string()) == 0,
           "simulate run with two threads failed");

    std::string la, lb, s1, s2, s3;
    expect(read_file(dir / "layout_a.json", la) && read_file(dir / "layout_b.json", lb),
           "pack outputs missing");
    expect(read_file(dir / "study_1.json", s1) && read_file(dir / "study_2.json", s2) &&
               read_file(dir / "study_3.json", s3),
           "simulate outputs missing");
    expect(!la.empty() && la == lb, "pack output differs between identical runs");
    expect(!s1.empty() && s1 == s2, "simulate output differs between identical runs");
    expect(s1 == s3, "simulate output differs across thread counts");

    std::error_code ec;
    fs::remove_all(dir, ec);
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        double limit_s;
        std::function<void()> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "packing fixtures uphold every layout invariant", 1.0, criterion_packing_fixtures},
        {2, "packing effort grows linearly with checklist size", 10.0, criterion_linear_steps},
        {3, "effect size matches hand-computed references", 1.0, criterion_effect_size},
        {4, "study separates conditions in both excitation modes", 60.0,
         criterion_study_separation},
        {5, "pose sweep recovers rotation within one degree", 5.0, criterion_pose_sweep},
        {6, "every detection order completes the assembly plan", 5.0,
         criterion_sequencing_permutations},
        {7, "CLI output is byte-stable across runs and threads", 10.0, criterion_cli_stability},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        g_notes.clear();
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body();
        } catch (const std::exception& e) {
            g_notes.push_back(std::string("exception: ") + e.what());
        }
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (dt > c.limit_s) {
            std::ostringstream ss;
            ss << "took " << dt << "s, budget " << c.limit_s << "s";
            g_notes.push_back(ss.str());
        }
        if (g_notes.empty()) {
            std::printf("[PASS] criterion %d: %s (%.2fs)\n", c.id, c.title, dt);
        } else {
            ++failures;
            std::printf("[FAIL] criterion %d: %s (%.2fs)\n", c.id, c.title, dt);
            for (const std::string& note : g_notes) std::printf("       - %s\n", note.c_str());
        }
    }
    return failures == 0 ? 0 : 1;
}
