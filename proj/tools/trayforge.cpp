#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trayforge/catalog.hpp"
#include "trayforge/packer.hpp"
#include "trayforge/pose.hpp"
#include "trayforge/sequencer.hpp"
#include "trayforge/simkit.hpp"
#include "trayforge/svg.hpp"

namespace tf = trayforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitWidth = 2;
constexpr int kExitLength = 3;
constexpr int kExitLayout = 4;
constexpr int kExitMask = 5;
constexpr int kExitCalibration = 6;
constexpr int kExitIncomplete = 7;
constexpr int kExitUsage = 64;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw tf::ParseError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw tf::ParseError("failed writing " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct PackOpts {
    std::string catalog, checklist, tray, padding, out, svg;
};

struct SimOpts {
    std::string layout, baseline, catalog, checklist, tray, padding, out;
    std::string mode = "displacement";
    int trials = 5;
    int threads = 1;
    std::optional<std::uint64_t> seed;
};

struct PoseOpts {
    std::string mask, calib;
    double px_per_mm = 1.0;
};

struct ReplayOpts {
    std::string layout, events, out;
    int capacity = -1; // unlimited
};

int cmd_pack(const PackOpts& o) {
    const std::vector<tf::InstrumentSpec> catalog = tf::load_catalog(o.catalog);
    const tf::Checklist checklist = tf::load_checklist(o.checklist);
    const tf::TraySpec tray = tf::load_tray(o.tray);
    tf::Padding padding;
    if (!o.padding.empty()) padding = tf::load_padding(o.padding);

    tf::PackStats stats;
    const tf::TrayLayout layout =
        tf::pack(catalog, checklist, tray, padding, tf::MergePolicy::defaults(), &stats);
    write_text(o.out, tf::layout_to_json(layout, catalog).dump(2) + "\n");
    if (!o.svg.empty()) tf::save_svg(layout, tf::CatalogIndex(catalog), o.svg);
    std::cerr << "packed " << layout.placements.size() << " instruments into "
              << layout.columns.size() << " columns (merge level " << layout.merge_level
              << ", " << stats.steps << " steps)\n";
    return kExitOk;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("TRAYFORGE_SEED")) {
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(env, &pos);
            if (pos == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw CLI::ValidationError("TRAYFORGE_SEED must be an unsigned integer");
    }
    return 42;
}

void print_study_table(const std::vector<tf::StudyReport>& reports) {
    std::cout << "condition  mode          trials  mean collision (std.)\n";
    for (const tf::StudyReport& r : reports) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(2) << r.mean << " (" << r.stddev << ")";
        std::cout << std::left << std::setw(11) << r.condition << std::setw(14) << r.mode
                  << std::right << std::setw(6) << r.n << "  " << cell.str() << "\n";
    }
}

int cmd_simulate(const SimOpts& o) {
    const std::uint64_t seed = resolve_seed(o.seed);
    const tf::ExcitationProfile profile = o.mode == "tilt"
                                              ? tf::ExcitationProfile::tilt()
                                              : tf::ExcitationProfile::displacement();
    const tf::SimParams params;

    std::vector<std::pair<std::string, tf::SceneSource>> sources;
    if (!o.layout.empty()) {
        const tf::LoadedLayout loaded = tf::load_layout(o.layout);
        sources = tf::layout_study_sources(loaded.layout, loaded.instruments, params);
    } else {
        const std::vector<tf::InstrumentSpec> catalog = tf::load_catalog(o.catalog);
        const tf::Checklist checklist = tf::load_checklist(o.checklist);
        const tf::TraySpec tray = tf::load_tray(o.tray);
        tf::Padding padding;
        if (!o.padding.empty()) padding = tf::load_padding(o.padding);
        const bool loose = o.baseline == "a";
        const std::string name = loose ? "A" : "B";
        const tf::BaselineKind kind =
            loose ? tf::BaselineKind::HumanLoose : tf::BaselineKind::NoAlgorithm;
        const std::uint64_t ctl_salt = loose ? 0xC047A01ull : 0xC047B02ull;
        sources.push_back({name, [=](std::uint64_t s) {
                               tf::SimScene sc = tf::baseline_scene(checklist, catalog, tray,
                                                                    padding, kind, s, params);
                               tf::Rng r(tf::Rng::mix(s, ctl_salt));
                               sc.control = tf::pick_control(sc, r);
                               return sc;
                           }});
    }

    const std::vector<tf::StudyReport> reports =
        tf::run_study(sources, profile, o.trials, seed, o.threads, params);
    write_text(o.out, tf::study_to_json(reports).dump(2) + "\n");
    print_study_table(reports);
    for (const tf::StudyReport& r : reports) {
        if (!r.cohens_d_vs_A && r.condition != "A" &&
            std::any_of(reports.begin(), reports.end(),
                        [](const tf::StudyReport& x) { return x.condition == "A"; }))
            std::cerr << "warning: Cohen's d vs A undefined for condition " << r.condition
                      << " (zero variance; try more trials)\n";
    }
    if (o.trials == 1)
        std::cerr << "warning: single trial — std is 0 and Cohen's d is suppressed\n";
    return kExitOk;
}

int cmd_pose(const PoseOpts& o) {
    tf::Mask mask;
    if (ends_with(o.mask, ".csv"))
        mask = tf::mask_from_contour(tf::load_contour_csv(o.mask), o.px_per_mm);
    else
        mask = tf::load_mask_pgm(o.mask);

    const tf::PoseEstimate est = tf::principal_axes(mask);
    std::optional<tf::WorldPose> world;
    if (!o.calib.empty()) {
        const tf::Calibration cal = tf::load_calibration(o.calib);
        if (cal.suspect())
            std::cerr << "warning: calibration reprojection error "
                      << cal.reprojection_error_px << " px exceeds "
                      << tf::kReprojectionWarnPx << " px\n";
        world = tf::to_world(est, cal);
    }
    std::cout << tf::pose_to_json(est, world).dump(2) << "\n";
    return kExitOk;
}

int cmd_replay(const ReplayOpts& o) {
    const tf::LoadedLayout loaded = tf::load_layout(o.layout);
    const tf::CatalogIndex index(loaded.instruments);
    tf::validate_layout(loaded.layout, index);

    std::ifstream in(o.events);
    if (!in) throw tf::ParseError("cannot open " + o.events);
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw tf::ParseError("cannot open " + o.out + " for writing");

    const std::optional<int> capacity =
        o.capacity < 0 ? std::nullopt : std::optional<int>(o.capacity);
    const tf::ReplayResult result = tf::replay(loaded.layout, in, out, capacity);
    if (!out) throw tf::ParseError("failed writing " + o.out);
    if (!result.complete) {
        std::map<std::string, int> missing;
        for (const tf::InstanceRef& ref : result.missing) ++missing[ref.id];
        std::cerr << "replay incomplete; missing:";
        for (const auto& [id, count] : missing) std::cerr << " " << id << " x" << count;
        std::cerr << "\n";
        return kExitIncomplete;
    }
    return kExitOk;
}

int run(int argc, char** argv) {
    CLI::App app{"trayforge — sterile-tray packing planner and verification toolkit"};
    app.require_subcommand(1);

    PackOpts pack_opts;
    CLI::App* pack = app.add_subcommand("pack", "Pack a checklist into a tray layout");
    pack->add_option("--catalog", pack_opts.catalog, "instrument catalog JSON")->required();
    pack->add_option("--checklist", pack_opts.checklist, "procedure checklist JSON")->required();
    pack->add_option("--tray", pack_opts.tray, "tray spec JSON")->required();
    pack->add_option("--padding", pack_opts.padding, "padding JSON (default: zero padding)");
    pack->add_option("--out", pack_opts.out, "layout JSON output path")->required();
    pack->add_option("--svg", pack_opts.svg, "optional SVG top-view output path");

    SimOpts sim_opts;
    CLI::App* sim = app.add_subcommand("simulate", "Run the transport collision study");
    CLI::Option* sim_layout =
        sim->add_option("--layout", sim_opts.layout, "layout JSON (runs conditions A, B, C)");
    CLI::Option* sim_baseline =
        sim->add_option("--baseline", sim_opts.baseline, "run a single baseline condition")
            ->check(CLI::IsMember({"a", "b"}));
    sim_layout->excludes(sim_baseline);
    sim->add_option("--catalog", sim_opts.catalog, "instrument catalog JSON (baseline runs)");
    sim->add_option("--checklist", sim_opts.checklist, "checklist JSON (baseline runs)");
    sim->add_option("--tray", sim_opts.tray, "tray spec JSON (baseline runs)");
    sim->add_option("--padding", sim_opts.padding, "padding JSON (baseline runs)");
    sim->add_option("--trials", sim_opts.trials, "trials per condition")
        ->check(CLI::PositiveNumber);
    sim->add_option("--mode", sim_opts.mode, "excitation mode")
        ->check(CLI::IsMember({"displacement", "tilt"}));
    sim->add_option("--seed", sim_opts.seed, "base seed (default: $TRAYFORGE_SEED or 42)");
    sim->add_option("--threads", sim_opts.threads, "worker threads")->check(CLI::PositiveNumber);
    sim->add_option("--out", sim_opts.out, "study report JSON output path")->required();

    PoseOpts pose_opts;
    CLI::App* pose = app.add_subcommand("pose", "Estimate instrument pose from a mask");
    pose->add_option("--mask", pose_opts.mask, "binary mask (PGM) or contour (CSV)")->required();
    pose->add_option("--calib", pose_opts.calib, "pixel-to-world calibration JSON");
    pose->add_option("--px-per-mm", pose_opts.px_per_mm, "rasterization scale for CSV contours");

    ReplayOpts replay_opts;
    CLI::App* rep = app.add_subcommand("replay", "Drive the hand-off sequencer from events");
    rep->add_option("--layout", replay_opts.layout, "layout JSON")->required();
    rep->add_option("--events", replay_opts.events, "detection events JSONL")->required();
    rep->add_option("--out", replay_opts.out, "action JSONL output path")->required();
    rep->add_option("--stage-capacity", replay_opts.capacity,
                    "staged-instrument limit (default: unlimited)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (pack->parsed()) return cmd_pack(pack_opts);
        if (sim->parsed()) {
            if (sim_opts.layout.empty() && sim_opts.baseline.empty()) {
                std::cerr << "simulate: pass --layout or --baseline\n";
                return kExitUsage;
            }
            if (!sim_opts.baseline.empty() &&
                (sim_opts.catalog.empty() || sim_opts.checklist.empty() ||
                 sim_opts.tray.empty())) {
                std::cerr << "simulate --baseline: needs --catalog, --checklist and --tray\n";
                return kExitUsage;
            }
            return cmd_simulate(sim_opts);
        }
        if (pose->parsed()) return cmd_pose(pose_opts);
        if (rep->parsed()) return cmd_replay(replay_opts);
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "trayforge: " << e.what() << "\n";
        return kExitUsage;
    } catch (const tf::WidthOverflowError& e) {
        std::cerr << "trayforge: width-overflow: " << e.what() << "\n";
        return kExitWidth;
    } catch (const tf::DepthOverflowError& e) {
        std::cerr << "trayforge: depth-overflow: " << e.what() << "\n";
        return kExitWidth;
    } catch (const tf::LengthOverflowError& e) {
        std::cerr << "trayforge: length-overflow: " << e.what() << "\n";
        return kExitLength;
    } catch (const tf::InvalidLayoutError& e) {
        std::cerr << "trayforge: invalid-layout: " << e.what() << "\n";
        return kExitLayout;
    } catch (const tf::PlacementSamplingExhaustedError& e) {
        std::cerr << "trayforge: scene-generation: " << e.what() << "\n";
        return kExitLayout;
    } catch (const tf::EmptyMaskError& e) {
        std::cerr << "trayforge: empty-mask: " << e.what() << "\n";
        return kExitMask;
    } catch (const tf::DegeneratePolygonError& e) {
        std::cerr << "trayforge: degenerate-contour: " << e.what() << "\n";
        return kExitMask;
    } catch (const tf::SingularCalibrationError& e) {
        std::cerr << "trayforge: calibration: " << e.what() << "\n";
        return kExitCalibration;
    } catch (const tf::AlreadyCompleteError& e) {
        std::cerr << "trayforge: sequencing: " << e.what() << "\n";
        return kExitIncomplete;
    } catch (const tf::StageFullError& e) {
        std::cerr << "trayforge: sequencing: " << e.what() << "\n";
        return kExitIncomplete;
    } catch (const tf::Error& e) {
        std::cerr << "trayforge: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "trayforge: " << e.what() << "\n";
        return kExitIo;
    }
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
