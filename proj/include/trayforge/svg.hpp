#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "trayforge/catalog.hpp"
#include "trayforge/packer.hpp"

namespace trayforge {

/// Fixed group palette so renders of the same layout diff cleanly.
inline std::string group_color(const InstrumentGroup& g) {
    switch (g.kind) {
        case GroupKind::Ring: return "#4363d8";
        case GroupKind::RingThick: return "#000075";
        case GroupKind::Needle: return "#e6194b";
        case GroupKind::Thumb: return "#f58231";
        case GroupKind::Gun: return "#911eb4";
        case GroupKind::Other: break;
    }
    static const char* palette[] = {"#3cb44b", "#ffe119", "#46f0f0", "#f032e6", "#bcf60c",
                                    "#fabebe", "#008080", "#e6beff", "#9a6324", "#800000"};
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : g.other_name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return palette[h % 10];
}

namespace detail {

inline std::string svg_num(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << round6(v);
    return os.str();
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace detail

/// Top view at 1 px per mm: tray outline, holder beds, dividers, instrument
/// footprints colored by group (upper layers drawn above lower ones).
inline std::string layout_to_svg(const TrayLayout& lay, const CatalogIndex& catalog) {
    using detail::svg_num;
    using detail::xml_escape;
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(lay.tray.width_mm)
        << "\" height=\"" << svg_num(lay.tray.length_mm) << "\" viewBox=\"0 0 "
        << svg_num(lay.tray.width_mm) << " " << svg_num(lay.tray.length_mm) << "\">\n";
    svg << "  <rect x=\"0\" y=\"0\" width=\"" << svg_num(lay.tray.width_mm) << "\" height=\""
        << svg_num(lay.tray.length_mm)
        << "\" fill=\"#f7f5ef\" stroke=\"#333333\" stroke-width=\"2\"/>\n";

    for (const Holder& h : lay.holders) {
        const ColumnInfo& col = lay.columns[h.column];
        svg << "  <rect x=\"1\" y=\"" << svg_num(col.y_start_mm) << "\" width=\""
            << svg_num(lay.tray.width_mm - 2.0) << "\" height=\"" << svg_num(col.width_mm)
            << "\" fill=\"#efe3c8\" stroke=\"#b09a6a\" stroke-width=\"0.5\"/>\n";
    }

    for (const Divider& d : lay.dividers) {
        svg << "  <rect x=\"0\" y=\""
            << svg_num(d.y_mm - 0.5 * lay.tray.divider_thickness_mm) << "\" width=\""
            << svg_num(lay.tray.width_mm) << "\" height=\""
            << svg_num(lay.tray.divider_thickness_mm)
            << "\" fill=\"#9a9a9a\" stroke=\"#555555\" stroke-width=\"0.5\"/>\n";
    }

    std::vector<const Placement*> ordered;
    for (const Placement& p : lay.placements) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(), [](const Placement* a, const Placement* b) {
        if (a->layer != b->layer) return a->layer < b->layer;
        if (a->column != b->column) return a->column < b->column;
        if (a->x_mm != b->x_mm) return a->x_mm < b->x_mm;
        return std::make_pair(a->id, a->instance) < std::make_pair(b->id, b->instance);
    });
    for (const Placement* p : ordered) {
        const InstrumentSpec& spec = catalog.at(p->id);
        const ColumnInfo& col = lay.columns[p->column];
        const double x = p->x_mm - 0.5 * spec.length_mm;
        const double y = col.y_start_mm + 0.5 * (col.width_mm - spec.width_mm);
        svg << "  <rect x=\"" << svg_num(x) << "\" y=\"" << svg_num(y) << "\" width=\""
            << svg_num(spec.length_mm) << "\" height=\"" << svg_num(spec.width_mm)
            << "\" rx=\"2\" fill=\"" << group_color(spec.group)
            << "\" fill-opacity=\"0.85\" stroke=\"#222222\" stroke-width=\"0.6\">"
            << "<title>" << xml_escape(p->id) << " #" << p->instance << " (layer "
            << p->layer << ")</title></rect>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void save_svg(const TrayLayout& lay, const CatalogIndex& catalog,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << layout_to_svg(lay, catalog);
    if (!out) throw ParseError("failed writing " + path);
}

} // namespace trayforge
