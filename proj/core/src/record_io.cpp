#include "rowfollow/record_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rowfollow {

using nlohmann::json;

void writeTextFileAtomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write file: " + tmp.string());
        out << content;
        if (!out.good()) {
            out.close();
            fs::remove(tmp);
            throw Error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, target);
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

std::string recordCsv(const TrialRecord& record) {
    std::ostringstream out;
    out << "t,x,y,phi,true_dL,true_dR,true_phi,est_dL,est_dR,est_phi,"
           "omega_mpc,omega_cmd,rho1,intervention\n";
    for (const auto& r : record.rows) {
        out << fmt(r.t) << ',' << fmt(r.pose.x) << ',' << fmt(r.pose.y) << ','
            << fmt(r.pose.yaw) << ',' << fmt(r.trueDLeft) << ',' << fmt(r.trueDRight)
            << ',' << fmt(r.trueHeading) << ',' << fmt(r.estDLeft) << ','
            << fmt(r.estDRight) << ',' << fmt(r.estHeading) << ',' << fmt(r.omegaMpc)
            << ',' << fmt(r.omegaCmd) << ',' << fmt(r.rho1) << ','
            << (r.intervention ? 1 : 0) << '\n';
    }
    return out.str();
}

void writeRecordCsv(const std::string& path, const TrialRecord& record) {
    writeTextFileAtomic(path, recordCsv(record));
}

TrialRecord readRecordCsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open record file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("record file is empty: " + path);

    TrialRecord record;
    size_t lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != 14)
            throw Error(path + ":" + std::to_string(lineNo) + ": expected 14 columns");
        TickRow r;
        r.t = vals[0];
        r.pose = {vals[1], vals[2], vals[3]};
        r.trueDLeft = vals[4];
        r.trueDRight = vals[5];
        r.trueHeading = vals[6];
        r.estDLeft = vals[7];
        r.estDRight = vals[8];
        r.estHeading = vals[9];
        r.omegaMpc = vals[10];
        r.omegaCmd = vals[11];
        r.rho1 = vals[12];
        r.intervention = vals[13] != 0.0;
        record.rows.push_back(r);
    }
    return record;
}

json summaryJson(const TrialRecord& record) {
    const TrialSummary& s = record.summary;
    json events = json::array();
    for (const auto& ev : record.interventions)
        events.push_back({{"t", ev.t}, {"arc_length_m", ev.arcLength}, {"cause", ev.cause}});
    json doc;
    doc["distance_m"] = s.distance;
    doc["interventions"] = s.interventions;
    doc["mean_abs_cte_m"] = s.meanAbsCte;
    doc["max_abs_cte_m"] = s.maxAbsCte;
    doc["oscillation_amp_m"] = s.oscillationAmplitude;
    doc["completed"] = s.completed;
    if (auto mpi = s.metersPerIntervention())
        doc["meters_per_intervention"] = *mpi;
    else
        doc["meters_per_intervention"] = nullptr;
    doc["intervention_events"] = events;
    return doc;
}

void writeSummaryJson(const std::string& path, const TrialRecord& record) {
    writeTextFileAtomic(path, summaryJson(record).dump(2) + "\n");
}

namespace {

struct SvgMapper {
    double minX = 0.0, maxX = 1.0, minY = 0.0, maxY = 1.0;
    double width = 1000.0, height = 320.0, margin = 35.0;

    double sx(double x) const {
        return margin + (x - minX) / std::max(maxX - minX, 1e-9) * (width - 2 * margin);
    }
    double sy(double y) const {
        return margin + (maxY - y) / std::max(maxY - minY, 1e-9) * (height - 2 * margin);
    }
};

std::string svgNum(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void appendPolyline(std::string& svg, const std::vector<Eigen::Vector2d>& pts,
                    const SvgMapper& m, const char* style) {
    if (pts.size() < 2) return;
    svg += "  <polyline fill=\"none\" ";
    svg += style;
    svg += " points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
        if (i) svg += ' ';
        svg += svgNum(m.sx(pts[i].x()));
        svg += ',';
        svg += svgNum(m.sy(pts[i].y()));
    }
    svg += "\"/>\n";
}

// Offsets the centerline polyline to one side (vertex normals averaged at
// joints are unnecessary at plot resolution; segment normals suffice).
std::vector<Eigen::Vector2d> offsetPolyline(const std::vector<Eigen::Vector2d>& line,
                                            double offset) {
    std::vector<Eigen::Vector2d> out;
    out.reserve(line.size());
    for (size_t i = 0; i < line.size(); ++i) {
        const size_t a = i == 0 ? 0 : i - 1;
        const size_t b = i + 1 < line.size() ? i + 1 : i;
        const Eigen::Vector2d dir = (line[b] - line[a]).normalized();
        const Eigen::Vector2d normal(-dir.y(), dir.x());
        out.push_back(line[i] + offset * normal);
    }
    return out;
}

}  // namespace

std::string trajectorySvg(const FieldModel& field, const TrialRecord& record) {
    SvgMapper m;
    m.minX = m.maxX = field.centerline.front().x();
    m.minY = m.maxY = field.centerline.front().y();
    auto grow = [&](const Eigen::Vector2d& p) {
        m.minX = std::min(m.minX, p.x());
        m.maxX = std::max(m.maxX, p.x());
        m.minY = std::min(m.minY, p.y());
        m.maxY = std::max(m.maxY, p.y());
    };
    for (const auto& p : field.centerline) grow(p);
    for (const auto& r : record.rows) grow({r.pose.x, r.pose.y});
    m.minY -= field.laneWidth;
    m.maxY += field.laneWidth;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svgNum(m.width) +
           "\" height=\"" + svgNum(m.height) + "\" viewBox=\"0 0 " + svgNum(m.width) +
           " " + svgNum(m.height) + "\">\n";
    svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    appendPolyline(svg, offsetPolyline(field.centerline, field.laneWidth / 2.0), m,
                   "stroke=\"#5a9e4b\" stroke-width=\"1.5\"");
    appendPolyline(svg, offsetPolyline(field.centerline, -field.laneWidth / 2.0), m,
                   "stroke=\"#5a9e4b\" stroke-width=\"1.5\"");
    appendPolyline(svg, field.centerline, m,
                   "stroke=\"#bbbbbb\" stroke-width=\"1\" stroke-dasharray=\"6,4\"");

    std::vector<Eigen::Vector2d> path;
    path.reserve(record.rows.size());
    for (const auto& r : record.rows) path.emplace_back(r.pose.x, r.pose.y);
    appendPolyline(svg, path, m, "stroke=\"#0066cc\" stroke-width=\"1.2\"");

    for (const auto& ev : record.interventions) {
        const Pose2D p = field.poseAt(ev.arcLength);
        svg += "  <circle cx=\"" + svgNum(m.sx(p.x)) + "\" cy=\"" + svgNum(m.sy(p.y)) +
               "\" r=\"4\" fill=\"none\" stroke=\"#cc2222\" stroke-width=\"1.5\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void writeTrajectorySvg(const std::string& path, const FieldModel& field,
                        const TrialRecord& record) {
    writeTextFileAtomic(path, trajectorySvg(field, record));
}

}  // namespace rowfollow
