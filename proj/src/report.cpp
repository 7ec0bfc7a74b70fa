// SPDX-License-Identifier: Apache-2.0
#include "mixer/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "mixer/error.hpp"
#include "mixer/io.hpp"

namespace mixer {

namespace {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void emit_report_csv(std::vector<SweepRow> rows, const std::filesystem::path& path) {
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.target, a.k, a.member_set) < std::tie(b.target, b.k, b.member_set);
    });
    std::string out = "target,k,member_set,clean_acc,fgsm_acc,fsd_mean\n";
    for (const SweepRow& row : rows) {
        out += csv_escape(row.target);
        out += ',';
        out += std::to_string(row.k);
        out += ',';
        out += csv_escape(row.member_set);
        out += ',';
        out += fixed6(row.clean_acc);
        out += ',';
        out += fixed6(row.fgsm_acc);
        out += ',';
        out += fixed6(row.fsd_mean);
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<SweepRow> read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("'" + path.string() + "': empty report");
    }
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        // fields: target,k,member_set,clean_acc,fgsm_acc,fsd_mean
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        fields.push_back(cur);
        if (fields.size() != 6) {
            throw Error("'" + path.string() + "': expected 6 columns");
        }
        SweepRow row;
        row.target = fields[0];
        row.k = std::stoi(fields[1]);
        row.member_set = fields[2];
        row.clean_acc = std::stod(fields[3]);
        row.fgsm_acc = std::stod(fields[4]);
        row.fsd_mean = std::stod(fields[5]);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string svg_escape(const std::string& text) {
    std::string out;
    for (char c : text) {
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

}  // namespace

void emit_heatmap_svg(const FsdMatrix& matrix, const std::filesystem::path& path) {
    matrix.validate();
    const int cell = 64;
    const int margin_left = 120;
    const int margin_top = 40;
    const int k = static_cast<int>(matrix.k);
    const int width = margin_left + k * cell + 10;
    const int height = margin_top + k * cell + 10;

    double max_entry = 0.0;
    for (double v : matrix.values) {
        max_entry = std::max(max_entry, v);
    }

    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                  "font-family=\"monospace\" font-size=\"12\">\n",
                  width, height);
    out += buf;

    for (int j = 0; j < k; ++j) {
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
                      margin_left + j * cell + cell / 2, margin_top - 10,
                      svg_escape(matrix.labels[j]).c_str());
        out += buf;
    }
    for (int i = 0; i < k; ++i) {
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%s</text>\n",
                      margin_left - 8, margin_top + i * cell + cell / 2 + 4,
                      svg_escape(matrix.labels[i]).c_str());
        out += buf;
        for (int j = 0; j < k; ++j) {
            const double v = matrix.at(i, j);
            const double t = max_entry > 0.0 ? v / max_entry : 0.0;
            // light (#f7fbff) to dark blue (#08306b)
            const int r = static_cast<int>(std::lround(247.0 + t * (8.0 - 247.0)));
            const int g = static_cast<int>(std::lround(251.0 + t * (48.0 - 251.0)));
            const int b = static_cast<int>(std::lround(255.0 + t * (107.0 - 255.0)));
            const char* text_color = t > 0.5 ? "#ffffff" : "#000000";
            std::snprintf(buf, sizeof(buf),
                          "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" "
                          "fill=\"rgb(%d,%d,%d)\" stroke=\"#808080\"/>\n",
                          margin_left + j * cell, margin_top + i * cell, cell, cell, r, g, b);
            out += buf;
            std::snprintf(buf, sizeof(buf),
                          "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" fill=\"%s\">"
                          "%.1f</text>\n",
                          margin_left + j * cell + cell / 2, margin_top + i * cell + cell / 2 + 4,
                          text_color, v * 100.0);
            out += buf;
        }
    }
    out += "</svg>\n";
    write_file_atomic(path, out);
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    const nlohmann::json doc = {{"artifact_version", manifest.artifact_version},
                                {"command_line", manifest.command_line},
                                {"config_digest", manifest.config_digest},
                                {"seeds", manifest.seeds},
                                {"input_digests", manifest.input_digests},
                                {"output_digests", manifest.output_digests},
                                {"timestamp", manifest.timestamp}};
    write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace mixer
