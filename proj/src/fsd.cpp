// SPDX-License-Identifier: Apache-2.0
#include "mixer/fsd.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mixer/error.hpp"
#include "mixer/io.hpp"
#include "mixer/parallel.hpp"

namespace mixer {

void FsdMatrix::validate() const {
    if (k == 0 || labels.size() != k || values.size() != k * k) {
        throw Error("FSD matrix: inconsistent dimensions");
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (at(i, i) != 0.0) {
            throw Error("FSD matrix: nonzero diagonal at " + std::to_string(i));
        }
        for (std::size_t j = 0; j < k; ++j) {
            const double v = at(i, j);
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error("FSD matrix: entry out of [0,1]");
            }
            if (v != at(j, i)) {
                throw Error("FSD matrix: not symmetric");
            }
        }
    }
}

std::uint64_t count_sign_conflicts(const Tensor& a, const Tensor& b) {
    std::uint64_t count = 0;
    const std::size_t n = a.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const float x = a.data[i];
        const float y = b.data[i];
        // product < 0 in exact arithmetic: strictly opposite signs, no zeros
        count += (x < 0.0f && y > 0.0f) || (x > 0.0f && y < 0.0f);
    }
    return count;
}

double fsd_pair(const AdapterCheckpoint& a, const AdapterCheckpoint& b) {
    require_compatible(a, b);
    std::uint64_t conflicts = 0;
    for (const auto& [name, tensor] : a.tensors) {
        conflicts += count_sign_conflicts(tensor, b.tensors.at(name));
    }
    const std::uint64_t s = a.param_count();
    if (s == 0) {
        throw Error("fsd_pair: checkpoints have no parameters");
    }
    return static_cast<double>(conflicts) / static_cast<double>(s);
}

std::map<std::string, double> fsd_per_tensor(const AdapterCheckpoint& a,
                                             const AdapterCheckpoint& b) {
    require_compatible(a, b);
    std::map<std::string, double> out;
    for (const auto& [name, tensor] : a.tensors) {
        const std::uint64_t n = tensor.size();
        const std::uint64_t c = count_sign_conflicts(tensor, b.tensors.at(name));
        out[name] = n == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(n);
    }
    return out;
}

FsdMatrix fsd_matrix(std::span<const AdapterCheckpoint> adapters,
                     std::vector<std::string> labels, int threads) {
    if (adapters.empty()) {
        throw Error("fsd_matrix requires at least one adapter");
    }
    if (labels.size() != adapters.size()) {
        throw Error("fsd_matrix: label count does not match adapter count");
    }
    require_compatible(adapters);

    FsdMatrix m;
    m.k = adapters.size();
    m.labels = std::move(labels);
    m.values.assign(m.k * m.k, 0.0);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < m.k; ++i) {
        for (std::size_t j = i + 1; j < m.k; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        const double v = fsd_pair(adapters[i], adapters[j]);
        m.at(i, j) = v;
        m.at(j, i) = v;
    });
    return m;
}

std::vector<double> mean_fsd_rows(const FsdMatrix& s) {
    s.validate();
    std::vector<double> means(s.k);
    for (std::size_t i = 0; i < s.k; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < s.k; ++j) {
            sum += s.at(i, j);
        }
        means[i] = sum / static_cast<double>(s.k);
    }
    return means;
}

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

std::vector<std::string> split_csv_line(const std::string& line) {
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
    return fields;
}

}  // namespace

void write_fsd_csv(const FsdMatrix& s, const std::filesystem::path& path) {
    s.validate();
    std::string out;
    for (std::size_t i = 0; i < s.k; ++i) {
        if (i > 0) {
            out += ',';
        }
        out += csv_escape(s.labels[i]);
    }
    out += '\n';
    char buf[32];
    for (std::size_t i = 0; i < s.k; ++i) {
        for (std::size_t j = 0; j < s.k; ++j) {
            std::snprintf(buf, sizeof(buf), "%.9f", s.at(i, j));
            if (j > 0) {
                out += ',';
            }
            out += buf;
        }
        out += '\n';
    }
    write_file_atomic(path, out);
}

FsdMatrix read_fsd_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("'" + path.string() + "': empty FSD CSV");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    FsdMatrix m;
    m.labels = split_csv_line(line);
    m.k = m.labels.size();
    m.values.reserve(m.k * m.k);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != m.k) {
            throw Error("'" + path.string() + "': row width does not match header");
        }
        for (const auto& f : fields) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(f, &pos);
            } catch (...) {
                throw Error("'" + path.string() + "': bad numeric field '" + f + "'");
            }
            if (pos != f.size()) {
                throw Error("'" + path.string() + "': bad numeric field '" + f + "'");
            }
            m.values.push_back(v);
        }
    }
    if (m.values.size() != m.k * m.k) {
        throw Error("'" + path.string() + "': expected " + std::to_string(m.k) + " rows");
    }
    m.validate();
    return m;
}

}  // namespace mixer
