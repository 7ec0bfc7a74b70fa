// SPDX-License-Identifier: Apache-2.0
#include "mixer/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <json.hpp>

#include "mixer/error.hpp"
#include "mixer/io.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace mixer {

using json = nlohmann::json;

std::uint64_t AdapterCheckpoint::param_count() const {
    std::uint64_t s = 0;
    for (const auto& [name, tensor] : tensors) {
        s += tensor.size();
    }
    return s;
}

std::string AdapterCheckpoint::name() const {
    const auto it = metadata.find("name");
    return it == metadata.end() ? std::string() : it->second;
}

void AdapterCheckpoint::validate() const {
    const auto fv = metadata.find("format_version");
    if (fv == metadata.end() || fv->second != "1") {
        throw Error("checkpoint metadata must carry format_version=\"1\"");
    }
    for (const auto& [name, tensor] : tensors) {
        if (name.empty()) {
            throw Error("checkpoint contains an empty tensor name");
        }
        tensor.validate(name);
    }
    if (param_count() == 0) {
        throw Error("checkpoint has no parameters (s must be >= 1)");
    }
}

namespace {

std::uint64_t read_u64_le(const std::byte* p) {
    std::uint64_t v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

std::vector<std::uint64_t> parse_shape(const json& j, const std::string& name) {
    if (!j.is_array()) {
        throw Error("tensor '" + name + "': shape must be an array");
    }
    std::vector<std::uint64_t> shape;
    shape.reserve(j.size());
    for (const auto& d : j) {
        if (!d.is_number_unsigned()) {
            throw Error("tensor '" + name + "': shape entries must be non-negative integers");
        }
        shape.push_back(d.get<std::uint64_t>());
    }
    return shape;
}

}  // namespace

AdapterCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const std::vector<std::byte> bytes = read_file(path);
    if (bytes.size() < 8) {
        throw Error("'" + path.string() + "': malformed header length (file too small)");
    }
    const std::uint64_t header_len = read_u64_le(bytes.data());
    if (header_len < 2 || header_len > bytes.size() - 8) {
        throw Error("'" + path.string() + "': malformed header length");
    }
    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
    } catch (const json::exception& e) {
        throw Error("'" + path.string() + "': header not valid JSON: " + e.what());
    }
    if (!header.is_object()) {
        throw Error("'" + path.string() + "': header must be a JSON object");
    }

    const std::byte* payload = bytes.data() + 8 + header_len;
    const std::uint64_t payload_size = bytes.size() - 8 - header_len;

    AdapterCheckpoint ckpt;
    struct Range {
        std::uint64_t begin, end;
        std::string name;
    };
    std::vector<Range> ranges;

    for (const auto& [name, entry] : header.items()) {
        if (name == "__metadata__") {
            if (!entry.is_object()) {
                throw Error("'" + path.string() + "': __metadata__ must be an object");
            }
            for (const auto& [key, value] : entry.items()) {
                if (!value.is_string()) {
                    throw Error("'" + path.string() + "': metadata value for '" + key +
                                "' must be a string");
                }
                ckpt.metadata[key] = value.get<std::string>();
            }
            continue;
        }
        if (name.empty()) {
            throw Error("'" + path.string() + "': empty tensor name");
        }
        if (!entry.is_object()) {
            throw Error("tensor '" + name + "': entry must be an object");
        }
        const auto dtype = entry.find("dtype");
        if (dtype == entry.end() || !dtype->is_string() || dtype->get<std::string>() != "F32") {
            throw Error("tensor '" + name + "': dtype must be F32");
        }
        const auto shape_it = entry.find("shape");
        if (shape_it == entry.end()) {
            throw Error("tensor '" + name + "': missing shape");
        }
        const std::vector<std::uint64_t> shape = parse_shape(*shape_it, name);
        const std::uint64_t elements = shape_elements(shape);

        const auto offsets = entry.find("data_offsets");
        if (offsets == entry.end() || !offsets->is_array() || offsets->size() != 2 ||
            !(*offsets)[0].is_number_unsigned() || !(*offsets)[1].is_number_unsigned()) {
            throw Error("tensor '" + name + "': data_offsets must be [begin, end]");
        }
        const std::uint64_t begin = (*offsets)[0].get<std::uint64_t>();
        const std::uint64_t end = (*offsets)[1].get<std::uint64_t>();
        if (begin > end || end > payload_size) {
            throw Error("tensor '" + name + "': out-of-bounds data range");
        }
        if (end - begin != elements * 4) {
            throw Error("tensor '" + name + "': data range does not match shape");
        }

        Tensor tensor;
        tensor.shape = shape;
        tensor.data.resize(elements);
        if (elements > 0) {
            std::memcpy(tensor.data.data(), payload + begin, elements * 4);
        }
        tensor.validate(name);
        ckpt.tensors.emplace(name, std::move(tensor));
        ranges.push_back({begin, end, name});
    }

    std::sort(ranges.begin(), ranges.end(),
              [](const Range& a, const Range& b) { return a.begin < b.begin; });
    for (std::size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i].begin < ranges[i - 1].end) {
            throw Error("tensors '" + ranges[i - 1].name + "' and '" + ranges[i].name +
                        "': overlapping data ranges");
        }
    }

    auto fv = ckpt.metadata.find("format_version");
    if (fv == ckpt.metadata.end()) {
        ckpt.metadata["format_version"] = "1";
    } else if (fv->second != "1") {
        throw Error("'" + path.string() + "': unsupported format_version \"" + fv->second + "\"");
    }
    ckpt.validate();
    return ckpt;
}

std::string serialize_checkpoint(const AdapterCheckpoint& ckpt) {
    // nlohmann's default object storage is a std::map, so dumped keys come out
    // lexicographically sorted, matching the payload order.
    json header = json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : ckpt.tensors) {
        const std::uint64_t nbytes = tensor.size() * 4;
        header[name] = {{"dtype", "F32"},
                        {"shape", tensor.shape},
                        {"data_offsets", {offset, offset + nbytes}}};
        offset += nbytes;
    }
    if (!ckpt.metadata.empty()) {
        header["__metadata__"] = ckpt.metadata;
    }

    std::string header_text;
    try {
        header_text = header.dump();
    } catch (const json::exception&) {
        throw Error("checkpoint contains a tensor or metadata name that is not valid UTF-8");
    }

    std::string out;
    out.reserve(8 + header_text.size() + offset);
    const std::uint64_t header_len = header_text.size();
    out.append(reinterpret_cast<const char*>(&header_len), 8);
    out.append(header_text);
    for (const auto& [name, tensor] : ckpt.tensors) {
        out.append(reinterpret_cast<const char*>(tensor.data.data()), tensor.size() * 4);
    }
    return out;
}

void save_checkpoint(const AdapterCheckpoint& ckpt, const std::filesystem::path& path) {
    ckpt.validate();
    const std::string bytes = serialize_checkpoint(ckpt);
    write_file_atomic(path, bytes);
}

CompatReport validate_compat(std::span<const AdapterCheckpoint> ckpts) {
    if (ckpts.size() < 2) {
        throw Error("validate_compat requires at least 2 checkpoints");
    }
    CompatReport report;
    const auto& base = ckpts[0];
    for (std::size_t i = 1; i < ckpts.size(); ++i) {
        for (const auto& [name, tensor] : base.tensors) {
            const auto it = ckpts[i].tensors.find(name);
            if (it == ckpts[i].tensors.end()) {
                report.mismatches.push_back({name, CompatReport::Reason::Missing, i});
            } else if (it->second.shape != tensor.shape) {
                report.mismatches.push_back({name, CompatReport::Reason::ShapeMismatch, i});
            }
        }
        for (const auto& [name, tensor] : ckpts[i].tensors) {
            if (!base.tensors.contains(name)) {
                report.mismatches.push_back({name, CompatReport::Reason::Missing, i});
            }
        }
    }
    report.compatible = report.mismatches.empty();
    return report;
}

void require_compatible(const AdapterCheckpoint& a, const AdapterCheckpoint& b) {
    for (const auto& [name, tensor] : a.tensors) {
        const auto it = b.tensors.find(name);
        if (it == b.tensors.end()) {
            throw Error("incompatible checkpoints: tensor '" + name + "' missing");
        }
        if (it->second.shape != tensor.shape) {
            throw Error("incompatible checkpoints: tensor '" + name + "' shape-mismatch");
        }
    }
    for (const auto& [name, tensor] : b.tensors) {
        if (!a.tensors.contains(name)) {
            throw Error("incompatible checkpoints: tensor '" + name + "' missing");
        }
    }
}

void require_compatible(std::span<const AdapterCheckpoint> ckpts) {
    if (ckpts.size() < 2) {
        return;
    }
    const CompatReport report = validate_compat(ckpts);
    if (!report.compatible) {
        const auto& m = report.mismatches.front();
        throw Error("incompatible checkpoints: tensor '" + m.tensor + "' " +
                    (m.reason == CompatReport::Reason::Missing ? "missing" : "shape-mismatch") +
                    " in input " + std::to_string(m.checkpoint_index));
    }
}

bool tensors_bitwise_equal(const AdapterCheckpoint& a, const AdapterCheckpoint& b) {
    if (a.tensors.size() != b.tensors.size()) {
        return false;
    }
    auto ia = a.tensors.begin();
    auto ib = b.tensors.begin();
    for (; ia != a.tensors.end(); ++ia, ++ib) {
        if (ia->first != ib->first || !bitwise_equal(ia->second, ib->second)) {
            return false;
        }
    }
    return true;
}

bool operator==(const AdapterCheckpoint& a, const AdapterCheckpoint& b) {
    return a.metadata == b.metadata && tensors_bitwise_equal(a, b);
}

}  // namespace mixer
