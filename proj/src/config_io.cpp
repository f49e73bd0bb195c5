#include "cosa/config_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace cosa {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::int64_t to_int(const ConfigEntry& e) {
    std::int64_t v = 0;
    const auto* end = e.value.data() + e.value.size();
    auto [p, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || p != end) throw ConfigError(e.line, "'" + e.key + "' expects an integer, got '" + e.value + "'");
    return v;
}

double to_double(const ConfigEntry& e) {
    double v = 0;
    const auto* end = e.value.data() + e.value.size();
    auto [p, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || p != end) throw ConfigError(e.line, "'" + e.key + "' expects a number, got '" + e.value + "'");
    return v;
}

bool to_bool(const ConfigEntry& e) {
    if (e.value == "1" || e.value == "true" || e.value == "yes") return true;
    if (e.value == "0" || e.value == "false" || e.value == "no") return false;
    throw ConfigError(e.line, "'" + e.key + "' expects true or false, got '" + e.value + "'");
}

std::vector<std::int64_t> to_ints(const ConfigEntry& e, std::size_t n) {
    std::vector<std::int64_t> out;
    std::istringstream is(e.value);
    std::string tok;
    while (is >> tok) {
        ConfigEntry one{e.key, tok, e.line};
        out.push_back(to_int(one));
    }
    if (out.size() != n) {
        throw ConfigError(e.line, "'" + e.key + "' expects " + std::to_string(n) + " integers");
    }
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

ConfigError::ConfigError(int line_, const std::string& what)
    : std::runtime_error(line_ > 0 ? "line " + std::to_string(line_) + ": " + what : what), line(line_) {}

std::vector<ConfigSection> parse_config(std::string_view text) {
    std::vector<ConfigSection> out;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw ConfigError(lineno, "malformed section header");
            out.push_back({std::string(trim(line.substr(1, line.size() - 2))), lineno, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(lineno, "expected key = value");
        if (out.empty()) throw ConfigError(lineno, "entry outside any section");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(lineno, "empty key");
        out.back().entries.push_back({std::string(key), std::string(value), lineno});
    }
    return out;
}

std::vector<NamedLayer> parse_layers(std::string_view text) {
    std::vector<NamedLayer> out;
    for (const auto& sec : parse_config(text)) {
        if (sec.name != "layer") throw ConfigError(sec.line, "unknown section [" + sec.name + "]");
        NamedLayer L;
        L.name = "layer" + std::to_string(out.size());
        std::array<bool, kNumDims> seen{};
        for (const auto& e : sec.entries) {
            Dim d;
            if (e.key.size() == 1 && parse_dim(e.key[0], d)) {
                if (seen[static_cast<int>(d)]) throw ConfigError(e.line, "duplicate key '" + e.key + "'");
                seen[static_cast<int>(d)] = true;
                L.dims[d] = to_int(e);
            } else if (e.key == "stride" || e.key == "Stride") {
                L.dims.stride = to_int(e);
            } else if (e.key == "name") {
                L.name = e.value;
            } else {
                throw ConfigError(e.line, "unknown layer key '" + e.key + "'");
            }
        }
        for (auto d : kAllDims) {
            if (!seen[static_cast<int>(d)]) {
                throw ConfigError(sec.line, std::string("layer is missing ") + dim_letter(d));
            }
        }
        if (!L.dims.valid()) throw ConfigError(sec.line, "loop bounds and stride must be positive");
        out.push_back(std::move(L));
    }
    if (out.empty()) throw ConfigError(0, "no [layer] section");
    return out;
}

std::string format_layer(const NamedLayer& layer) {
    std::ostringstream os;
    os << "[layer]\nname = " << layer.name << "\n";
    for (auto d : kAllDims) os << dim_letter(d) << " = " << layer.dims[d] << "\n";
    os << "stride = " << layer.dims.stride << "\n";
    return os.str();
}

ArchSpec parse_arch(std::string_view text) {
    ArchSpec a;
    a.A = default_tensor_dim_matrix();
    bool header = false;
    for (const auto& sec : parse_config(text)) {
        if (sec.name == "arch") {
            if (header) throw ConfigError(sec.line, "duplicate [arch] section");
            header = true;
            for (const auto& e : sec.entries) {
                if (e.key == "name") {
                    a.name = e.value;
                } else if (e.key == "precision") {
                    const auto p = to_ints(e, kNumTensors);
                    for (int v = 0; v < kNumTensors; ++v) a.precision_bytes[v] = p[v];
                } else if (e.key == "bandwidth") {
                    a.noc_bandwidth = to_double(e);
                } else {
                    throw ConfigError(e.line, "unknown arch key '" + e.key + "'");
                }
            }
        } else if (sec.name == "level") {
            MemLevel L;
            std::array<std::uint8_t, kNumTensors> stored{};
            for (const auto& e : sec.entries) {
                Tensor v;
                if (parse_tensor(e.key, v)) {
                    // A tensor key means the level stores it; "inf" leaves it unbounded.
                    stored[static_cast<int>(v)] = 1;
                    if (e.value != "inf") L.capacity_bytes[static_cast<int>(v)] = to_int(e);
                } else if (e.key == "name") {
                    L.name = e.value;
                } else if (e.key == "fanout") {
                    L.spatial_fanout = to_int(e);
                } else if (e.key == "noc") {
                    L.is_noc_boundary = to_bool(e);
                } else if (e.key == "shared") {
                    L.shared_capacity_bytes = to_int(e);
                } else {
                    throw ConfigError(e.line, "unknown level key '" + e.key + "'");
                }
            }
            if (L.name.empty()) throw ConfigError(sec.line, "level without a name");
            a.levels.push_back(std::move(L));
            a.B.push_back(stored);
        } else if (sec.name == "relation") {
            for (const auto& e : sec.entries) {
                Dim d;
                if (e.key.size() != 1 || !parse_dim(e.key[0], d)) {
                    throw ConfigError(e.line, "relation keys are dimension letters, got '" + e.key + "'");
                }
                const auto row = to_ints(e, kNumTensors);
                for (int v = 0; v < kNumTensors; ++v) a.A[static_cast<int>(d)][v] = static_cast<std::uint8_t>(row[v]);
            }
        } else {
            throw ConfigError(sec.line, "unknown section [" + sec.name + "]");
        }
    }
    if (!header) throw ConfigError(0, "no [arch] section");
    if (a.levels.empty()) throw ConfigError(0, "no [level] sections");
    return a;
}

std::string format_arch(const ArchSpec& a) {
    std::ostringstream os;
    os << "[arch]\nname = " << a.name << "\nprecision =";
    for (auto p : a.precision_bytes) os << ' ' << p;
    os << "\nbandwidth = " << fmt_double(a.noc_bandwidth) << "\n";
    for (int I = 0; I < a.num_levels(); ++I) {
        const auto& L = a.levels[I];
        os << "\n[level]\nname = " << L.name << "\n";
        for (auto v : kAllTensors) {
            if (!a.stores(I, v)) continue;
            const auto& c = L.capacity_bytes[static_cast<int>(v)];
            os << tensor_name(v) << " = " << (c ? std::to_string(*c) : std::string("inf")) << "\n";
        }
        os << "fanout = " << L.spatial_fanout << "\n";
        if (L.is_noc_boundary) os << "noc = true\n";
        if (L.shared_capacity_bytes) os << "shared = " << *L.shared_capacity_bytes << "\n";
    }
    if (a.A != default_tensor_dim_matrix()) {
        os << "\n[relation]\n";
        for (auto d : kAllDims) {
            os << dim_letter(d) << " =";
            for (int v = 0; v < kNumTensors; ++v) os << ' ' << static_cast<int>(a.A[static_cast<int>(d)][v]);
            os << "\n";
        }
    }
    return os.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw IoError("cannot read '" + path + "'");
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write '" + path + "'");
}

}  // namespace cosa
