#include "cosa/schedule.hpp"
#include "cosa/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace cosa {

namespace {

std::int64_t sat_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) return std::numeric_limits<std::int64_t>::max();
    return r;
}

char map_char(Mapping m) { return m == Mapping::Spatial ? 's' : 't'; }

}  // namespace

std::size_t Schedule::loop_count() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l.size();
    return n;
}

Schedule empty_schedule(const PrimeFactorization& pf, const ArchSpec& arch) {
    Schedule s;
    s.layer = pf.original;
    s.padded = pf.padded;
    s.arch_name = arch.name;
    for (const auto& l : arch.levels) s.level_names.push_back(l.name);
    s.levels.resize(arch.levels.size());
    return s;
}

Schedule decode_placements(const ScheduleModel& model, const std::vector<Placement>& placements) {
    auto s = empty_schedule(model.pf, model.arch);
    std::vector<std::vector<std::pair<int, int>>> at(s.levels.size());  // (rank, factor)
    for (int f = 0; f < model.Z; ++f) at[placements[f].level].push_back({placements[f].rank, f});
    for (std::size_t I = 0; I < at.size(); ++I) {
        std::sort(at[I].begin(), at[I].end());
        for (auto [rank, f] : at[I]) {
            const auto& fi = model.factors[f];
            s.levels[I].push_back({fi.dim, fi.value, placements[f].mapping});
        }
    }
    return s;
}

Schedule decode(const ScheduleModel& model, const std::vector<double>& assignment) {
    return decode_placements(model, model.placements(assignment));
}

std::vector<Placement> encode_placements(const ScheduleModel& model, const Schedule& s) {
    const int H = model.arch.num_levels();
    if (static_cast<int>(s.levels.size()) != H) {
        throw std::invalid_argument("schedule has " + std::to_string(s.levels.size()) + " levels, architecture has " +
                                    std::to_string(H));
    }
    // (dim, prime) -> slots holding such a prime loop
    std::map<std::pair<int, std::int64_t>, std::vector<Placement>> slots;
    for (int I = 0; I < H; ++I) {
        int rank = 0;
        for (const auto& loop : s.levels[I]) {
            if (loop.bound < 2) throw std::invalid_argument("loop bound below 2");
            for (auto p : prime_factors(loop.bound)) {
                slots[{static_cast<int>(loop.dim), p}].push_back({I, rank++, loop.mapping});
            }
        }
    }
    std::map<std::pair<int, std::int64_t>, std::vector<int>> factors;
    for (int f = 0; f < model.Z; ++f) {
        factors[{static_cast<int>(model.factors[f].dim), model.factors[f].value}].push_back(f);
    }
    std::vector<Placement> out(model.Z);
    for (auto& [key, sl] : slots) {
        auto it = factors.find(key);
        if (it == factors.end() || it->second.size() != sl.size()) {
            throw std::invalid_argument(std::string("schedule loops of ") + dim_letter(static_cast<Dim>(key.first)) +
                                        " do not match the layer's prime factors");
        }
        std::sort(sl.begin(), sl.end(), [](const Placement& a, const Placement& b) {
            return std::tuple(a.level, static_cast<int>(a.mapping), a.rank) <
                   std::tuple(b.level, static_cast<int>(b.mapping), b.rank);
        });
        for (std::size_t j = 0; j < sl.size(); ++j) out[it->second[j]] = sl[j];
    }
    for (auto& [key, fs] : factors) {
        if (!slots.count(key)) {
            throw std::invalid_argument(std::string("schedule has no loop for a factor of ") +
                                        dim_letter(static_cast<Dim>(key.first)));
        }
    }
    return out;
}

std::vector<double> encode(const ScheduleModel& model, const Schedule& s, const std::vector<int>& partition_picks) {
    return model.assignment(encode_placements(model, s), partition_picks);
}

std::vector<Violation> validate(const Schedule& s, const ArchSpec& arch, const ValidateOptions& opts) {
    std::vector<Violation> out;
    const int H = arch.num_levels();
    if (static_cast<int>(s.levels.size()) != H) {
        out.push_back({"level count", -1, -1, -1,
                       "schedule has " + std::to_string(s.levels.size()) + " levels, architecture has " +
                           std::to_string(H)});
        return out;
    }
    std::array<std::int64_t, kNumDims> prod{};
    prod.fill(1);
    for (int I = 0; I < H; ++I) {
        std::int64_t spatial = 1;
        for (const auto& loop : s.levels[I]) {
            if (loop.bound < 2) {
                out.push_back({"bad bound", I, -1, static_cast<int>(loop.dim),
                               std::string("loop over ") + dim_letter(loop.dim) + " at " + arch.levels[I].name +
                                   " has bound " + std::to_string(loop.bound)});
                continue;
            }
            prod[static_cast<int>(loop.dim)] = sat_mul(prod[static_cast<int>(loop.dim)], loop.bound);
            if (loop.mapping == Mapping::Spatial) spatial = sat_mul(spatial, loop.bound);
        }
        if (spatial > arch.levels[I].spatial_fanout) {
            out.push_back({"spatial overflow", I, -1, -1,
                           "spatial product " + std::to_string(spatial) + " exceeds fanout " +
                               std::to_string(arch.levels[I].spatial_fanout) + " at " + arch.levels[I].name});
        }
    }
    for (auto d : kAllDims) {
        const int j = static_cast<int>(d);
        const auto want = s.padded[d];
        if (prod[j] == want) continue;
        const char* kind = prod[j] < want ? "dimension underflow" : "dimension overflow";
        out.push_back({kind, -1, -1, j,
                       std::string(kind) + " for " + dim_letter(d) + " (product " + std::to_string(prod[j]) +
                           " != " + std::to_string(want) + ")"});
    }
    for (int I = 0; I + 1 < H; ++I) {
        std::int64_t level_bytes = 0;
        for (auto v : kAllTensors) {
            if (!arch.stores(I, v)) continue;
            const std::int64_t tile = (v == Tensor::IA && opts.halo) ? input_tile_with_halo(s, I)
                                                                     : tile_elems(s, arch, I, v);
            level_bytes = sat_mul(tile, arch.precision(v)) > std::numeric_limits<std::int64_t>::max() - level_bytes
                              ? std::numeric_limits<std::int64_t>::max()
                              : level_bytes + sat_mul(tile, arch.precision(v));
            const auto cap = capacity_elements(arch, I, v);
            if (cap && tile > *cap) {
                out.push_back({"capacity overflow", I, static_cast<int>(v), -1,
                               std::string(tensor_name(v)) + " tile of " + std::to_string(tile) +
                                   " elements exceeds " + std::to_string(*cap) + " at " + arch.levels[I].name});
            }
        }
        const auto& shared = arch.levels[I].shared_capacity_bytes;
        if (shared && level_bytes > *shared) {
            out.push_back({"shared capacity overflow", I, -1, -1,
                           "tiles need " + std::to_string(level_bytes) + " bytes, " + arch.levels[I].name +
                               " holds " + std::to_string(*shared)});
        }
    }
    return out;
}

std::string render(const Schedule& s) {
    // Loop variable index per dimension counts outward from the innermost loop.
    std::vector<std::vector<int>> index(s.levels.size());
    std::array<int, kNumDims> seen{};
    for (std::size_t I = 0; I < s.levels.size(); ++I) {
        for (const auto& loop : s.levels[I]) index[I].push_back(seen[static_cast<int>(loop.dim)]++);
    }
    std::ostringstream os;
    os << "// layer " << s.layer.to_string() << " on " << s.arch_name << '\n';
    std::string padded;
    for (auto d : kAllDims) {
        if (s.layer[d] == s.padded[d]) continue;
        if (!padded.empty()) padded += ", ";
        padded += std::string(1, dim_letter(d)) + " " + std::to_string(s.layer[d]) + " -> " + std::to_string(s.padded[d]);
    }
    if (!padded.empty()) os << "// padded " << padded << '\n';
    int depth = 0;
    for (int I = static_cast<int>(s.levels.size()) - 1; I >= 0; --I) {
        const std::string name = I < static_cast<int>(s.level_names.size()) ? s.level_names[I] : "L" + std::to_string(I);
        os << std::string(depth, ' ') << "// " << name << " level\n";
        for (int z = static_cast<int>(s.levels[I].size()) - 1; z >= 0; --z) {
            const auto& loop = s.levels[I][z];
            os << std::string(depth, ' ') << (loop.mapping == Mapping::Spatial ? "spatial_for " : "for ")
               << static_cast<char>(dim_letter(loop.dim) - 'A' + 'a') << index[I][z] << " = [0 : " << loop.bound
               << ") :\n";
            ++depth;
        }
    }
    return os.str();
}

std::string serialize(const Schedule& s) {
    std::ostringstream os;
    os << "cosa-schedule 1\n";
    os << "arch " << s.arch_name << '\n';
    os << "layer " << s.layer.to_string() << '\n';
    os << "padded " << s.padded.to_string() << '\n';
    for (std::size_t I = 0; I < s.levels.size(); ++I) {
        os << "level " << I << ' ' << (I < s.level_names.size() ? s.level_names[I] : "") << '\n';
    }
    for (std::size_t I = 0; I < s.levels.size(); ++I) {
        for (std::size_t z = 0; z < s.levels[I].size(); ++z) {
            const auto& l = s.levels[I][z];
            os << "loop " << I << ' ' << z << ' ' << dim_letter(l.dim) << ' ' << l.bound << ' ' << map_char(l.mapping)
               << '\n';
        }
    }
    os << "end\n";
    return os.str();
}

ScheduleParseError::ScheduleParseError(int line_, int column_, const std::string& what)
    : std::runtime_error("line " + std::to_string(line_) + ", column " + std::to_string(column_) + ": " + what),
      line(line_),
      column(column_) {}

namespace {

struct Token {
    std::string text;
    int column;  // 1-based
};

std::vector<Token> split_tokens(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i >= line.size()) break;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
    }
    return out;
}

std::int64_t parse_int(const Token& t, int line) {
    std::int64_t v = 0;
    if (t.text.empty()) throw ScheduleParseError(line, t.column, "expected an integer");
    for (char c : t.text) {
        if (c < '0' || c > '9') throw ScheduleParseError(line, t.column, "expected an integer, got '" + t.text + "'");
        if (__builtin_mul_overflow(v, 10, &v) || __builtin_add_overflow(v, c - '0', &v)) {
            throw ScheduleParseError(line, t.column, "integer out of range");
        }
    }
    return v;
}

LayerDims parse_dims(const std::vector<Token>& toks, int line) {
    std::array<std::int64_t, kNumDims> b{};
    std::array<bool, kNumDims + 1> got{};
    std::int64_t stride = 1;
    for (std::size_t i = 1; i < toks.size(); ++i) {
        const auto& t = toks[i];
        const auto eq = t.text.find('=');
        if (eq == std::string::npos) throw ScheduleParseError(line, t.column, "expected KEY=VALUE");
        const std::string key = t.text.substr(0, eq);
        Token val{t.text.substr(eq + 1), t.column + static_cast<int>(eq) + 1};
        int slot;
        if (key == "stride") {
            slot = kNumDims;
        } else {
            Dim d;
            if (key.size() != 1 || !parse_dim(key[0], d)) throw ScheduleParseError(line, t.column, "unknown key '" + key + "'");
            slot = static_cast<int>(d);
        }
        if (got[slot]) throw ScheduleParseError(line, t.column, "duplicate key '" + key + "'");
        got[slot] = true;
        const auto v = parse_int(val, line);
        if (slot == kNumDims) stride = v;
        else b[slot] = v;
    }
    for (int j = 0; j <= kNumDims; ++j) {
        if (!got[j]) {
            throw ScheduleParseError(line, 1, std::string("missing ") +
                                                  (j == kNumDims ? std::string("stride") : std::string(1, dim_letter(static_cast<Dim>(j)))));
        }
    }
    LayerDims d;
    d.bounds = b;
    d.stride = stride;
    return d;
}

}  // namespace

Schedule parse_schedule(std::string_view text) {
    std::vector<std::string> lines;
    {
        std::string cur;
        for (char c : text) {
            if (c == '\n') {
                lines.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        if (!cur.empty()) lines.push_back(cur);
    }
    Schedule s;
    std::size_t li = 0;
    auto next = [&](const char* expect) -> std::vector<Token> {
        if (li >= lines.size()) {
            throw ScheduleParseError(static_cast<int>(li) + 1, 1, std::string("unexpected end of input, expected '") + expect + "'");
        }
        auto toks = split_tokens(lines[li++]);
        if (toks.empty()) throw ScheduleParseError(static_cast<int>(li), 1, std::string("expected '") + expect + "'");
        return toks;
    };
    auto line_no = [&]() { return static_cast<int>(li); };

    auto t = next("cosa-schedule");
    if (t[0].text != "cosa-schedule") throw ScheduleParseError(line_no(), t[0].column, "expected 'cosa-schedule'");
    if (t.size() != 2 || t[1].text != "1") {
        throw ScheduleParseError(line_no(), t.size() > 1 ? t[1].column : static_cast<int>(lines[li - 1].size()) + 1,
                                 "unsupported format version");
    }
    t = next("arch");
    if (t[0].text != "arch" || t.size() < 2) throw ScheduleParseError(line_no(), t[0].column, "expected 'arch NAME'");
    s.arch_name = lines[li - 1].substr(t[1].column - 1);
    t = next("layer");
    if (t[0].text != "layer") throw ScheduleParseError(line_no(), t[0].column, "expected 'layer'");
    s.layer = parse_dims(t, line_no());
    t = next("padded");
    if (t[0].text != "padded") throw ScheduleParseError(line_no(), t[0].column, "expected 'padded'");
    s.padded = parse_dims(t, line_no());

    for (;;) {
        t = next("end");
        if (t[0].text == "level") {
            if (t.size() < 2) throw ScheduleParseError(line_no(), static_cast<int>(lines[li - 1].size()) + 1, "expected level index");
            const auto idx = parse_int(t[1], line_no());
            if (idx != static_cast<std::int64_t>(s.levels.size())) {
                throw ScheduleParseError(line_no(), t[1].column, "expected level " + std::to_string(s.levels.size()));
            }
            s.level_names.push_back(t.size() > 2 ? lines[li - 1].substr(t[2].column - 1) : "");
            s.levels.emplace_back();
        } else if (t[0].text == "loop") {
            if (t.size() != 6) {
                throw ScheduleParseError(line_no(), t.back().column, "expected 'loop LEVEL RANK DIM BOUND s|t'");
            }
            const auto level = parse_int(t[1], line_no());
            if (level >= static_cast<std::int64_t>(s.levels.size())) {
                throw ScheduleParseError(line_no(), t[1].column, "undeclared level");
            }
            const auto rank = parse_int(t[2], line_no());
            if (rank != static_cast<std::int64_t>(s.levels[level].size())) {
                throw ScheduleParseError(line_no(), t[2].column, "expected rank " + std::to_string(s.levels[level].size()));
            }
            Dim d;
            if (t[3].text.size() != 1 || !parse_dim(t[3].text[0], d)) {
                throw ScheduleParseError(line_no(), t[3].column, "unknown dimension '" + t[3].text + "'");
            }
            const auto bound = parse_int(t[4], line_no());
            if (bound < 2) throw ScheduleParseError(line_no(), t[4].column, "loop bound must be at least 2");
            Mapping m;
            if (t[5].text == "s") m = Mapping::Spatial;
            else if (t[5].text == "t") m = Mapping::Temporal;
            else throw ScheduleParseError(line_no(), t[5].column, "expected 's' or 't'");
            s.levels[level].push_back({d, bound, m});
        } else if (t[0].text == "end") {
            if (t.size() != 1) throw ScheduleParseError(line_no(), t[1].column, "unexpected text after 'end'");
            break;
        } else {
            throw ScheduleParseError(line_no(), t[0].column, "unexpected '" + t[0].text + "'");
        }
    }
    for (std::size_t k = li; k < lines.size(); ++k) {
        const auto rest = split_tokens(lines[k]);
        if (!rest.empty()) throw ScheduleParseError(static_cast<int>(k) + 1, rest[0].column, "text after 'end'");
    }
    return s;
}

ArchSpec apply_partition(const ScheduleModel& model, const std::vector<int>& picks) {
    if (picks.size() != model.partitions.size()) throw std::invalid_argument("one pick per partition pair required");
    ArchSpec a = model.arch;
    for (std::size_t p = 0; p < picks.size(); ++p) {
        const auto& pair = model.partitions[p];
        const int e = pair.exponents.at(picks[p]);
        a.levels[pair.level].capacity_bytes[static_cast<int>(pair.tensor)] =
            (std::int64_t{1} << e) * a.precision(pair.tensor);
    }
    return a;
}

}  // namespace cosa
