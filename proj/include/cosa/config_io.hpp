#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cosa/architecture.hpp"
#include "cosa/workload.hpp"

namespace cosa {

/// Malformed layer or architecture text. line is 1-based, 0 when not line-specific.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& what);
    int line;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct ConfigSection {
    std::string name;
    int line = 0;
    std::vector<ConfigEntry> entries;
};

/// Line-oriented `[section]` / `key = value` text; `#` starts a comment.
std::vector<ConfigSection> parse_config(std::string_view text);

struct NamedLayer {
    std::string name;
    LayerDims dims;
};

/// One or more [layer] sections with keys R S P Q C K N and optional stride and name.
std::vector<NamedLayer> parse_layers(std::string_view text);
std::string format_layer(const NamedLayer& layer);

/// [arch] header, one [level] per memory level (innermost first), optional [relation].
ArchSpec parse_arch(std::string_view text);
std::string format_arch(const ArchSpec& arch);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace cosa
