#pragma once

// INI-style experiment configs flattened to "section.key" -> value.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace arw {

using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::string& path);
/// Sections in sorted order; parse_config_text(write_config_text(m)) == m.
std::string write_config_text(const ConfigMap& m);

/// FNV-1a over the sorted key=value lines; independent of file order.
std::uint64_t config_hash(const ConfigMap& m);
std::string hash_hex(std::uint64_t h);

std::vector<std::string> split_list(const std::string& s);
std::vector<int> parse_int_list(const std::string& s);
std::vector<double> parse_double_list(const std::string& s);
bool parse_bool(const std::string& s);

}  // namespace arw
