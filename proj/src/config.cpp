#include "arw/config.hpp"

#include "arw/data.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace arw {

namespace {

ConfigMap flatten(const boost::property_tree::ptree& tree) {
  ConfigMap m;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      std::string v = value.get_value<std::string>();
      boost::algorithm::trim(v);
      m[section + "." + key] = v;
    }
  }
  return m;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return flatten(tree);
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string write_config_text(const ConfigMap& m) {
  std::ostringstream out;
  std::string current;
  for (const auto& [k, v] : m) {
    const auto dot = k.find('.');
    const std::string section = k.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << k.substr(dot + 1) << " = " << v << '\n';
  }
  return out.str();
}

std::uint64_t config_hash(const ConfigMap& m) {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto& [k, v] : m) {
    const std::string line = k + "=" + v + "\n";
    h = fnv1a(line.data(), line.size(), h);
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    boost::algorithm::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& x : split_list(s)) {
    std::size_t used = 0;
    const int v = std::stoi(x, &used);
    if (used != x.size()) throw std::invalid_argument("not an integer: '" + x + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& x : split_list(s)) {
    std::size_t used = 0;
    const double v = std::stod(x, &used);
    if (used != x.size()) throw std::invalid_argument("not a number: '" + x + "'");
    out.push_back(v);
  }
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

}  // namespace arw
