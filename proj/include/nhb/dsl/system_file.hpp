#pragma once

// System-definition files.  Line oriented, "#" comments to end of line,
// ";" may separate several key = value items on one line.
//
//   [system]      name = <IDENT>   dim = <INT>   coords = <IDENT, ...>
//   [params]      <IDENT> = <NUMBER>            (zero or more)
//   [metric]      row<i> = <expr, ...>          (dim rows)
//   [potential]   V = <expr>
//   [constraint]  form = <expr, ...>            (one section per row)
//   [frame]       col<a> = <expr, ...>          (optional, k columns)

#include <charconv>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nhb/dsl/parser.hpp"
#include "nhb/errors.hpp"
#include "nhb/system_definition.hpp"

namespace nhb::dsl {

/// StructuralError raised while reading a system file, with its line number.
class SystemFileError : public StructuralError {
 public:
  SystemFileError(std::size_t line, const std::string& msg)
      : StructuralError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Numbered key such as row3 or col1; returns the 1-based index.
inline std::optional<std::size_t> numbered_key(std::string_view key, std::string_view stem) {
  if (key.size() <= stem.size() || key.substr(0, stem.size()) != stem) return std::nullopt;
  std::size_t v = 0;
  auto digits = key.substr(stem.size());
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || v == 0) return std::nullopt;
  return v;
}

}  // namespace detail

inline SystemDefinition parse_system(std::string_view text) {
  SystemSource src;
  std::optional<std::size_t> dim;
  bool have_name = false;
  std::map<std::size_t, std::vector<ExprPtr>> rows;
  std::map<std::size_t, std::vector<ExprPtr>> cols;
  std::string section;
  bool constraint_open = false;
  std::size_t constraint_section_line = 0;
  std::size_t lineno = 0;

  auto close_constraint = [&] {
    if (constraint_open) throw SystemFileError(constraint_section_line, "[constraint] section without 'form ='");
  };

  auto parse_list = [&](std::string_view value, std::size_t line, const std::string& where) {
    std::vector<ExprPtr> out;
    auto items = detail::split(value, ',');
    for (std::size_t j = 0; j < items.size(); ++j) {
      try {
        out.push_back(parse_expression(detail::trim(items[j])));
      } catch (const Error& e) {
        throw SystemFileError(line, where + " column " + std::to_string(j + 1) + ": " + e.what());
      }
    }
    return out;
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw SystemFileError(lineno, "malformed section header");
      close_constraint();
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section == "constraint") {
        constraint_open = true;
        constraint_section_line = lineno;
      } else if (section == "frame") {
        if (src.frame || !cols.empty()) throw SystemFileError(lineno, "duplicate [frame] section");
      } else if (section != "system" && section != "params" && section != "metric" && section != "potential") {
        throw SystemFileError(lineno, "unknown section [" + section + "]");
      }
      continue;
    }
    if (section.empty()) throw SystemFileError(lineno, "content before the first section header");

    for (std::string_view item : detail::split(line, ';')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string_view::npos) throw SystemFileError(lineno, "expected 'key = value'");
      const std::string key(detail::trim(item.substr(0, eq)));
      const std::string_view value = detail::trim(item.substr(eq + 1));

      if (section == "system") {
        if (key == "name") {
          src.name = std::string(value);
          have_name = true;
        } else if (key == "dim") {
          std::size_t d = 0;
          auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), d);
          if (ec != std::errc{} || ptr != value.data() + value.size())
            throw SystemFileError(lineno, "dim must be a non-negative integer");
          dim = d;
        } else if (key == "coords") {
          src.coords.clear();
          for (auto c : detail::split(value, ',')) src.coords.emplace_back(detail::trim(c));
        } else {
          throw SystemFileError(lineno, "unknown key '" + key + "' in [system]");
        }
      } else if (section == "params") {
        double v = 0.0;
        std::string_view num = value;
        bool neg = !num.empty() && num.front() == '-';
        if (neg) num.remove_prefix(1);
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
        if (ec != std::errc{} || ptr != num.data() + num.size() || num.empty())
          throw SystemFileError(lineno, "parameter '" + key + "' needs a numeric value");
        src.params.emplace_back(key, neg ? -v : v);
      } else if (section == "metric") {
        auto i = detail::numbered_key(key, "row");
        if (!i) throw SystemFileError(lineno, "expected row<i> in [metric], found '" + key + "'");
        if (rows.count(*i)) throw SystemFileError(lineno, "duplicate " + key);
        rows[*i] = parse_list(value, lineno, "[metric] " + key);
      } else if (section == "potential") {
        if (key != "V") throw SystemFileError(lineno, "expected 'V =' in [potential]");
        if (src.potential) throw SystemFileError(lineno, "duplicate V");
        try {
          src.potential = parse_expression(value);
        } catch (const Error& e) {
          throw SystemFileError(lineno, std::string("[potential] V: ") + e.what());
        }
      } else if (section == "constraint") {
        if (key != "form") throw SystemFileError(lineno, "expected 'form =' in [constraint]");
        if (!constraint_open) throw SystemFileError(lineno, "one 'form =' per [constraint] section");
        src.constraints.push_back(
            parse_list(value, lineno, "[constraint] " + std::to_string(src.constraints.size() + 1)));
        constraint_open = false;
      } else if (section == "frame") {
        auto a = detail::numbered_key(key, "col");
        if (!a) throw SystemFileError(lineno, "expected col<a> in [frame], found '" + key + "'");
        if (cols.count(*a)) throw SystemFileError(lineno, "duplicate " + key);
        cols[*a] = parse_list(value, lineno, "[frame] " + key);
      }
    }
  }
  close_constraint();

  if (!have_name) throw StructuralError("[system] is missing 'name'");
  if (!dim) throw StructuralError("[system] is missing 'dim'");
  if (src.coords.size() != *dim)
    throw StructuralError("coords lists " + std::to_string(src.coords.size()) + " names but dim = " +
                          std::to_string(*dim));
  for (std::size_t i = 1; i <= rows.size(); ++i)
    if (!rows.count(i)) throw StructuralError("[metric] rows must be numbered row1..row" + std::to_string(rows.size()));
  for (auto& [i, r] : rows) src.metric.push_back(std::move(r));
  if (!cols.empty()) {
    for (std::size_t a = 1; a <= cols.size(); ++a)
      if (!cols.count(a)) throw StructuralError("[frame] columns must be numbered col1..col" + std::to_string(cols.size()));
    src.frame.emplace();
    for (auto& [a, c] : cols) src.frame->push_back(std::move(c));
  }
  return SystemDefinition(std::move(src));
}

}  // namespace nhb::dsl
