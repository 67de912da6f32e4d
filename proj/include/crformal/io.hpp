#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "series.hpp"

namespace crformal {

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string join(const std::vector<std::string>& parts,
                        const std::string& sep) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out += sep;
    out += parts[k];
  }
  return out;
}

inline Rational parse_rational(const std::string& text) {
  if (text.empty()) throw std::runtime_error("empty rational literal");
  Rational q;
  if (q.set_str(text, 10) != 0)
    throw std::runtime_error("bad rational literal: " + text);
  q.canonicalize();
  return q;
}

/// Read the next nonblank line; false at end of stream.
inline bool next_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    std::string::size_type k = line.find_first_not_of(" \t\r");
    if (k == std::string::npos) continue;
    if (line.back() == '\r') line.pop_back();
    return true;
  }
  return false;
}

/// Tokenize a "head key=value key=value ..." line.
inline std::map<std::string, std::string> parse_kv_line(
    const std::string& line, const std::string& expected_head) {
  std::istringstream in(line);
  std::string head;
  in >> head;
  if (head != expected_head)
    throw std::runtime_error("expected '" + expected_head + "' record, got: " +
                             line);
  std::map<std::string, std::string> kv;
  std::string token;
  while (in >> token) {
    std::string::size_type eq = token.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("malformed token '" + token + "' in: " + line);
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return kv;
}

inline const std::string& require_key(
    const std::map<std::string, std::string>& kv, const std::string& key,
    const std::string& context) {
  auto it = kv.find(key);
  if (it == kv.end())
    throw std::runtime_error("missing " + key + "= in " + context + " record");
  return it->second;
}

inline int parse_int(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("bad integer for " + what + ": " + text);
  }
}

}  // namespace detail

/// Canonical text form "a/b+c/d*i": both parts always present, each in
/// lowest terms with positive denominator and the sign on the numerator.
inline std::string to_string(const Scalar& c) {
  std::string out = c.re.get_num().get_str() + "/" + c.re.get_den().get_str();
  if (sgn(c.im) < 0) {
    Rational a = -c.im;
    out += "-" + a.get_num().get_str() + "/" + a.get_den().get_str() + "*i";
  } else {
    out += "+" + c.im.get_num().get_str() + "/" + c.im.get_den().get_str() +
           "*i";
  }
  return out;
}

inline Scalar parse_scalar(std::string text) {
  // Tolerate a redundant sign pair produced by naive writers.
  for (std::string::size_type k; (k = text.find("+-")) != std::string::npos;)
    text.erase(k, 1);
  if (text.size() < 4 || text.compare(text.size() - 2, 2, "*i") != 0)
    throw std::runtime_error("bad scalar literal: " + text);
  std::string body = text.substr(0, text.size() - 2);
  std::string::size_type split = std::string::npos;
  for (std::string::size_type k = 1; k < body.size(); ++k) {
    if (body[k] == '+' || body[k] == '-') {
      if (split != std::string::npos)
        throw std::runtime_error("bad scalar literal: " + text);
      split = k;
    }
  }
  if (split == std::string::npos)
    throw std::runtime_error("bad scalar literal: " + text);
  Rational re = detail::parse_rational(body.substr(0, split));
  Rational im = detail::parse_rational(body.substr(split + 1));
  if (body[split] == '-') im = -im;
  return {re, im};
}

struct SeriesRecord {
  std::string tag;
  PowerSeries series;
};

/// One header line, then one line per term in ascending graded
/// lexicographic order.  The tag token is omitted when the tag is empty.
inline void write_series_record(std::ostream& os, const PowerSeries& s,
                                const std::string& tag = "") {
  os << "series ";
  if (!tag.empty()) os << "tag=" << tag << " ";
  os << "vars=" << detail::join(s.vars(), ",") << " order="
     << (s.is_exact() ? std::string("exact") : std::to_string(s.known_order()))
     << " terms=" << s.terms().size() << "\n";
  for (const auto& [e, c] : s.terms()) {
    os << "exp=[";
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (k) os << ",";
      os << e[k];
    }
    os << "] coeff=" << to_string(c) << "\n";
  }
}

inline std::string series_to_string(const PowerSeries& s,
                                    const std::string& tag = "") {
  std::ostringstream os;
  write_series_record(os, s, tag);
  return os.str();
}

inline SeriesRecord read_series_record(std::istream& is) {
  std::string line;
  if (!detail::next_line(is, line))
    throw std::runtime_error("expected a series record, found end of input");
  auto kv = detail::parse_kv_line(line, "series");
  SeriesRecord rec;
  auto tag_it = kv.find("tag");
  if (tag_it != kv.end()) rec.tag = tag_it->second;
  std::vector<std::string> vars =
      detail::split(detail::require_key(kv, "vars", "series"), ',');
  const std::string& order_text = detail::require_key(kv, "order", "series");
  int order = order_text == "exact"
                  ? kExactOrder
                  : detail::parse_int(order_text, "order");
  int nterms = detail::parse_int(detail::require_key(kv, "terms", "series"),
                                 "terms");
  if (nterms < 0) throw std::runtime_error("negative term count");
  PowerSeries s(vars, order);
  Multiindex prev;
  for (int t = 0; t < nterms; ++t) {
    if (!detail::next_line(is, line))
      throw std::runtime_error("series record truncated");
    std::istringstream in(line);
    std::string etok, ctok;
    in >> etok >> ctok;
    if (etok.compare(0, 5, "exp=[") != 0 || etok.back() != ']' ||
        ctok.compare(0, 6, "coeff=") != 0)
      throw std::runtime_error("malformed term line: " + line);
    std::string inner = etok.substr(5, etok.size() - 6);
    Multiindex e;
    for (const std::string& part : detail::split(inner, ','))
      e.push_back(detail::parse_int(part, "exponent"));
    if (e.size() != vars.size())
      throw std::runtime_error("exponent arity mismatch: " + line);
    for (int v : e)
      if (v < 0) throw std::runtime_error("negative exponent: " + line);
    if (degree(e) >= order)
      throw std::runtime_error("term at or above the known order: " + line);
    if (!prev.empty() && !grlex_less(prev, e))
      throw std::runtime_error("terms out of order: " + line);
    Scalar c = parse_scalar(ctok.substr(6));
    if (c.is_zero()) throw std::runtime_error("zero coefficient: " + line);
    s.set_coefficient(e, std::move(c));
    prev = std::move(e);
  }
  rec.series = std::move(s);
  return rec;
}

}  // namespace crformal
