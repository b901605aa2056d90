#include "nova/trace_io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace nova {

using nlohmann::json;

TraceFormat parse_trace_format(const std::string& s) {
  if (s == "csv") return TraceFormat::kCsv;
  if (s == "json") return TraceFormat::kJson;
  throw ConfigError("unknown trace format '" + s + "' (expected csv or json)");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trace_to_csv(const ConvergenceTrace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& r : trace.rows) {
    out += std::to_string(r.nu);
    for (double v : {r.U, r.gamma, r.bestresp_dist, r.max_g, r.descent_lhs, r.descent_rhs, r.kkt}) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    out += std::to_string(r.inner_iters);
    out += ',';
    out += format_double(r.wall_ms);
    out += '\n';
  }
  return out;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_neg_inf(const json& v) {
  return v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>();
}

double parse_field(const std::string& s, int line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw InputError("trace line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::string trace_to_json(const ConvergenceTrace& trace) {
  json arr = json::array();
  for (const auto& r : trace.rows) {
    arr.push_back({{"nu", r.nu},
                   {"U", finite_or_null(r.U)},
                   {"gamma", r.gamma},
                   {"bestresp_dist", r.bestresp_dist},
                   {"max_g", finite_or_null(r.max_g)},
                   {"descent_lhs", r.descent_lhs},
                   {"descent_rhs", r.descent_rhs},
                   {"kkt", r.kkt},
                   {"inner_iters", r.inner_iters},
                   {"wall_ms", r.wall_ms}});
  }
  return arr.dump(2) + "\n";
}

ConvergenceTrace parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw InputError("trace CSV header mismatch");
  ConvergenceTrace t;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw InputError("trace line " + std::to_string(lineno) + ": expected 10 fields");
    TraceRow r;
    r.nu = static_cast<int>(parse_field(f[0], lineno));
    r.U = parse_field(f[1], lineno);
    r.gamma = parse_field(f[2], lineno);
    r.bestresp_dist = parse_field(f[3], lineno);
    r.max_g = parse_field(f[4], lineno);
    r.descent_lhs = parse_field(f[5], lineno);
    r.descent_rhs = parse_field(f[6], lineno);
    r.kkt = parse_field(f[7], lineno);
    r.inner_iters = static_cast<int>(parse_field(f[8], lineno));
    r.wall_ms = parse_field(f[9], lineno);
    t.rows.push_back(r);
  }
  return t;
}

ConvergenceTrace parse_trace_json(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("trace JSON: ") + e.what());
  }
  if (!arr.is_array()) throw InputError("trace JSON must be an array");
  ConvergenceTrace t;
  for (const auto& o : arr) {
    TraceRow r;
    r.nu = o.at("nu").get<int>();
    r.U = number_or_neg_inf(o.at("U"));
    r.gamma = o.at("gamma").get<double>();
    r.bestresp_dist = o.at("bestresp_dist").get<double>();
    r.max_g = number_or_neg_inf(o.at("max_g"));
    r.descent_lhs = o.at("descent_lhs").get<double>();
    r.descent_rhs = o.at("descent_rhs").get<double>();
    r.kkt = o.at("kkt").get<double>();
    r.inner_iters = o.at("inner_iters").get<int>();
    r.wall_ms = o.at("wall_ms").get<double>();
    t.rows.push_back(r);
  }
  return t;
}

void emit_trace(const ConvergenceTrace& trace, const std::string& path, TraceFormat format) {
  if (trace.rows.empty()) throw InputError("refusing to write an empty trace");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << (format == TraceFormat::kCsv ? trace_to_csv(trace) : trace_to_json(trace));
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

ConvergenceTrace read_trace(const std::string& path, TraceFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return format == TraceFormat::kCsv ? parse_trace_csv(ss.str()) : parse_trace_json(ss.str());
}

}  // namespace nova
