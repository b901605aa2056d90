#pragma once

// Trace serialization. CSV uses full-precision %.17g floats so that traces
// from identical runs are byte-identical and parse back exactly.

#include "nova/nova.hpp"

#include <string>

namespace nova {

enum class TraceFormat { kCsv, kJson };
TraceFormat parse_trace_format(const std::string& s);

inline constexpr const char* kTraceHeader =
    "nu,U,gamma,bestresp_dist,max_g,descent_lhs,descent_rhs,kkt,inner_iters,wall_ms";

std::string trace_to_csv(const ConvergenceTrace& trace);
/// JSON array of row objects; a max_g of -inf (no constraints) is null.
std::string trace_to_json(const ConvergenceTrace& trace);
ConvergenceTrace parse_trace_csv(const std::string& text);
ConvergenceTrace parse_trace_json(const std::string& text);

/// InputError on an empty trace, IoError when the file cannot be written.
void emit_trace(const ConvergenceTrace& trace, const std::string& path, TraceFormat format);
ConvergenceTrace read_trace(const std::string& path, TraceFormat format);

/// %.17g
std::string format_double(double v);

}  // namespace nova
