#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace saddle {

enum class Phase { gfo, hfo, check };

const char* phase_name(Phase p);
Phase parse_phase(const std::string& s);

struct TraceRow {
  std::size_t outer = 0;
  std::size_t inner = 0;
  std::uint64_t wall_ns = 0;
  std::uint64_t ifo = 0;
  std::uint64_t iso = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  std::optional<double> min_eig;
  Phase phase = Phase::gfo;

  bool operator==(const TraceRow&) const = default;
};

inline constexpr const char* kTraceHeader = "outer,inner,wall_ns,ifo,iso,f,grad_norm,min_eig,phase";

/// Writes `# `-prefixed comment lines, the column header and one line per
/// row. Reals use 17 significant digits; an absent min_eig is an empty field.
void write_trace(std::ostream& out, const std::vector<TraceRow>& rows,
                 const std::vector<std::string>& comments = {});
/// Same, into `path`; the file is written to a sibling temporary and renamed.
void write_trace(const std::string& path, const std::vector<TraceRow>& rows,
                 const std::vector<std::string>& comments = {});

struct TraceFile {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<TraceRow> rows;
};

TraceFile read_trace(std::istream& in);
TraceFile read_trace(const std::string& path);

std::string format_real(double v);

}  // namespace saddle
