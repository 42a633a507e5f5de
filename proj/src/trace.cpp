#include "saddle/trace.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "saddle/errors.hpp"

namespace saddle {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::gfo: return "gfo";
    case Phase::hfo: return "hfo";
    case Phase::check: return "check";
  }
  return "?";
}

Phase parse_phase(const std::string& s) {
  if (s == "gfo") return Phase::gfo;
  if (s == "hfo") return Phase::hfo;
  if (s == "check") return Phase::check;
  throw IoError("unknown trace phase '" + s + "'");
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace(std::ostream& out, const std::vector<TraceRow>& rows,
                 const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << r.outer << ',' << r.inner << ',' << r.wall_ns << ',' << r.ifo << ',' << r.iso << ','
        << format_real(r.f) << ',' << format_real(r.grad_norm) << ','
        << (r.min_eig ? format_real(*r.min_eig) : std::string()) << ',' << phase_name(r.phase)
        << '\n';
  }
}

void write_trace(const std::string& path, const std::vector<TraceRow>& rows,
                 const std::vector<std::string>& comments) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    write_trace(out, rows, comments);
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move trace into place at '" + path + "': " + ec.message());
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    // stod rejects "nan"/"inf" spellings from some printf implementations
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw IoError("trace line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

std::uint64_t parse_uint(const std::string& s, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("trace line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
}

}  // namespace

TraceFile read_trace(std::istream& in) {
  TraceFile tf;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      tf.comments.push_back(line.size() > 2 && line[1] == ' ' ? line.substr(2) : line.substr(1));
      continue;
    }
    if (!header) {
      if (line != kTraceHeader) throw IoError("trace: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 9) throw IoError("trace line " + std::to_string(line_no) + ": expected 9 fields");
    TraceRow r;
    r.outer = parse_uint(f[0], line_no);
    r.inner = parse_uint(f[1], line_no);
    r.wall_ns = parse_uint(f[2], line_no);
    r.ifo = parse_uint(f[3], line_no);
    r.iso = parse_uint(f[4], line_no);
    r.f = parse_real(f[5], line_no);
    r.grad_norm = parse_real(f[6], line_no);
    if (!f[7].empty()) r.min_eig = parse_real(f[7], line_no);
    r.phase = parse_phase(f[8]);
    tf.rows.push_back(std::move(r));
  }
  if (!header) throw IoError("trace: missing header line");
  return tf;
}

TraceFile read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace '" + path + "'");
  try {
    return read_trace(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace saddle
