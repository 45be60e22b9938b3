#include "revfilt/trace.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "revfilt/error.hpp"

namespace revfilt {

std::vector<std::string> IterationTrace::flag_list() const {
  std::vector<std::string> out;
  for (const auto& r : records)
    for (const auto& f : r.flags) out.push_back(std::to_string(r.k) + ":" + f);
  return out;
}

std::optional<double> IterationTrace::initial_psnr() const {
  if (records.empty()) return std::nullopt;
  return records.front().psnr_db;
}

std::optional<double> IterationTrace::final_psnr() const {
  if (records.empty()) return std::nullopt;
  return records.back().psnr_db;
}

namespace {

// Shortest representation that round-trips.
std::string fmt(const std::optional<double>& v) {
  if (!v) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), *v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_opt(const std::string& field, int line) {
  if (field.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw FormatError("trace CSV line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
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

}  // namespace

void write_trace_csv(const IterationTrace& trace, std::ostream& os) {
  os << kTraceCsvHeader << '\n';
  for (const auto& r : trace.records) {
    os << r.k << ',' << fmt(r.psnr_db) << ',' << fmt(r.residual) << ',' << r.filter_calls << ','
       << fmt(r.elapsed_ms) << ',' << fmt(r.step_param) << ',';
    for (std::size_t i = 0; i < r.flags.size(); ++i) os << (i ? ";" : "") << r.flags[i];
    os << '\n';
  }
}

void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_trace_csv(trace, out);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

IterationTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trace '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader) {
    throw FormatError("'" + path.string() + "' is not a trace CSV (header mismatch)");
  }
  IterationTrace trace;
  trace.image_id = path.stem().string();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) {
      throw FormatError("trace CSV line " + std::to_string(lineno) + ": expected 7 fields");
    }
    IterationRecord r;
    r.k = static_cast<int>(parse_opt(f[0], lineno).value_or(0));
    r.psnr_db = parse_opt(f[1], lineno);
    r.residual = parse_opt(f[2], lineno);
    r.filter_calls = static_cast<std::uint64_t>(parse_opt(f[3], lineno).value_or(0));
    r.elapsed_ms = parse_opt(f[4], lineno);
    r.step_param = parse_opt(f[5], lineno);
    if (!f[6].empty()) r.flags = split(f[6], ';');
    trace.records.push_back(std::move(r));
  }
  return trace;
}

void write_plot_data(const IterationTrace& trace, std::ostream& os) {
  os << "# k psnr_db\n";
  for (const auto& r : trace.records) {
    if (r.psnr_db) os << r.k << ' ' << fmt(r.psnr_db) << '\n';
  }
}

}  // namespace revfilt
