#include "gcf/data/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "gcf/errors.hpp"

namespace gcf::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line, const char* name) {
  field = trim(field);
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError(line, std::string("bad ") + name + " field '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::int64_t frame_of(double time) { return std::llround(time * 10.0); }

std::vector<RawRecord> parse_records(std::istream& in) {
  std::vector<RawRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = trim(line);
    if (s.empty()) continue;
    if (lineno == 1 && s == "t,id,x,y") continue;
    std::string_view fields[4];
    std::size_t n = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = s.find(',', start);
      if (n == 4) throw ParseError(lineno, "expected 4 fields");
      fields[n++] = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (n != 4) throw ParseError(lineno, "expected 4 fields, got " + std::to_string(n));
    RawRecord r;
    r.time = parse_field<double>(fields[0], lineno, "time");
    r.vehicle_id = parse_field<std::int64_t>(fields[1], lineno, "vehicle_id");
    r.x = parse_field<double>(fields[2], lineno, "x");
    r.y = parse_field<double>(fields[3], lineno, "y");
    if (!std::isfinite(r.time) || !std::isfinite(r.x) || !std::isfinite(r.y)) {
      throw ParseError(lineno, "non-finite value");
    }
    if (r.time < 0.0) throw ParseError(lineno, "negative time");
    if (std::abs(r.time * 10.0 - static_cast<double>(frame_of(r.time))) > 1e-6) {
      throw ParseError(lineno, "time is not a multiple of 0.1 s");
    }
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const RawRecord& a, const RawRecord& b) {
    if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
    return frame_of(a.time) < frame_of(b.time);
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].vehicle_id == out[i - 1].vehicle_id && frame_of(out[i].time) == frame_of(out[i - 1].time)) {
      throw DataError("duplicate record for vehicle " + std::to_string(out[i].vehicle_id) + " at t=" +
                      std::to_string(out[i].time));
    }
  }
  return out;
}

void write_records(std::ostream& out, const std::vector<RawRecord>& records) {
  out << "t,id,x,y\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.1f,%lld,%.6f,%.6f\n", r.time, static_cast<long long>(r.vehicle_id), r.x,
                  r.y);
    out << buf;
  }
}

}  // namespace gcf::data
