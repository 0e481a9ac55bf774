#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace gcf::data {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

// One row of a trajectory file: `time,vehicle_id,x,y`.
struct RawRecord {
  double time = 0.0;  // seconds, multiple of 0.1
  std::int64_t vehicle_id = 0;
  double x = 0.0;  // meters
  double y = 0.0;
  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

// Index of the 0.1 s frame a timestamp falls on.
std::int64_t frame_of(double time);

// Parses a trajectory CSV with header `t,id,x,y`. The result is sorted by
// (vehicle_id, time). Malformed lines raise ParseError carrying the line
// number; duplicate (vehicle_id, time) pairs raise DataError.
std::vector<RawRecord> parse_records(std::istream& in);

// Writes the header and one line per record (time with one decimal,
// coordinates with six).
void write_records(std::ostream& out, const std::vector<RawRecord>& records);

}  // namespace gcf::data
