#include "ecal/event_model.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ecal {

namespace {

bool parse_i64(std::string_view s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

void validate(const Event& e, const SensorGeometry& g, std::size_t line) {
  if (e.x < 0 || e.x >= g.width || e.y < 0 || e.y >= g.height) {
    throw IngestError("event pixel (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                          ") outside sensor " + std::to_string(g.width) + "x" + std::to_string(g.height) +
                          " at line " + std::to_string(line),
                      line);
  }
}

}  // namespace

std::vector<Event> ingest_events_text(std::istream& in, const SensorGeometry& geometry) {
  std::vector<Event> events;
  std::string line;
  std::size_t lineno = 0;
  std::int64_t prev_t = std::numeric_limits<std::int64_t>::min();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::int64_t fields[4];
    std::size_t begin = 0;
    int n = 0;
    for (; n < 4; ++n) {
      std::size_t comma = line.find(',', begin);
      std::string_view tok(line.data() + begin, (comma == std::string::npos ? line.size() : comma) - begin);
      if (!parse_i64(tok, fields[n])) break;
      if (comma == std::string::npos) {
        ++n;
        break;
      }
      begin = comma + 1;
    }
    if (n != 4) {
      throw IngestError("malformed event record at line " + std::to_string(lineno) + ": '" + line + "'", lineno);
    }
    if (fields[3] != 0 && fields[3] != 1 && fields[3] != -1) {
      throw IngestError("polarity must be 0 or 1 at line " + std::to_string(lineno), lineno);
    }
    Event e;
    e.t_us = fields[0];
    e.x = static_cast<std::int32_t>(fields[1]);
    e.y = static_cast<std::int32_t>(fields[2]);
    e.p = fields[3] > 0 ? std::int8_t{1} : std::int8_t{-1};
    validate(e, geometry, lineno);
    if (e.t_us < prev_t) {
      throw IngestError("timestamp regression at line " + std::to_string(lineno), lineno);
    }
    prev_t = e.t_us;
    events.push_back(e);
  }
  return events;
}

std::vector<Event> ingest_events_binary(std::istream& in, const SensorGeometry& geometry) {
  std::vector<Event> events;
  std::int64_t prev_t = std::numeric_limits<std::int64_t>::min();
  std::size_t record = 0;
  char buf[13];
  while (in.read(buf, sizeof(buf))) {
    ++record;
    std::uint64_t t;
    std::uint16_t x, y;
    std::int8_t p;
    std::memcpy(&t, buf, 8);
    std::memcpy(&x, buf + 8, 2);
    std::memcpy(&y, buf + 10, 2);
    std::memcpy(&p, buf + 12, 1);
    Event e;
    e.t_us = static_cast<std::int64_t>(t);
    e.x = x;
    e.y = y;
    e.p = p > 0 ? std::int8_t{1} : std::int8_t{-1};
    validate(e, geometry, record);
    if (e.t_us < prev_t) {
      throw IngestError("timestamp regression at record " + std::to_string(record), record);
    }
    prev_t = e.t_us;
    events.push_back(e);
  }
  if (in.gcount() != 0) {
    throw IngestError("truncated binary record at offset " + std::to_string(record * sizeof(buf)), record);
  }
  return events;
}

std::vector<Event> ingest_events_file(const std::string& path, const SensorGeometry& geometry) {
  const bool binary = path.size() > 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open event file: " + path);
  return binary ? ingest_events_binary(in, geometry) : ingest_events_text(in, geometry);
}

void write_events_text(std::ostream& out, std::span<const Event> events) {
  for (const Event& e : events) {
    out << e.t_us << ',' << e.x << ',' << e.y << ',' << (e.p > 0 ? 1 : 0) << '\n';
  }
}

void write_events_binary(std::ostream& out, std::span<const Event> events) {
  char buf[13];
  for (const Event& e : events) {
    const std::uint64_t t = static_cast<std::uint64_t>(e.t_us);
    const std::uint16_t x = static_cast<std::uint16_t>(e.x);
    const std::uint16_t y = static_cast<std::uint16_t>(e.y);
    std::memcpy(buf, &t, 8);
    std::memcpy(buf + 8, &x, 2);
    std::memcpy(buf + 10, &y, 2);
    std::memcpy(buf + 12, &e.p, 1);
    out.write(buf, sizeof(buf));
  }
}

void write_events_file(const std::string& path, std::span<const Event> events) {
  const bool binary = path.size() > 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  if (binary)
    write_events_binary(out, events);
  else
    write_events_text(out, events);
}

std::vector<SpatioTemporalWindow> build_windows(std::span<const Event> events, const WindowConfig& cfg) {
  std::vector<SpatioTemporalWindow> windows;
  if (events.empty() || cfg.min_events < 1 || cfg.step_us <= 0) return windows;

  const std::int64_t t_first = events.front().t_us;
  const std::int64_t t_last = events.back().t_us;
  const std::int64_t duration = t_last - t_first;
  // Number of step-spaced anchors; a lone event still yields one anchor.
  const std::int64_t anchors = std::max<std::int64_t>(duration / cfg.step_us, 1);

  std::size_t lo = 0;
  for (std::int64_t a = 0; a < anchors; ++a) {
    const std::int64_t anchor = t_first + a * cfg.step_us;
    while (lo < events.size() && events[lo].t_us < anchor) ++lo;
    if (lo >= events.size()) break;

    // At least one step wide; extend past that only until min_events is met.
    std::size_t hi = lo;
    const std::int64_t nominal_end = anchor + cfg.step_us;
    while (hi < events.size() && events[hi].t_us < nominal_end) ++hi;
    while (hi - lo < cfg.min_events && hi < events.size()) ++hi;
    if (hi - lo < cfg.min_events) continue;  // stream ended short

    SpatioTemporalWindow w;
    w.events.assign(events.begin() + lo, events.begin() + hi);
    w.t1_us = w.events.front().t_us;
    w.tk_us = w.events.back().t_us;
    w.duration_us = std::max<std::int64_t>(w.tk_us - w.t1_us, 1);
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<NormalizedEvent> normalize(const SpatioTemporalWindow& window, const SensorGeometry& geometry) {
  std::vector<NormalizedEvent> out;
  out.reserve(window.events.size());
  const double inv_w = 1.0 / geometry.width;
  const double inv_h = 1.0 / geometry.height;
  const double inv_dt = 1.0 / static_cast<double>(window.duration_us);
  for (std::size_t i = 0; i < window.events.size(); ++i) {
    const Event& e = window.events[i];
    out.push_back({e.x * inv_w, e.y * inv_h, static_cast<double>(e.t_us - window.t1_us) * inv_dt, i});
  }
  return out;
}

}  // namespace ecal
