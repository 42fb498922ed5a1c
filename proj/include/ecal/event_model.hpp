#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecal {

/// One asynchronous sensor spike. Timestamps are integer microseconds;
/// polarity is -1 (off) or +1 (on).
struct Event {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int64_t t_us = 0;
  std::int8_t p = 1;
};

struct SensorGeometry {
  int width = 346;
  int height = 260;
};

/// A slab of consecutive events treated as one observation of the pattern.
/// duration_us is clamped to >= 1 so normalization is always defined.
struct SpatioTemporalWindow {
  std::vector<Event> events;
  std::int64_t t1_us = 0;
  std::int64_t tk_us = 0;
  std::int64_t duration_us = 1;
};

/// Event with spatial stamps divided by the sensor resolution and the
/// temporal stamp mapped to [0,1] over the window span.
struct NormalizedEvent {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
  std::size_t source_index = 0;
};

class IngestError : public std::runtime_error {
 public:
  IngestError(std::string what, std::size_t line) : std::runtime_error(std::move(what)), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct WindowConfig {
  std::size_t min_events = 4000;
  std::int64_t step_us = 33000;
};

/// Parses the text event format: one `t_us,x,y,p` record per line with p in
/// {0,1}, `#` comments and blank lines skipped. Validates pixel bounds and
/// timestamp monotonicity (throws IngestError with the offending line).
std::vector<Event> ingest_events_text(std::istream& in, const SensorGeometry& geometry);

/// Binary format: little-endian records (u64 t_us, u16 x, u16 y, i8 p) with
/// p in {0,1} or {-1,+1}.
std::vector<Event> ingest_events_binary(std::istream& in, const SensorGeometry& geometry);

/// Dispatches on extension: ".bin" -> binary, anything else -> text.
std::vector<Event> ingest_events_file(const std::string& path, const SensorGeometry& geometry);

void write_events_text(std::ostream& out, std::span<const Event> events);
void write_events_binary(std::ostream& out, std::span<const Event> events);
void write_events_file(const std::string& path, std::span<const Event> events);

/// Slices an ordered stream into windows anchored every step_us. A window
/// spans at least one step and extends further only until it holds
/// min_events; anchors that cannot reach min_events before stream end are
/// dropped. Anchor count is floor(stream duration / step).
std::vector<SpatioTemporalWindow> build_windows(std::span<const Event> events, const WindowConfig& cfg);

/// x/W, y/H, (t - t1)/duration per event, preserving order and indices.
std::vector<NormalizedEvent> normalize(const SpatioTemporalWindow& window, const SensorGeometry& geometry);

}  // namespace ecal
