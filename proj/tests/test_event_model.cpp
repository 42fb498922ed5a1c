#include <doctest.h>

#include <random>
#include <sstream>

#include "ecal/event_model.hpp"

using namespace ecal;

TEST_CASE("text ingest maps fields directly") {
  std::istringstream in("1000,5,7,1\n2000,6,8,0\n");
  const auto events = ingest_events_text(in, {346, 260});
  REQUIRE(events.size() == 2);
  CHECK(events[0].x == 5);
  CHECK(events[0].y == 7);
  CHECK(events[0].t_us == 1000);
  CHECK(events[0].p == 1);
  CHECK(events[1].p == -1);
}

TEST_CASE("text ingest skips comments and blank lines") {
  std::istringstream in("# header\n\n1000,5,7,1\n");
  CHECK(ingest_events_text(in, {346, 260}).size() == 1);
}

TEST_CASE("x out of bounds is rejected") {
  std::istringstream in("1000,346,7,1\n");
  CHECK_THROWS_AS(ingest_events_text(in, {346, 260}), IngestError);
}

TEST_CASE("timestamp regression reports the offending line") {
  std::istringstream in("1000,1,1,1\n2000,1,1,1\n1500,1,1,1\n3000,1,1,1\n");
  try {
    ingest_events_text(in, {346, 260});
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("binary round-trip preserves every event") {
  std::vector<Event> events;
  std::mt19937 rng(11);
  std::int64_t t = 0;
  for (int i = 0; i < 500; ++i) {
    t += rng() % 100;
    events.push_back({static_cast<std::int32_t>(rng() % 346), static_cast<std::int32_t>(rng() % 260), t,
                      static_cast<std::int8_t>((rng() % 2) ? 1 : -1)});
  }
  std::stringstream buf;
  write_events_binary(buf, events);
  const auto back = ingest_events_binary(buf, {346, 260});
  REQUIRE(back.size() == events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(back[i].x == events[i].x);
    CHECK(back[i].y == events[i].y);
    CHECK(back[i].t_us == events[i].t_us);
    CHECK(back[i].p == events[i].p);
  }
}

TEST_CASE("text round-trip preserves every event") {
  std::vector<Event> events{{0, 0, 0, 1}, {345, 259, 10, -1}, {10, 20, 30, 1}};
  std::stringstream buf;
  write_events_text(buf, events);
  const auto back = ingest_events_text(buf, {346, 260});
  REQUIRE(back.size() == events.size());
  CHECK(back[1].x == 345);
  CHECK(back[1].p == -1);
}

namespace {

std::vector<Event> uniform_stream(std::size_t n, std::int64_t span_us) {
  std::vector<Event> events;
  for (std::size_t i = 0; i < n; ++i) {
    events.push_back({static_cast<std::int32_t>(i % 300), static_cast<std::int32_t>(i % 200),
                      static_cast<std::int64_t>(i * span_us / (n - 1)), 1});
  }
  return events;
}

}  // namespace

TEST_CASE("windowing: 12000 events over 99 ms give 3 full windows") {
  const auto events = uniform_stream(12000, 99000);
  const auto windows = build_windows(events, {4000, 33000});
  REQUIRE(windows.size() == 3);
  for (const auto& w : windows) CHECK(w.events.size() >= 4000);
}

TEST_CASE("windowing: below the event minimum yields nothing") {
  const auto events = uniform_stream(3999, 99000);
  CHECK(build_windows(events, {4000, 33000}).empty());
}

TEST_CASE("windowing: single event with min_events=1 clamps the duration") {
  const std::vector<Event> events{{5, 5, 42, 1}};
  const auto windows = build_windows(events, {1, 33000});
  REQUIRE(windows.size() == 1);
  CHECK(windows[0].duration_us == 1);
}

TEST_CASE("windowing is deterministic") {
  const auto events = uniform_stream(9000, 80000);
  const auto a = build_windows(events, {4000, 33000});
  const auto b = build_windows(events, {4000, 33000});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].t1_us == b[i].t1_us);
    CHECK(a[i].events.size() == b[i].events.size());
  }
}

TEST_CASE("normalization hits the midpoint and endpoints") {
  SpatioTemporalWindow w;
  w.t1_us = 1000;
  w.tk_us = 3000;
  w.duration_us = 2000;
  w.events = {{0, 0, 1000, 1}, {173, 130, 2000, 1}, {345, 259, 3000, 1}};
  const auto norm = normalize(w, {346, 260});
  REQUIRE(norm.size() == 3);
  CHECK(norm[0].t == doctest::Approx(0.0));
  CHECK(norm[1].x == doctest::Approx(0.5));
  CHECK(norm[1].y == doctest::Approx(0.5));
  CHECK(norm[1].t == doctest::Approx(0.5));
  CHECK(norm[2].t == doctest::Approx(1.0));
}

TEST_CASE("normalization round-trips up to integer truncation") {
  SpatioTemporalWindow w;
  w.t1_us = 500;
  w.tk_us = 2500;
  w.duration_us = 2000;
  w.events = {{17, 201, 700, 1}, {331, 4, 2400, -1}};
  const SensorGeometry g{346, 260};
  const auto norm = normalize(w, g);
  for (std::size_t i = 0; i < norm.size(); ++i) {
    CHECK(static_cast<std::int32_t>(norm[i].x * g.width) == w.events[i].x);
    CHECK(static_cast<std::int32_t>(norm[i].y * g.height) == w.events[i].y);
    CHECK(w.t1_us + static_cast<std::int64_t>(norm[i].t * w.duration_us) == w.events[i].t_us);
  }
}

TEST_CASE("normalization is resolution-agnostic") {
  // The same relative positions on two sensors normalize identically.
  SpatioTemporalWindow small, large;
  small.t1_us = large.t1_us = 0;
  small.tk_us = large.tk_us = 1000;
  small.duration_us = large.duration_us = 1000;
  small.events = {{173, 130, 500, 1}, {0, 65, 250, 1}};
  large.events = {{320, 240, 500, 1}, {0, 120, 250, 1}};
  const auto a = normalize(small, {346, 260});
  const auto b = normalize(large, {640, 480});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == doctest::Approx(b[i].x));
    CHECK(a[i].y == doctest::Approx(b[i].y));
    CHECK(a[i].t == doctest::Approx(b[i].t));
  }
}
