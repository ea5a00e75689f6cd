#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ssda/rng.hpp"
#include "ssda/windowing.hpp"

using namespace ssda;

namespace {

Trial make_trial(long C, long T, Rng& rng) {
  Trial t;
  t.trial_id = "t";
  t.channels = C;
  t.samples = T;
  t.data.resize(static_cast<size_t>(C * T));
  for (auto& v : t.data) v = rng.uniform(-50.0, 50.0);
  return t;
}

// Independent reference slicer: walks indices one by one.
std::vector<std::vector<double>> reference_slices(const Trial& t, long m, long p) {
  std::vector<std::vector<double>> out;
  for (long start = 0; start + m <= t.samples; start += p) {
    std::vector<double> w;
    for (long c = 0; c < t.channels; ++c)
      for (long x = start; x < start + m; ++x) w.push_back(t.at(c, x));
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

TEST_CASE("window counts match the paper protocols") {
  // PhysioNet: T=496, m=400, p=20 -> 5; BCI IV 2a: T=1000, m=400, p=50 -> 13.
  CHECK(window_count(496, 400, 20) == 5);
  CHECK(window_count(1000, 400, 50) == 13);
  CHECK(window_count(400, 400, 20) == 1);
}

TEST_CASE("single window equals the whole trial") {
  Rng rng(5);
  Trial t = make_trial(3, 24, rng);
  auto ws = slice_trial(t, 24, 7);
  REQUIRE(ws.count() == 1);
  for (long c = 0; c < 3; ++c)
    for (long x = 0; x < 24; ++x) CHECK(ws.windows[0].at(c, x) == t.at(c, x));
}

TEST_CASE("non-overlapping windows tile the first n*m samples") {
  Rng rng(6);
  Trial t = make_trial(2, 53, rng);
  long m = 10;
  auto ws = slice_trial(t, m, m);
  REQUIRE(ws.count() == 5);
  for (long i = 0; i < ws.count(); ++i)
    for (long c = 0; c < 2; ++c)
      for (long x = 0; x < m; ++x) CHECK(ws.windows[(size_t)i].at(c, x) == t.at(c, i * m + x));
}

TEST_CASE("oracle equivalence on 200 random (T, m, p) triples") {
  Rng rng(7);
  for (int it = 0; it < 200; ++it) {
    long T = 5 + rng.below(120);
    long m = 1 + rng.below(T);
    long p = 1 + rng.below(30);
    long C = 1 + rng.below(4);
    Trial t = make_trial(C, T, rng);
    auto ws = slice_trial(t, m, p);
    auto ref = reference_slices(t, m, p);
    REQUIRE(ws.count() == static_cast<long>(ref.size()));
    CHECK(ws.count() == window_count(T, m, p));
    for (size_t i = 0; i < ref.size(); ++i) {
      REQUIRE(ws.windows[i].shape == std::vector<long>{C, m});
      for (size_t j = 0; j < ref[i].size(); ++j) CHECK(ws.windows[i].data[j] == ref[i][j]);
    }
  }
}

TEST_CASE("slice_trial rejects m > T") {
  Rng rng(8);
  Trial t = make_trial(2, 10, rng);
  CHECK_THROWS(slice_trial(t, 11, 1));
  CHECK_THROWS(slice_trial(t, 5, 0));
}
