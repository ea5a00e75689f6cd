#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>

#include "ssda/dataset.hpp"
#include "ssda/edf.hpp"
#include "ssda/rng.hpp"
#include "ssda/synth.hpp"

using namespace ssda;

namespace {

// Byte-level EDF fixture builder. Every field is written at its standard
// offset; tests below assert against values recomputed here by hand, not
// against the parser.
struct EdfBuilder {
  struct Sig {
    std::string label;
    double pmin, pmax;
    long dmin, dmax;
    long spr;  // samples per record
  };
  std::vector<Sig> sigs;
  long n_records = 1;
  double record_dur = 1.0;
  std::string version = "0";

  static void put_field(std::vector<uint8_t>& b, size_t off, size_t len, const std::string& s) {
    for (size_t i = 0; i < len; ++i)
      b[off + i] = i < s.size() ? static_cast<uint8_t>(s[i]) : ' ';
  }

  static std::string num(double v) {
    char buf[32];
    if (v == std::floor(v) && std::abs(v) < 1e8)
      std::snprintf(buf, sizeof(buf), "%ld", static_cast<long>(v));
    else
      std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
  }

  std::vector<uint8_t> header() const {
    size_t ns = sigs.size();
    std::vector<uint8_t> b(256 + ns * 256, ' ');
    put_field(b, 0, 8, version);
    put_field(b, 8, 80, "X X X X");
    put_field(b, 88, 80, "Startdate 01-JAN-2002 X X X");
    put_field(b, 168, 8, "01.01.02");
    put_field(b, 176, 8, "00.00.00");
    put_field(b, 184, 8, num(static_cast<double>(256 + ns * 256)));
    put_field(b, 192, 44, "EDF+C");
    put_field(b, 236, 8, num(static_cast<double>(n_records)));
    put_field(b, 244, 8, num(record_dur));
    put_field(b, 252, 4, num(static_cast<double>(ns)));
    size_t o = 256;
    for (size_t s = 0; s < ns; ++s) put_field(b, o + s * 16, 16, sigs[s].label);
    o += ns * 16;
    o += ns * 80;  // transducer
    for (size_t s = 0; s < ns; ++s) put_field(b, o + s * 8, 8, "uV");
    o += ns * 8;
    for (size_t s = 0; s < ns; ++s) put_field(b, o + s * 8, 8, num(sigs[s].pmin));
    o += ns * 8;
    for (size_t s = 0; s < ns; ++s) put_field(b, o + s * 8, 8, num(sigs[s].pmax));
    o += ns * 8;
    for (size_t s = 0; s < ns; ++s)
      put_field(b, o + s * 8, 8, num(static_cast<double>(sigs[s].dmin)));
    o += ns * 8;
    for (size_t s = 0; s < ns; ++s)
      put_field(b, o + s * 8, 8, num(static_cast<double>(sigs[s].dmax)));
    o += ns * 8;
    o += ns * 80;  // prefiltering
    for (size_t s = 0; s < ns; ++s)
      put_field(b, o + s * 8, 8, num(static_cast<double>(sigs[s].spr)));
    return b;
  }

  // records[r][s] = raw bytes for signal s in record r.
  std::vector<uint8_t> build(const std::vector<std::vector<std::vector<uint8_t>>>& records) const {
    std::vector<uint8_t> b = header();
    for (const auto& rec : records)
      for (const auto& sig_bytes : rec) b.insert(b.end(), sig_bytes.begin(), sig_bytes.end());
    return b;
  }
};

std::vector<uint8_t> samples_le(const std::vector<int16_t>& vals) {
  std::vector<uint8_t> out;
  for (int16_t v : vals) {
    out.push_back(static_cast<uint8_t>(static_cast<uint16_t>(v) & 0xFF));
    out.push_back(static_cast<uint8_t>(static_cast<uint16_t>(v) >> 8));
  }
  return out;
}

std::vector<uint8_t> tal_bytes(const std::string& text, size_t len) {
  std::vector<uint8_t> out(text.begin(), text.end());
  out.resize(len, 0x00);
  return out;
}

// Independent closed-form digital->physical map.
double phys(double d, double pmin, double pmax, double dmin, double dmax) {
  return pmin + (d - dmin) * (pmax - pmin) / (dmax - dmin);
}

}  // namespace

TEST_CASE("EDF fixture parses bit-exact against the hex oracle") {
  EdfBuilder bld;
  bld.sigs = {{"C3", -1.0, 1.0, -32768, 32767, 4}, {"C4", -100.0, 100.0, -2048, 2047, 4}};
  bld.n_records = 2;
  std::vector<int16_t> c3_r0 = {0, 100, -100, 32767};
  std::vector<int16_t> c4_r0 = {0, 1024, -2048, 2047};
  std::vector<int16_t> c3_r1 = {-32768, 1, 2, 3};
  std::vector<int16_t> c4_r1 = {5, -5, 7, -7};
  auto bytes = bld.build({{samples_le(c3_r0), samples_le(c4_r0)},
                          {samples_le(c3_r1), samples_le(c4_r1)}});

  // Signal-count field sits at bytes 252..255.
  CHECK(std::string(reinterpret_cast<char*>(&bytes[252]), 4) == "2   ");

  Recording rec = parse_edf(bytes);
  CHECK(rec.channels == 2);
  CHECK(rec.length == 8);
  CHECK(rec.fs == 4.0);
  CHECK(rec.channel_labels == std::vector<std::string>{"C3", "C4"});
  CHECK(rec.annotations.empty());

  // Digital 0 with physical [-1,1], digital [-32768,32767]:
  // 2*32768/65535 - 1 = 1/65535.
  CHECK(rec.at(0, 0) == doctest::Approx(1.0 / 65535.0).epsilon(1e-12));

  std::vector<int16_t> c3_all = c3_r0;
  c3_all.insert(c3_all.end(), c3_r1.begin(), c3_r1.end());
  std::vector<int16_t> c4_all = c4_r0;
  c4_all.insert(c4_all.end(), c4_r1.begin(), c4_r1.end());
  for (long i = 0; i < 8; ++i) {
    CHECK(rec.at(0, i) == phys(c3_all[(size_t)i], -1, 1, -32768, 32767));
    CHECK(rec.at(1, i) == phys(c4_all[(size_t)i], -100, 100, -2048, 2047));
  }
  CHECK(rec.at(0, 7) == doctest::Approx(phys(3, -1, 1, -32768, 32767)));
}

TEST_CASE("EDF annotations channel is decoded and excluded from signals") {
  EdfBuilder bld;
  bld.sigs = {{"C3", -1.0, 1.0, -32768, 32767, 4},
              {"EDF Annotations", -1, 1, -32768, 32767, 20}};
  bld.n_records = 2;
  auto rec0 = tal_bytes(std::string("+0\x14\x14") + '\0' + "+0.5\x14T1\x14", 40);
  auto rec1 = tal_bytes(std::string("+1\x14\x14") + '\0' + "+1.25\x14T2\x14\x14T3\x14", 40);
  auto bytes = bld.build({{samples_le({1, 2, 3, 4}), rec0}, {samples_le({5, 6, 7, 8}), rec1}});

  Recording rec = parse_edf(bytes);
  CHECK(rec.channels == 1);
  CHECK(rec.channel_labels == std::vector<std::string>{"C3"});
  REQUIRE(rec.annotations.size() == 3);
  CHECK(rec.annotations[0].onset_s == 0.5);
  CHECK(rec.annotations[0].label == "T1");
  CHECK(rec.annotations[1].onset_s == 1.25);
  CHECK(rec.annotations[1].label == "T2");
  CHECK(rec.annotations[2].label == "T3");
}

TEST_CASE("EDF with empty annotation stream yields no events") {
  EdfBuilder bld;
  bld.sigs = {{"C3", -1.0, 1.0, -32768, 32767, 4},
              {"EDF Annotations", -1, 1, -32768, 32767, 8}};
  auto rec0 = tal_bytes("+0\x14\x14", 16);
  auto bytes = bld.build({{samples_le({1, 2, 3, 4}), rec0}});
  Recording rec = parse_edf(bytes);
  CHECK(rec.annotations.empty());
}

TEST_CASE("malformed EDF fixtures produce the specified errors") {
  EdfBuilder bld;
  bld.sigs = {{"C3", -1.0, 1.0, -32768, 32767, 4}};

  SUBCASE("truncated header") {
    auto bytes = bld.build({{samples_le({1, 2, 3, 4})}});
    bytes.resize(100);
    CHECK_THROWS_WITH(parse_edf(bytes), doctest::Contains("truncated header"));
  }
  SUBCASE("truncated signal headers") {
    auto bytes = bld.header();
    bytes.resize(300);
    CHECK_THROWS_WITH(parse_edf(bytes), doctest::Contains("truncated header"));
  }
  SUBCASE("non-numeric header field") {
    auto bytes = bld.build({{samples_le({1, 2, 3, 4})}});
    EdfBuilder::put_field(bytes, 252, 4, "abcd");
    CHECK_THROWS_WITH(parse_edf(bytes), doctest::Contains("non-numeric"));
  }
  SUBCASE("record-size mismatch") {
    auto bytes = bld.build({{samples_le({1, 2, 3, 4})}});
    bytes.push_back(0);
    CHECK_THROWS_WITH(parse_edf(bytes), doctest::Contains("record-size mismatch"));
  }
  SUBCASE("unsupported version / sample width") {
    bld.version = "255";
    auto bytes = bld.build({{samples_le({1, 2, 3, 4})}});
    CHECK_THROWS_WITH(parse_edf(bytes), doctest::Contains("unsupported"));
  }
}

TEST_CASE("array format round-trips losslessly") {
  Rng rng(31);
  Recording rec;
  rec.channels = 22;
  rec.length = 1000;
  rec.fs = 250.0;
  for (long c = 0; c < rec.channels; ++c) rec.channel_labels.push_back("ch" + std::to_string(c));
  rec.signals.resize(static_cast<size_t>(rec.channels * rec.length));
  for (auto& v : rec.signals) v = static_cast<double>(static_cast<float>(rng.uniform(-80, 80)));
  rec.annotations = {{1.0, "T1"}, {2.5, "T2"}, {3.75, "T1"}};

  std::string path = "roundtrip.eega";
  write_array_file(rec, path);
  Recording back = read_array_file(path);
  CHECK(back.channels == rec.channels);
  CHECK(back.length == rec.length);
  CHECK(back.fs == rec.fs);
  CHECK(back.channel_labels == rec.channel_labels);
  REQUIRE(back.signals.size() == rec.signals.size());
  for (size_t i = 0; i < rec.signals.size(); ++i) CHECK(back.signals[i] == rec.signals[i]);
  REQUIRE(back.annotations.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back.annotations[i].onset_s == rec.annotations[i].onset_s);
    CHECK(back.annotations[i].label == rec.annotations[i].label);
  }
  std::remove(path.c_str());
}

TEST_CASE("array format rejects bad magic and bad channel count") {
  std::string path = "bad.eega";
  {
    FILE* f = fopen(path.c_str(), "wb");
    fwrite("NOPE", 1, 4, f);
    fclose(f);
  }
  CHECK_THROWS_WITH(read_array_file(path), doctest::Contains("bad magic"));
  {
    FILE* f = fopen(path.c_str(), "wb");
    fwrite("EEGA", 1, 4, f);
    uint8_t ver = 1;
    uint32_t c = 0;
    fwrite(&ver, 1, 1, f);
    fwrite(&c, 4, 1, f);
    fclose(f);
  }
  CHECK_THROWS_WITH(read_array_file(path), doctest::Contains("bad channel count"));
  std::remove(path.c_str());
}

namespace {
Recording make_rec(double fs, double seconds, std::vector<Annotation> anns) {
  Recording rec;
  rec.fs = fs;
  rec.channels = 3;
  rec.length = static_cast<long>(fs * seconds);
  for (long c = 0; c < 3; ++c) rec.channel_labels.push_back("ch" + std::to_string(c));
  rec.signals.resize(static_cast<size_t>(rec.channels * rec.length));
  for (size_t i = 0; i < rec.signals.size(); ++i) rec.signals[i] = static_cast<double>(i % 977);
  rec.annotations = std::move(anns);
  return rec;
}
}  // namespace

TEST_CASE("epoch cuts PhysioNet- and BCI-shaped trials") {
  auto rec = make_rec(160.0, 30.0, {{1.0, "T1"}, {6.0, "T2"}, {12.0, "T0"}, {20.0, "T1"}});
  std::map<std::string, int> events = {{"T1", 0}, {"T2", 1}};
  auto res = epoch(rec, events, 3.1, "s001", "r01");
  REQUIRE(res.trials.size() == 3);
  CHECK(res.dropped == 0);
  for (const auto& t : res.trials) {
    CHECK(t.samples == 496);  // 3.1 s * 160 Hz
    CHECK(t.channels == 3);
    CHECK(t.class_count == 2);
  }
  CHECK(res.trials[0].label == 0);
  CHECK(res.trials[1].label == 1);
  CHECK(res.trials[0].trial_id == "s001/r01/0");
  // Sample alignment: trial 0 starts at onset 1.0 s = sample 160.
  CHECK(res.trials[0].at(0, 0) == rec.at(0, 160));
  CHECK(res.trials[0].at(2, 495) == rec.at(2, 160 + 495));

  auto rec2 = make_rec(250.0, 20.0, {{0.5, "cue"}});
  auto res2 = epoch(rec2, {{"cue", 2}}, 4.0, "s", "r");
  REQUIRE(res2.trials.size() == 1);
  CHECK(res2.trials[0].samples == 1000);  // 4 s * 250 Hz
  CHECK(res2.trials[0].class_count == 3);
}

TEST_CASE("epoch drops out-of-range trials and counts them") {
  auto rec = make_rec(100.0, 5.0, {{0.0, "T1"}, {4.9, "T1"}});
  auto res = epoch(rec, {{"T1", 0}}, 1.0, "s", "r");
  CHECK(res.trials.size() == 1);
  CHECK(res.dropped == 1);
}

TEST_CASE("epoch with no matching annotations yields an empty list") {
  auto rec = make_rec(100.0, 5.0, {{1.0, "rest"}});
  auto res = epoch(rec, {{"T1", 0}}, 1.0, "s", "r");
  CHECK(res.trials.empty());
}

TEST_CASE("epoch honors the onset offset") {
  auto rec = make_rec(100.0, 5.0, {{1.0, "T1"}});
  auto res = epoch(rec, {{"T1", 0}}, 1.0, "s", "r", 50.0);  // +50 ms = +5 samples
  REQUIRE(res.trials.size() == 1);
  CHECK(res.trials[0].at(0, 0) == rec.at(0, 105));
}

TEST_CASE("dataset container round-trips") {
  SynthSpec spec;
  spec.subject_count = 2;
  spec.trials_per_subject = 4;
  spec.channels = 3;
  spec.samples = 32;
  spec.class_count = 2;
  spec.snr = 2.0;
  spec.seed = 44;
  auto [trials, gt] = synth_generate(spec);
  (void)gt;
  std::string path = "ds_roundtrip.eegd";
  save_dataset(trials, path);
  auto back = load_dataset(path);
  REQUIRE(back.size() == trials.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    CHECK(back[i].subject_id == trials[i].subject_id);
    CHECK(back[i].trial_id == trials[i].trial_id);
    CHECK(back[i].label == trials[i].label);
    CHECK(back[i].class_count == trials[i].class_count);
    CHECK(back[i].channels == trials[i].channels);
    CHECK(back[i].samples == trials[i].samples);
    for (size_t j = 0; j < trials[i].data.size(); ++j)
      CHECK(back[i].data[j] == static_cast<double>(static_cast<float>(trials[i].data[j])));
  }
  std::remove(path.c_str());
}

TEST_CASE("synthetic generator is deterministic and balanced") {
  SynthSpec spec;
  spec.subject_count = 3;
  spec.trials_per_subject = 9;
  spec.channels = 4;
  spec.samples = 40;
  spec.class_count = 2;
  spec.snr = 4.0;
  spec.seed = 99;
  auto [a, gta] = synth_generate(spec);
  auto [b, gtb] = synth_generate(spec);
  (void)gta;
  (void)gtb;
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].trial_id == b[i].trial_id);
    CHECK(a[i].label == b[i].label);
    for (size_t j = 0; j < a[i].data.size(); ++j) CHECK(a[i].data[j] == b[i].data[j]);
  }
  // Balance within +-1 per subject.
  std::map<std::string, std::map<int, int>> counts;
  for (const auto& t : a) counts[t.subject_id][t.label]++;
  for (const auto& [subj, c] : counts) {
    (void)subj;
    CHECK(std::abs(c.at(0) - c.at(1)) <= 1);
  }
}

TEST_CASE("noise-free synthetic classes pass the nearest-centroid oracle") {
  SynthSpec spec;
  spec.subject_count = 2;
  spec.trials_per_subject = 10;
  spec.channels = 6;
  spec.samples = 48;
  spec.class_count = 2;
  spec.snr = SynthSpec::kSnrClean;
  spec.seed = 123;
  auto [trials, gt] = synth_generate(spec);
  (void)gt;

  long K = 2, D = 6 * 48;
  std::vector<std::vector<double>> centroid((size_t)K, std::vector<double>((size_t)D, 0.0));
  std::vector<long> n((size_t)K, 0);
  for (const auto& t : trials) {
    for (long j = 0; j < D; ++j) centroid[(size_t)t.label][(size_t)j] += t.data[(size_t)j];
    n[(size_t)t.label]++;
  }
  for (long k = 0; k < K; ++k)
    for (long j = 0; j < D; ++j) centroid[(size_t)k][(size_t)j] /= static_cast<double>(n[(size_t)k]);
  long correct = 0;
  for (const auto& t : trials) {
    double best = 1e300;
    int arg = -1;
    for (long k = 0; k < K; ++k) {
      double d2 = 0;
      for (long j = 0; j < D; ++j) {
        double d = t.data[(size_t)j] - centroid[(size_t)k][(size_t)j];
        d2 += d * d;
      }
      if (d2 < best) {
        best = d2;
        arg = static_cast<int>(k);
      }
    }
    if (arg == t.label) ++correct;
  }
  CHECK(correct == static_cast<long>(trials.size()));
}

TEST_CASE("pure-noise synthetic data carries no signal") {
  SynthSpec spec;
  spec.subject_count = 1;
  spec.trials_per_subject = 6;
  spec.channels = 3;
  spec.samples = 50;
  spec.class_count = 2;
  spec.snr = 0.0;
  spec.seed = 5;
  auto [trials, gt] = synth_generate(spec);
  (void)gt;
  // Unit-variance white noise: mean ~0, variance ~1.
  double mean = 0, var = 0;
  long n = 0;
  for (const auto& t : trials)
    for (double v : t.data) {
      mean += v;
      ++n;
    }
  mean /= static_cast<double>(n);
  for (const auto& t : trials)
    for (double v : t.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  CHECK(std::abs(mean) < 0.1);
  CHECK(var == doctest::Approx(1.0).epsilon(0.15));
}
