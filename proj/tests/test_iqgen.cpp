#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "beacon/binary_io.hpp"
#include "beacon/iqgen.hpp"

using namespace beacon;
using namespace beacon::iq;

namespace {

double mean_power(std::span<const cplx> s) {
  double p = 0.0;
  for (auto v : s) p += std::norm(v);
  return p / static_cast<double>(s.size());
}

GenConfig small_config() {
  GenConfig c;
  c.frames_per_cell = 10;
  c.snr_grid = {-10, 0, 10};
  return c;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("class order is fixed") {
  CHECK(kAllModulations.size() == 10);
  CHECK(modulation_name(Modulation::qam16) == "QAM16");
  CHECK(class_index(Modulation::qpsk) == 9);
  CHECK(class_index(Modulation::wbfm) == 3);
  CHECK(parse_modulation("8PSK") == Modulation::psk8);
  CHECK_FALSE(parse_modulation("OOK").has_value());
  CHECK_THROWS_AS(modulation_from_index(10), FormatError);
}

TEST_CASE("every scheme has unit mean power") {
  for (auto m : kAllModulations) {
    Rng rng(derive_seed(7, class_index(m)));
    const auto s = modulate(m, rng, 10000, 8);
    REQUIRE(s.size() == 10000);
    CHECK(std::abs(mean_power(s) - 1.0) < 0.01);
  }
}

TEST_CASE("BPSK symbols are +-1 and PAM4 has four symmetric levels") {
  Rng rng(3);
  const auto w = modulate_waveform(Modulation::bpsk, rng, 128, 8);
  for (auto s : w.symbols) {
    CHECK(std::abs(s.imag()) < 1e-12);
    CHECK(std::abs(std::abs(s.real()) - 1.0) < 1e-12);
  }
  const auto pam = constellation(Modulation::pam4);
  std::set<double> levels;
  for (auto s : pam) {
    CHECK(std::abs(s.imag()) < 1e-12);
    levels.insert(s.real());
  }
  REQUIRE(levels.size() == 4);
  CHECK(std::abs(*levels.begin() + *levels.rbegin()) < 1e-12);
  CHECK(std::abs(*std::next(levels.begin()) + *std::prev(levels.end(), 2)) < 1e-12);
  CHECK(constellation(Modulation::wbfm).empty());
}

TEST_CASE("modulate rejects a sequence shorter than one symbol") {
  Rng rng(1);
  CHECK_THROWS_AS(modulate(Modulation::qpsk, rng, 4, 8), PreconditionError);
}

TEST_CASE("RRC taps have unit energy") {
  const auto taps = rrc_taps(0.35, 4, 8);
  CHECK(taps.size() == 33);
  double e = 0.0;
  for (double t : taps) e += t * t;
  CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empirical SNR at 0 dB is within 0.5 dB") {
  Impairments none{false, false, 0.0, false, 0.0};
  Rng rng(11);
  double sig = 0.0;
  double noise = 0.0;
  for (int f = 0; f < 1000; ++f) {
    const auto clean = modulate(Modulation::qpsk, rng, kFrameLen, 8);
    const auto out = from_iq(apply_channel(clean, 0.0, none, rng));
    for (std::size_t i = 0; i < kFrameLen; ++i) {
      sig += std::norm(clean[i]);
      noise += std::norm(out[i] - clean[i]);
    }
  }
  CHECK(std::abs(10.0 * std::log10(sig / noise)) < 0.5);
}

TEST_CASE("noise power at 20 dB is about 0.01") {
  Impairments none{false, false, 0.0, false, 0.0};
  Rng rng(12);
  for (int f = 0; f < 20; ++f) {
    const auto clean = modulate(Modulation::bpsk, rng, kFrameLen, 8);
    const auto out = from_iq(apply_channel(clean, 20.0, none, rng));
    double n = 0.0;
    for (std::size_t i = 0; i < kFrameLen; ++i) n += std::norm(out[i] - clean[i]);
    CHECK(std::abs(n / kFrameLen - 0.01) < 0.2 * 0.01);
  }
}

TEST_CASE("phase offset alone preserves power exactly") {
  Rng rng(5);
  const auto clean = modulate(Modulation::qam16, rng, kFrameLen, 8);
  ChannelParams p;
  p.phase = 1.234;
  const auto out = impair(clean, p, rng);
  CHECK(mean_power(out) == doctest::Approx(mean_power(clean)).epsilon(1e-12));
}

TEST_CASE("apply_channel rejects non-finite input") {
  Rng rng(5);
  auto clean = modulate(Modulation::qpsk, rng, kFrameLen, 8);
  CHECK_THROWS_AS(apply_channel(clean, std::nan(""), {}, rng), PreconditionError);
  clean[3] = {std::numeric_limits<double>::infinity(), 0.0};
  CHECK_THROWS_AS(apply_channel(clean, 10.0, {}, rng), PreconditionError);
}

TEST_CASE("augmentation identity, pi rotation and label safety") {
  Rng rng(9);
  LabeledFrame f;
  f.label = Modulation::gfsk;
  f.snr_db = 6;
  f.iq = to_iq(modulate(Modulation::gfsk, rng, kFrameLen, 8));
  CHECK(augment(f, AugmentParams{1.0, 0.0, 0}) == f);
  const auto neg = augment(f, AugmentParams{1.0, std::numbers::pi, 0});
  for (std::size_t i = 0; i < f.iq.size(); ++i) CHECK(neg.iq[i] == doctest::Approx(-f.iq[i]).epsilon(1e-6));
  const auto shifted = augment(f, AugmentParams{1.0, 0.0, 5});
  CHECK(shifted.iq[5] == f.iq[0]);
  CHECK(shifted.iq[kFrameLen + 4] == f.iq[2 * kFrameLen - 1]);
  for (int i = 0; i < 100; ++i) {
    const auto a = augment(f, rng);
    CHECK(a.label == f.label);
    CHECK(a.snr_db == f.snr_db);
  }
}

TEST_CASE("split counts") {
  CHECK(split_counts(20) == std::array<std::size_t, 3>{16, 2, 2});
  CHECK(split_counts(100) == std::array<std::size_t, 3>{81, 9, 10});
  for (std::size_t n = 10; n <= 200; ++n) {
    const auto c = split_counts(n);
    CHECK(c[0] + c[1] + c[2] == n);
    CHECK(c[1] > 0);
    CHECK(c[2] > 0);
    CHECK(std::abs(static_cast<double>(c[0]) - 0.81 * n) <= 1.0);
    CHECK(std::abs(static_cast<double>(c[1]) - 0.09 * n) <= 1.0);
  }
}

TEST_CASE("dataset generation is sized, ordered, stratified and deterministic") {
  GenConfig full;
  CHECK(full.snr_grid.size() == 21);
  CHECK(full.frames_per_cell * full.snr_grid.size() * kNumClasses == 4200);

  const auto cfg = small_config();
  const auto a = generate_dataset(cfg);
  const auto b = generate_dataset(cfg);
  CHECK(a == b);
  CHECK(encode_dataset(a) == encode_dataset(b));
  REQUIRE(a.frames.size() == 10 * 3 * 10);
  for (std::size_t cell = 0; cell < 30; ++cell) {
    std::array<int, 3> tags{};
    for (std::size_t f = 0; f < 10; ++f) {
      const std::size_t i = cell * 10 + f;
      CHECK(class_index(a.frames[i].label) == cell / 3);
      CHECK(a.frames[i].snr_db == cfg.snr_grid[cell % 3]);
      ++tags[static_cast<int>(a.split[i])];
      for (float v : a.frames[i].iq) CHECK(std::isfinite(v));
    }
    CHECK(tags == std::array<int, 3>{8, 1, 1});
  }
  auto other = cfg;
  other.seed = 2;
  CHECK_FALSE(generate_dataset(other) == a);
}

TEST_CASE("generation rejects bad configs") {
  auto c = small_config();
  c.frames_per_cell = 0;
  CHECK_THROWS_AS(generate_dataset(c), PreconditionError);
  c = small_config();
  c.snr_grid = {0, 0};
  CHECK_THROWS_AS(generate_dataset(c), PreconditionError);
  c.snr_grid = {};
  CHECK_THROWS_AS(generate_dataset(c), PreconditionError);
}

TEST_CASE("dataset file round trip and corruption errors") {
  const auto d = generate_dataset(small_config());
  const auto path = temp_file("beacon_test_dataset.bin");
  save_dataset(d, path);
  CHECK(load_dataset(path) == d);

  const auto bytes = encode_dataset(d);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "BEACONDS");
  auto truncated = bytes;
  truncated.resize(bytes.size() - 100);
  CHECK_THROWS_AS(decode_dataset(truncated), TruncatedError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(magic), FormatError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(decode_dataset(flipped), ChecksumError);
  CHECK_THROWS_AS(load_dataset(temp_file("beacon_no_such_file.bin")), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("modulate rejects an unknown scheme") {
  Rng rng(1);
  CHECK_THROWS_AS(modulate(static_cast<Modulation>(12), rng, 128, 8), PreconditionError);
}
