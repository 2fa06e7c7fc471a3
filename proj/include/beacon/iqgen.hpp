#pragma once

// Synthetic labeled I/Q dataset: modulators, AWGN channel with optional
// phase/frequency/timing impairments, training-time augmentation, stratified
// splits and the binary dataset file.

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "beacon/common.hpp"

namespace beacon::iq {

using cplx = std::complex<double>;

inline constexpr std::size_t kFrameLen = 128;

/// Fixed class order. The underlying value is the class index used by every
/// network head and by the LBAP input vector.
enum class Modulation : std::uint8_t {
  qam16 = 0,
  qam64 = 1,
  psk8 = 2,
  wbfm = 3,
  bpsk = 4,
  cpfsk = 5,
  am_dsb = 6,
  gfsk = 7,
  pam4 = 8,
  qpsk = 9,
};

inline constexpr std::array<Modulation, kNumClasses> kAllModulations = {
    Modulation::qam16, Modulation::qam64, Modulation::psk8, Modulation::wbfm,
    Modulation::bpsk,  Modulation::cpfsk, Modulation::am_dsb, Modulation::gfsk,
    Modulation::pam4,  Modulation::qpsk};

std::string_view modulation_name(Modulation m);
std::optional<Modulation> parse_modulation(std::string_view name);
/// Throws FormatError for an index outside [0, kNumClasses).
Modulation modulation_from_index(std::size_t index);
inline std::size_t class_index(Modulation m) { return static_cast<std::size_t>(m); }

/// 2x128 real frame stored row-major: [0, 128) in-phase, [128, 256) quadrature.
using IqMatrix = std::array<float, 2 * kFrameLen>;

struct LabeledFrame {
  IqMatrix iq{};
  Modulation label = Modulation::qam16;
  int snr_db = 0;

  bool operator==(const LabeledFrame&) const = default;
};

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };
std::string_view split_name(Split s);

struct Impairments {
  bool phase_offset = true;
  bool freq_offset = true;
  /// Normalized carrier offset bound, cycles/sample.
  double max_cfo = 1e-3;
  bool timing_jitter = false;
  /// Fractional delay bound, samples.
  double max_delay = 0.5;
};

struct GenConfig {
  std::size_t frames_per_cell = 20;
  std::vector<int> snr_grid = default_snr_grid();
  std::size_t samples_per_symbol = 8;
  std::uint64_t seed = 1;
  Impairments impairments{};

  /// -20, -18, ..., +20 dB.
  static std::vector<int> default_snr_grid();
  /// Throws PreconditionError when the config is not usable.
  void validate() const;
};

struct Dataset {
  std::vector<int> snr_grid;
  std::size_t frames_per_cell = 0;
  std::vector<LabeledFrame> frames;
  std::vector<Split> split;

  /// Frame indices carrying the given split tag, in canonical order.
  std::vector<std::size_t> indices(Split s) const;
  bool operator==(const Dataset&) const = default;
};

/// Time-domain output of a modulator, with the symbol stream that produced it
/// for linear schemes. Symbol k is centred on sample symbol_offset + k * sps.
struct Waveform {
  std::vector<cplx> samples;
  std::vector<cplx> symbols;
  std::size_t symbol_offset = 0;
};

/// Unit-average-power baseband sequence of length n_samples.
std::vector<cplx> modulate(Modulation scheme, Rng& rng, std::size_t n_samples,
                           std::size_t samples_per_symbol);
Waveform modulate_waveform(Modulation scheme, Rng& rng, std::size_t n_samples,
                           std::size_t samples_per_symbol);

/// Unit-energy constellation of a linear scheme; empty for the others.
std::vector<cplx> constellation(Modulation scheme);

/// Root-raised-cosine taps (unit energy), length span * sps + 1.
std::vector<double> rrc_taps(double rolloff, std::size_t span_symbols, std::size_t sps);

/// One concrete channel realization.
struct ChannelParams {
  double phase = 0.0;
  double cfo = 0.0;
  double delay = 0.0;
  double noise_variance = 0.0;
};

ChannelParams draw_channel(double snr_db, const Impairments& impairments, Rng& rng);
/// Applies delay, rotation/CFO and complex AWGN of the given total variance.
std::vector<cplx> impair(std::span<const cplx> clean, const ChannelParams& params, Rng& rng);
IqMatrix to_iq(std::span<const cplx> samples);
std::vector<cplx> from_iq(const IqMatrix& iq);
IqMatrix apply_channel(std::span<const cplx> clean, double snr_db, const Impairments& impairments,
                       Rng& rng);

struct AugmentParams {
  double scale = 1.0;
  double rotation = 0.0;
  std::size_t shift = 0;
};

/// scale ~ U[0.8, 1.2], rotation ~ U[0, 2pi), shift ~ U{0..127}.
AugmentParams draw_augment(Rng& rng);
/// Scales, rotates (I + jQ) and circularly delays: out[(t + shift) % 128] = in[t].
LabeledFrame augment(const LabeledFrame& frame, const AugmentParams& params);
LabeledFrame augment(const LabeledFrame& frame, Rng& rng);

/// Per-stratum (train, val, test) counts for n frames: round(0.81 n),
/// round(0.09 n) and the remainder.
std::array<std::size_t, 3> split_counts(std::size_t n);

/// Deterministic in config.seed. Ordering is scheme-major, snr-minor; each
/// stratum draws from its own stream derive_seed(seed, stratum_index).
Dataset generate_dataset(const GenConfig& config);

std::vector<std::uint8_t> encode_dataset(const Dataset& d);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace beacon::iq
