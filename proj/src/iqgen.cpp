#include "beacon/iqgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "beacon/binary_io.hpp"

namespace beacon::iq {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRrcRolloff = 0.35;
constexpr std::size_t kRrcSpan = 4;
constexpr double kFskIndex = 0.5;
constexpr double kGfskBt = 0.35;
constexpr std::size_t kGaussSpan = 4;
constexpr std::size_t kToneCount = 8;
constexpr double kMaxToneFreq = 0.1;
constexpr double kFmDeviation = 0.1;
constexpr double kAmIndex = 0.5;

constexpr std::array<std::string_view, kNumClasses> kNames = {
    "QAM16", "QAM64", "8PSK", "WBFM", "BPSK", "CPFSK", "AM-DSB", "GFSK", "PAM4", "QPSK"};

constexpr std::array<char, 8> kDatasetMagic = {'B', 'E', 'A', 'C', 'O', 'N', 'D', 'S'};
constexpr std::uint16_t kDatasetVersion = 1;
constexpr std::size_t kFrameRecordBytes = 2 * kFrameLen * 4 + 1 + 2 + 1;

void normalize_power(std::vector<cplx>& s) {
  double power = 0.0;
  for (const auto& v : s) power += std::norm(v);
  power /= static_cast<double>(s.size());
  if (power <= 0.0) return;
  const double g = 1.0 / std::sqrt(power);
  for (auto& v : s) v *= g;
}

std::vector<double> gaussian_taps(double bt, std::size_t span, std::size_t sps) {
  const std::size_t n = span * sps + 1;
  std::vector<double> taps(n);
  const double c = 2.0 * kPi * kPi * bt * bt / std::log(2.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - static_cast<double>(n - 1) / 2.0) /
                     static_cast<double>(sps);
    taps[i] = std::exp(-c * t * t);
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

Waveform linear_waveform(Modulation scheme, Rng& rng, std::size_t n, std::size_t sps) {
  const auto points = constellation(scheme);
  const std::size_t visible = (n + sps - 1) / sps;
  const std::size_t n_sym = visible + kRrcSpan + 1;
  std::vector<cplx> symbols(n_sym);
  for (auto& s : symbols) s = points[uniform_index(rng, points.size())];

  const auto taps = rrc_taps(kRrcRolloff, kRrcSpan, sps);
  const std::size_t start = kRrcSpan * sps;
  std::vector<cplx> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t m = start + j;
    cplx acc{};
    // y[m] = sum_k sym[k] * taps[m - k*sps]
    const std::size_t k_hi = m / sps;
    for (std::size_t k = (m >= taps.size() - 1 ? (m - (taps.size() - 1) + sps - 1) / sps : 0);
         k <= k_hi && k < n_sym; ++k) {
      acc += symbols[k] * taps[m - k * sps];
    }
    out[j] = acc;
  }
  normalize_power(out);

  Waveform w;
  w.samples = std::move(out);
  // Symbol k peaks at m = k*sps + span*sps/2, i.e. visible index k*sps - span*sps/2.
  const std::size_t first = kRrcSpan / 2;
  w.symbols.assign(symbols.begin() + static_cast<std::ptrdiff_t>(first),
                   symbols.begin() + static_cast<std::ptrdiff_t>(first + visible));
  w.symbol_offset = 0;
  return w;
}

std::vector<cplx> fsk_waveform(bool gaussian, Rng& rng, std::size_t n, std::size_t sps) {
  const std::size_t lead = kGaussSpan * sps;
  const std::size_t total = n + lead;
  const std::size_t n_bits = total / sps + 2;
  std::vector<double> nrz(total);
  std::vector<double> bits(n_bits);
  for (auto& b : bits) b = (rng() >> 63) ? 1.0 : -1.0;
  for (std::size_t i = 0; i < total; ++i) nrz[i] = bits[i / sps];

  std::vector<double> freq = nrz;
  if (gaussian) {
    const auto g = gaussian_taps(kGfskBt, kGaussSpan, sps);
    const std::size_t half = g.size() / 2;
    for (std::size_t i = 0; i < total; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < g.size(); ++t) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + t) - static_cast<std::ptrdiff_t>(half);
        const std::size_t idx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
            src, 0, static_cast<std::ptrdiff_t>(total) - 1));
        acc += g[t] * nrz[idx];
      }
      freq[i] = acc;
    }
  }
  std::vector<cplx> out(n);
  double phase = uniform(rng, 0.0, 2.0 * kPi);
  for (std::size_t i = 0; i < total; ++i) {
    if (i >= lead) out[i - lead] = std::polar(1.0, phase);
    phase += kPi * kFskIndex * freq[i] / static_cast<double>(sps);
  }
  return out;
}

std::vector<double> analog_message(Rng& rng, std::size_t n) {
  std::array<double, kToneCount> f{};
  std::array<double, kToneCount> ph{};
  for (std::size_t i = 0; i < kToneCount; ++i) {
    f[i] = uniform(rng, 0.0, kMaxToneFreq);
    ph[i] = uniform(rng, 0.0, 2.0 * kPi);
  }
  std::vector<double> m(n);
  double peak = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kToneCount; ++i) {
      acc += std::cos(2.0 * kPi * f[i] * static_cast<double>(t) + ph[i]);
    }
    m[t] = acc;
    peak = std::max(peak, std::abs(acc));
  }
  if (peak > 0.0) {
    for (auto& v : m) v /= peak;
  }
  return m;
}

}  // namespace

std::string_view modulation_name(Modulation m) { return kNames[class_index(m)]; }

std::optional<Modulation> parse_modulation(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Modulation>(i);
  }
  return std::nullopt;
}

Modulation modulation_from_index(std::size_t index) {
  if (index >= kNumClasses) throw FormatError("class index out of range: " + std::to_string(index));
  return static_cast<Modulation>(index);
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<int> GenConfig::default_snr_grid() {
  std::vector<int> g;
  for (int s = -20; s <= 20; s += 2) g.push_back(s);
  return g;
}

void GenConfig::validate() const {
  if (frames_per_cell == 0) throw PreconditionError("frames_per_scheme_per_snr must be positive");
  if (snr_grid.empty()) throw PreconditionError("snr grid is empty");
  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    if (snr_grid[i] < -32768 || snr_grid[i] > 32767) throw PreconditionError("snr out of i16 range");
    if (i > 0 && snr_grid[i] <= snr_grid[i - 1])
      throw PreconditionError("snr grid must be strictly increasing");
  }
  if (samples_per_symbol == 0 || samples_per_symbol > kFrameLen)
    throw PreconditionError("samples_per_symbol must be in [1, 128]");
  if (!(impairments.max_cfo >= 0.0) || !(impairments.max_delay >= 0.0) ||
      impairments.max_delay >= 1.0)
    throw PreconditionError("impairment ranges out of domain");
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

std::vector<cplx> constellation(Modulation scheme) {
  std::vector<cplx> pts;
  switch (scheme) {
    case Modulation::bpsk:
      pts = {{-1.0, 0.0}, {1.0, 0.0}};
      break;
    case Modulation::qpsk:
      for (int k = 0; k < 4; ++k) pts.push_back(std::polar(1.0, kPi / 4 + k * kPi / 2));
      break;
    case Modulation::psk8:
      for (int k = 0; k < 8; ++k) pts.push_back(std::polar(1.0, k * kPi / 4));
      break;
    case Modulation::pam4:
      for (double a : {-3.0, -1.0, 1.0, 3.0}) pts.emplace_back(a / std::sqrt(5.0), 0.0);
      break;
    case Modulation::qam16:
    case Modulation::qam64: {
      const int side = scheme == Modulation::qam16 ? 4 : 8;
      const double norm = std::sqrt(scheme == Modulation::qam16 ? 10.0 : 42.0);
      for (int i = 0; i < side; ++i) {
        for (int q = 0; q < side; ++q) {
          pts.emplace_back((2 * i - side + 1) / norm, (2 * q - side + 1) / norm);
        }
      }
      break;
    }
    default:
      break;
  }
  return pts;
}

std::vector<double> rrc_taps(double rolloff, std::size_t span_symbols, std::size_t sps) {
  const std::size_t n = span_symbols * sps + 1;
  std::vector<double> h(n);
  const double b = rolloff;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - static_cast<double>(n - 1) / 2.0) /
                     static_cast<double>(sps);
    if (std::abs(t) < 1e-12) {
      h[i] = 1.0 + b * (4.0 / kPi - 1.0);
    } else if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
      h[i] = b / std::sqrt(2.0) *
             ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) + (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
    } else {
      const double num = std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b));
      const double den = kPi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
      h[i] = num / den;
    }
  }
  double energy = 0.0;
  for (double v : h) energy += v * v;
  for (auto& v : h) v /= std::sqrt(energy);
  return h;
}

Waveform modulate_waveform(Modulation scheme, Rng& rng, std::size_t n_samples,
                           std::size_t samples_per_symbol) {
  if (samples_per_symbol == 0 || n_samples < samples_per_symbol)
    throw PreconditionError("modulate: need n_samples >= samples_per_symbol > 0");
  if (class_index(scheme) >= kNumClasses) throw PreconditionError("modulate: unknown scheme");

  Waveform w;
  switch (scheme) {
    case Modulation::bpsk:
    case Modulation::qpsk:
    case Modulation::psk8:
    case Modulation::pam4:
    case Modulation::qam16:
    case Modulation::qam64:
      return linear_waveform(scheme, rng, n_samples, samples_per_symbol);
    case Modulation::cpfsk:
      w.samples = fsk_waveform(false, rng, n_samples, samples_per_symbol);
      break;
    case Modulation::gfsk:
      w.samples = fsk_waveform(true, rng, n_samples, samples_per_symbol);
      break;
    case Modulation::wbfm: {
      const auto m = analog_message(rng, n_samples);
      w.samples.resize(n_samples);
      double phase = uniform(rng, 0.0, 2.0 * kPi);
      for (std::size_t t = 0; t < n_samples; ++t) {
        w.samples[t] = std::polar(1.0, phase);
        phase += 2.0 * kPi * kFmDeviation * m[t];
      }
      break;
    }
    case Modulation::am_dsb: {
      const auto m = analog_message(rng, n_samples);
      w.samples.resize(n_samples);
      for (std::size_t t = 0; t < n_samples; ++t) w.samples[t] = {1.0 + kAmIndex * m[t], 0.0};
      break;
    }
  }
  normalize_power(w.samples);
  return w;
}

std::vector<cplx> modulate(Modulation scheme, Rng& rng, std::size_t n_samples,
                           std::size_t samples_per_symbol) {
  return modulate_waveform(scheme, rng, n_samples, samples_per_symbol).samples;
}

ChannelParams draw_channel(double snr_db, const Impairments& imp, Rng& rng) {
  if (!std::isfinite(snr_db)) throw PreconditionError("snr_db must be finite");
  ChannelParams p;
  if (imp.phase_offset) p.phase = uniform(rng, 0.0, 2.0 * kPi);
  if (imp.freq_offset) p.cfo = uniform(rng, -imp.max_cfo, imp.max_cfo);
  if (imp.timing_jitter) p.delay = uniform(rng, 0.0, imp.max_delay);
  p.noise_variance = std::pow(10.0, -snr_db / 10.0);
  return p;
}

std::vector<cplx> impair(std::span<const cplx> clean, const ChannelParams& p, Rng& rng) {
  for (const auto& v : clean) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw PreconditionError("channel input contains non-finite samples");
  }
  std::vector<cplx> out(clean.size());
  for (std::size_t n = 0; n < clean.size(); ++n) {
    cplx s = clean[n];
    if (p.delay != 0.0) {
      const cplx prev = n > 0 ? clean[n - 1] : clean[0];
      s = (1.0 - p.delay) * clean[n] + p.delay * prev;
    }
    if (p.phase != 0.0 || p.cfo != 0.0) {
      s *= std::polar(1.0, p.phase + 2.0 * kPi * p.cfo * static_cast<double>(n));
    }
    out[n] = s;
  }
  if (p.noise_variance > 0.0) {
    const double sigma = std::sqrt(p.noise_variance / 2.0);
    for (auto& v : out) {
      const double ni = sigma * gaussian(rng);
      const double nq = sigma * gaussian(rng);
      v += cplx(ni, nq);
    }
  }
  return out;
}

IqMatrix to_iq(std::span<const cplx> samples) {
  if (samples.size() != kFrameLen) throw DimensionError("frame must have 128 samples");
  IqMatrix iq{};
  for (std::size_t t = 0; t < kFrameLen; ++t) {
    iq[t] = static_cast<float>(samples[t].real());
    iq[kFrameLen + t] = static_cast<float>(samples[t].imag());
  }
  return iq;
}

std::vector<cplx> from_iq(const IqMatrix& iq) {
  std::vector<cplx> s(kFrameLen);
  for (std::size_t t = 0; t < kFrameLen; ++t) s[t] = {iq[t], iq[kFrameLen + t]};
  return s;
}

IqMatrix apply_channel(std::span<const cplx> clean, double snr_db, const Impairments& impairments,
                       Rng& rng) {
  if (clean.size() != kFrameLen) throw DimensionError("channel input must have 128 samples");
  const auto params = draw_channel(snr_db, impairments, rng);
  return to_iq(impair(clean, params, rng));
}

AugmentParams draw_augment(Rng& rng) {
  AugmentParams a;
  a.scale = uniform(rng, 0.8, 1.2);
  a.rotation = uniform(rng, 0.0, 2.0 * kPi);
  a.shift = uniform_index(rng, kFrameLen);
  return a;
}

LabeledFrame augment(const LabeledFrame& frame, const AugmentParams& a) {
  LabeledFrame out = frame;
  const double c = a.scale * std::cos(a.rotation);
  const double s = a.scale * std::sin(a.rotation);
  for (std::size_t t = 0; t < kFrameLen; ++t) {
    const double i = frame.iq[t];
    const double q = frame.iq[kFrameLen + t];
    const std::size_t dst = (t + a.shift) % kFrameLen;
    out.iq[dst] = static_cast<float>(i * c - q * s);
    out.iq[kFrameLen + dst] = static_cast<float>(i * s + q * c);
  }
  return out;
}

LabeledFrame augment(const LabeledFrame& frame, Rng& rng) { return augment(frame, draw_augment(rng)); }

std::array<std::size_t, 3> split_counts(std::size_t n) {
  const auto train = static_cast<std::size_t>(std::llround(0.81 * static_cast<double>(n)));
  const auto val = std::min(n - train, static_cast<std::size_t>(std::llround(0.09 * static_cast<double>(n))));
  return {train, val, n - train - val};
}

Dataset generate_dataset(const GenConfig& config) {
  config.validate();
  Dataset d;
  d.snr_grid = config.snr_grid;
  d.frames_per_cell = config.frames_per_cell;
  const std::size_t n_snr = config.snr_grid.size();
  d.frames.reserve(kNumClasses * n_snr * config.frames_per_cell);
  const auto counts = split_counts(config.frames_per_cell);

  for (std::size_t m = 0; m < kNumClasses; ++m) {
    for (std::size_t si = 0; si < n_snr; ++si) {
      Rng rng(derive_seed(config.seed, m * n_snr + si));
      const auto scheme = static_cast<Modulation>(m);
      const int snr = config.snr_grid[si];
      for (std::size_t f = 0; f < config.frames_per_cell; ++f) {
        const auto clean = modulate(scheme, rng, kFrameLen, config.samples_per_symbol);
        LabeledFrame frame;
        frame.iq = apply_channel(clean, snr, config.impairments, rng);
        frame.label = scheme;
        frame.snr_db = snr;
        d.frames.push_back(frame);
        d.split.push_back(f < counts[0] ? Split::train : f < counts[0] + counts[1] ? Split::val : Split::test);
      }
    }
  }
  return d;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  if (d.frames.size() != d.split.size()) throw PreconditionError("dataset split tags misaligned");
  io::ByteWriter w;
  w.text({kDatasetMagic.data(), kDatasetMagic.size()});
  w.u16(kDatasetVersion);
  w.u16(static_cast<std::uint16_t>(kNumClasses));
  w.u16(static_cast<std::uint16_t>(d.snr_grid.size()));
  w.u32(static_cast<std::uint32_t>(d.frames_per_cell));
  w.u16(static_cast<std::uint16_t>(kFrameLen));
  for (int s : d.snr_grid) w.i16(static_cast<std::int16_t>(s));

  io::ByteWriter body;
  for (std::size_t i = 0; i < d.frames.size(); ++i) {
    const auto& f = d.frames[i];
    for (float v : f.iq) body.f32(v);
    body.u8(static_cast<std::uint8_t>(f.label));
    body.i16(static_cast<std::int16_t>(f.snr_db));
    body.u8(static_cast<std::uint8_t>(d.split[i]));
  }
  const auto crc = crc32(body.buffer());
  w.bytes(body.buffer());
  w.u32(crc);
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "dataset");
  const auto magic = r.bytes(kDatasetMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kDatasetMagic.begin()))
    throw FormatError("dataset: bad magic bytes");
  if (r.u16() != kDatasetVersion) throw FormatError("dataset: unsupported version");
  const auto schemes = r.u16();
  const auto n_snr = r.u16();
  const auto per_cell = r.u32();
  const auto frame_len = r.u16();
  if (schemes != kNumClasses || frame_len != kFrameLen || n_snr == 0 || per_cell == 0)
    throw FormatError("dataset: unsupported header counts");

  Dataset d;
  d.frames_per_cell = per_cell;
  for (std::size_t i = 0; i < n_snr; ++i) d.snr_grid.push_back(r.i16());

  const std::size_t n_frames = static_cast<std::size_t>(schemes) * n_snr * per_cell;
  const std::size_t body_len = n_frames * kFrameRecordBytes;
  if (r.remaining() < body_len + 4) throw TruncatedError("dataset: truncated payload");
  if (r.remaining() > body_len + 4) throw FormatError("dataset: trailing bytes after checksum");
  const auto body = r.bytes(body_len);
  if (r.u32() != crc32(body)) throw ChecksumError("dataset: body checksum mismatch");

  io::ByteReader b(body, "dataset body");
  d.frames.resize(n_frames);
  d.split.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    auto& f = d.frames[i];
    for (auto& v : f.iq) v = b.f32();
    const auto label = b.u8();
    f.snr_db = b.i16();
    const auto tag = b.u8();
    const std::size_t cell = i / per_cell;
    if (label != cell / n_snr || f.snr_db != d.snr_grid[cell % n_snr])
      throw FormatError("dataset: frame out of canonical order");
    if (tag > 2) throw FormatError("dataset: bad split tag");
    f.label = static_cast<Modulation>(label);
    d.split[i] = static_cast<Split>(tag);
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(d));
}

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

}  // namespace beacon::iq
