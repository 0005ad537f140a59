#pragma once

// Multi-level discrete wavelet transform (filter-and-downsample pyramid),
// per-band min-max scaling, zero padding and model-input assembly.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "canids/common.hpp"
#include "canids/segmentation.hpp"

namespace canids {

struct WaveletFilter {
  std::string name;
  std::vector<double> lowpass;   // decomposition scaling coefficients h_n
  std::vector<double> highpass;  // decomposition wavelet coefficients g_n

  std::size_t size() const { return lowpass.size(); }
  // Synthesis filters are the time-reversed analysis filters.
  std::vector<double> rec_lowpass() const { return {lowpass.rbegin(), lowpass.rend()}; }
  std::vector<double> rec_highpass() const { return {highpass.rbegin(), highpass.rend()}; }
};

// Quadrature mirror: g[k] = (-1)^(k+1) h[L-1-k].
inline std::vector<double> quadrature_mirror(const std::vector<double>& h) {
  std::vector<double> g(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    g[k] = (k % 2 == 0 ? -1.0 : 1.0) * h[h.size() - 1 - k];
  }
  return g;
}

inline WaveletFilter daubechies8() {
  std::vector<double> h{
      -0.00011747678412476953, 0.0006754494064505693, -0.00039174037337694705, -0.004870352993451574,
      0.008746094047405777,    0.013981027917398282,  -0.044088253930794755,   -0.017369301001807547,
      0.12874742662047847,     0.0004724845739132828, -0.2840155429615469,     -0.015829105256349306,
      0.5853546836542067,      0.6756307362972898,    0.31287159091429995,     0.05441584224310401};
  auto g = quadrature_mirror(h);
  return {"db8", std::move(h), std::move(g)};
}

inline WaveletFilter haar() {
  const double s = 1.0 / std::sqrt(2.0);
  std::vector<double> h{s, s};
  auto g = quadrature_mirror(h);
  return {"haar", std::move(h), std::move(g)};
}

inline WaveletFilter wavelet_by_name(std::string_view name) {
  if (name == "db8") return daubechies8();
  if (name == "haar" || name == "db1") return haar();
  throw Error("unsupported wavelet '" + std::string(name) + "'");
}

// Symmetric is half-sample reflection (x[-1] = x[0]); periodization wraps
// and halves the length exactly.
enum class BoundaryMode { Symmetric, Periodization };

inline BoundaryMode parse_boundary_mode(std::string_view s) {
  if (s == "symmetric") return BoundaryMode::Symmetric;
  if (s == "periodization") return BoundaryMode::Periodization;
  throw Error("unsupported boundary mode '" + std::string(s) + "'");
}

inline std::string to_string(BoundaryMode m) {
  return m == BoundaryMode::Symmetric ? "symmetric" : "periodization";
}

namespace detail {
// Reflects any integer index into [0, n); the extension is periodic with
// period 2n, so signals shorter than the filter reflect repeatedly.
inline std::size_t symmetric_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

inline std::vector<double> analysis(std::span<const double> x, std::span<const double> f, BoundaryMode mode) {
  const std::size_t n = x.size();
  const std::size_t taps = f.size();
  if (mode == BoundaryMode::Symmetric) {
    const std::size_t out_len = (n + taps - 1) / 2;
    std::vector<double> out(out_len);
    for (std::size_t o = 0; o < out_len; ++o) {
      double acc = 0.0;
      const auto centre = static_cast<std::ptrdiff_t>(2 * o + 1);
      for (std::size_t j = 0; j < taps; ++j) {
        acc += f[j] * x[symmetric_index(centre - static_cast<std::ptrdiff_t>(j), n)];
      }
      out[o] = acc;
    }
    return out;
  }
  // Periodization: odd inputs are extended by repeating the last sample.
  std::vector<double> ext(x.begin(), x.end());
  if (ext.size() % 2 == 1) ext.push_back(ext.back());
  const std::size_t m = ext.size();
  std::vector<double> out(m / 2);
  for (std::size_t o = 0; o < out.size(); ++o) {
    double acc = 0.0;
    for (std::size_t j = 0; j < taps; ++j) {
      auto idx = static_cast<std::ptrdiff_t>(2 * o + taps / 2) - static_cast<std::ptrdiff_t>(j);
      idx %= static_cast<std::ptrdiff_t>(m);
      if (idx < 0) idx += static_cast<std::ptrdiff_t>(m);
      acc += f[j] * ext[static_cast<std::size_t>(idx)];
    }
    out[o] = acc;
  }
  return out;
}

inline std::atomic<bool>& level_warning_issued() {
  static std::atomic<bool> flag{false};
  return flag;
}
}  // namespace detail

// Single analysis step: both outputs have length floor((n + L - 1) / 2)
// in symmetric mode.
inline std::pair<std::vector<double>, std::vector<double>> dwt_step(std::span<const double> signal,
                                                                    const WaveletFilter& filter,
                                                                    BoundaryMode mode = BoundaryMode::Symmetric) {
  if (signal.empty()) throw Error("dwt_step: empty signal");
  return {detail::analysis(signal, filter.lowpass, mode), detail::analysis(signal, filter.highpass, mode)};
}

// Single synthesis step for symmetric mode; output length 2n - L + 2.
inline std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail,
                                     const WaveletFilter& filter) {
  if (approx.size() != detail.size()) throw Error("idwt_step: band length mismatch");
  const auto rec_lo = filter.rec_lowpass();
  const auto rec_hi = filter.rec_highpass();
  const auto taps = static_cast<std::ptrdiff_t>(filter.size());
  const auto n = static_cast<std::ptrdiff_t>(approx.size());
  const std::ptrdiff_t out_len = 2 * n - taps + 2;
  if (out_len <= 0) throw Error("idwt_step: bands too short for filter");
  std::vector<double> out(static_cast<std::size_t>(out_len), 0.0);
  for (std::ptrdiff_t i = 0; i < out_len; ++i) {
    double acc = 0.0;
    // Only k with 0 <= i + L - 2 - 2k < L contribute.
    const std::ptrdiff_t k_hi = std::min(n - 1, (i + taps - 2) / 2);
    const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, (i - 1) / 2);
    for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
      const std::ptrdiff_t j = i + taps - 2 - 2 * k;
      if (j < 0 || j >= taps) continue;
      acc += approx[static_cast<std::size_t>(k)] * rec_lo[static_cast<std::size_t>(j)] +
             detail[static_cast<std::size_t>(k)] * rec_hi[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

struct WaveletBands {
  std::vector<double> approximation;          // A_J
  std::vector<std::vector<double>> details;   // D_J, ..., D_1 (coarsest first)
  std::size_t levels = 0;
  std::size_t signal_length = 0;  // 0 when unknown

  // Rows in wavedec order: [A_J, D_J, ..., D_1].
  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> out{approximation};
    out.insert(out.end(), details.begin(), details.end());
    return out;
  }
  std::vector<std::size_t> lengths() const {
    std::vector<std::size_t> out{approximation.size()};
    for (const auto& d : details) out.push_back(d.size());
    return out;
  }
};

// Largest level at which every coefficient is still free of boundary effects.
inline std::size_t max_meaningful_level(std::size_t n, std::size_t filter_len) {
  if (filter_len < 2 || n < filter_len - 1) return 0;
  return static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(n) / static_cast<double>(filter_len - 1))));
}

// Band lengths produced by wavedec, in wavedec order.
inline std::vector<std::size_t> band_lengths(std::size_t n, std::size_t filter_len, std::size_t levels,
                                             BoundaryMode mode = BoundaryMode::Symmetric) {
  std::vector<std::size_t> detail_lengths;
  std::size_t len = n;
  for (std::size_t j = 0; j < levels; ++j) {
    len = mode == BoundaryMode::Symmetric ? (len + filter_len - 1) / 2 : (len + 1) / 2;
    detail_lengths.push_back(len);
  }
  std::vector<std::size_t> out{len};
  out.insert(out.end(), detail_lengths.rbegin(), detail_lengths.rend());
  return out;
}

// Iterates dwt_step on the approximation. Levels beyond the meaningful
// maximum are computed anyway, with a one-time warning.
inline WaveletBands wavedec(std::span<const double> signal, const WaveletFilter& filter,
                            BoundaryMode mode = BoundaryMode::Symmetric, std::size_t levels = 10) {
  if (levels < 1) throw Error("wavedec: levels must be >= 1");
  if (signal.empty()) throw Error("wavedec: empty signal");
  if (levels > max_meaningful_level(signal.size(), filter.size()) &&
      !detail::level_warning_issued().exchange(true)) {
    warn("wavedec: level " + std::to_string(levels) + " exceeds the boundary-free maximum " +
         std::to_string(max_meaningful_level(signal.size(), filter.size())) + " for length " +
         std::to_string(signal.size()) + " with " + filter.name);
  }
  WaveletBands bands;
  bands.levels = levels;
  bands.signal_length = signal.size();
  std::vector<double> approx(signal.begin(), signal.end());
  for (std::size_t j = 0; j < levels; ++j) {
    auto [a, d] = dwt_step(approx, filter, mode);
    bands.details.insert(bands.details.begin(), std::move(d));
    approx = std::move(a);
  }
  bands.approximation = std::move(approx);
  return bands;
}

// Inverse pyramid for symmetric mode. A reconstructed approximation one
// sample longer than the next detail band is trimmed, as in the usual
// wavedec/waverec pairing. An odd-length signal comes back one sample long
// unless the bands remember the original length.
inline std::vector<double> waverec(const WaveletBands& bands, const WaveletFilter& filter) {
  std::vector<double> approx = bands.approximation;
  for (const auto& d : bands.details) {
    if (approx.size() == d.size() + 1) approx.pop_back();
    approx = idwt_step(approx, d, filter);
  }
  if (bands.signal_length != 0 && approx.size() == bands.signal_length + 1) approx.pop_back();
  return approx;
}

// Scaling --------------------------------------------------------------------------

struct BandRange {
  double min = 0.0;
  double max = 0.0;
};

struct ScaledBands {
  WaveletBands bands;
  std::vector<BandRange> ranges;  // wavedec order
};

// Maps each band to [0, 1] by its own min and max; a constant band maps to zeros.
inline ScaledBands scale_minmax(const WaveletBands& bands) {
  ScaledBands out{bands, {}};
  auto scale = [&](std::vector<double>& band) {
    BandRange r;
    if (!band.empty()) {
      auto [lo, hi] = std::minmax_element(band.begin(), band.end());
      r = {*lo, *hi};
    }
    const double span = r.max - r.min;
    for (double& v : band) v = span > 0.0 ? (v - r.min) / span : 0.0;
    out.ranges.push_back(r);
  };
  scale(out.bands.approximation);
  for (auto& d : out.bands.details) scale(d);
  return out;
}

// Tensor ---------------------------------------------------------------------------

// channels x rows x pad_len, row-major; rows are [A_J, D_J, ..., D_1].
struct WaveletTensor {
  std::size_t channels = 0;
  std::size_t rows = 0;
  std::size_t pad_len = 0;
  std::vector<std::size_t> band_lengths;
  std::vector<std::vector<BandRange>> scaling;  // per channel, per row
  std::vector<double> values;

  double at(std::size_t c, std::size_t r, std::size_t k) const { return values[(c * rows + r) * pad_len + k]; }
};

inline WaveletTensor pad_and_stack(const std::vector<ScaledBands>& channels) {
  if (channels.empty()) throw Error("pad_and_stack: no channels");
  const auto lengths = channels.front().bands.lengths();
  for (const auto& ch : channels) {
    if (ch.bands.lengths() != lengths) throw Error("pad_and_stack: mismatched band structure across channels");
  }
  WaveletTensor t;
  t.channels = channels.size();
  t.rows = lengths.size();
  t.pad_len = *std::max_element(lengths.begin(), lengths.end());
  t.band_lengths = lengths;
  t.values.assign(t.channels * t.rows * t.pad_len, 0.0);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto rows = channels[c].bands.rows();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy(rows[r].begin(), rows[r].end(), t.values.begin() + static_cast<std::ptrdiff_t>((c * t.rows + r) * t.pad_len));
    }
    t.scaling.push_back(channels[c].ranges);
  }
  return t;
}

// Recovers the scaled bands of one channel by the recorded band lengths.
inline std::vector<std::vector<double>> unpad_channel(const WaveletTensor& t, std::size_t channel) {
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < t.rows; ++r) {
    const auto begin = t.values.begin() + static_cast<std::ptrdiff_t>((channel * t.rows + r) * t.pad_len);
    rows.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(t.band_lengths[r]));
  }
  return rows;
}

struct WaveletParams {
  std::string wavelet = "db8";
  BoundaryMode mode = BoundaryMode::Symmetric;
  std::size_t levels = 10;
};

// Counts and gaps are decomposed independently and stacked as two channels.
inline WaveletTensor window_tensor(const FeatureWindow& window, const WaveletParams& params = {}) {
  const auto filter = wavelet_by_name(params.wavelet);
  std::vector<ScaledBands> channels;
  channels.push_back(scale_minmax(wavedec(window.counts, filter, params.mode, params.levels)));
  channels.push_back(scale_minmax(wavedec(window.gaps, filter, params.mode, params.levels)));
  return pad_and_stack(channels);
}

struct LabeledTensors {
  std::vector<WaveletTensor> tensors;
  std::vector<std::size_t> window_indices;
  std::vector<WindowLabel> labels;
};

inline LabeledTensors transform_windows(const std::vector<FeatureWindow>& windows, const WaveletParams& params = {}) {
  LabeledTensors out;
  for (const auto& w : windows) {
    out.tensors.push_back(window_tensor(w, params));
    out.window_indices.push_back(w.window_index);
    out.labels.push_back(w.label);
  }
  return out;
}

// Model input ---------------------------------------------------------------------

struct InputShape {
  std::size_t planes = 0;  // sequence_len * channels
  std::size_t height = 0;  // bands
  std::size_t width = 0;   // padded coefficient length

  std::size_t size() const { return planes * height * width; }
  bool operator==(const InputShape&) const = default;
};

// W consecutive tensors flattened as planes [w * channels + c][row][k].
struct ModelInput {
  InputShape shape;
  std::vector<double> values;
  WindowLabel label = WindowLabel::AttackFree;
  std::size_t first_window = 0;  // window index of the first tensor
  std::size_t last_window = 0;   // window index of the labeled (final) tensor
};

inline constexpr std::size_t kDefaultSequenceLen = 10;

// Sliding stride-1 sequences of W tensors labeled by their final window.
inline std::vector<ModelInput> assemble_inputs(const LabeledTensors& data, std::size_t sequence_len = kDefaultSequenceLen) {
  if (sequence_len == 0) throw Error("assemble_inputs: sequence length must be >= 1");
  std::vector<ModelInput> out;
  const auto& tensors = data.tensors;
  if (tensors.size() < sequence_len) {
    warn("assemble_inputs: " + std::to_string(tensors.size()) + " tensors is fewer than sequence length " +
         std::to_string(sequence_len));
    return out;
  }
  const auto& first = tensors.front();
  for (const auto& t : tensors) {
    if (t.channels != first.channels || t.rows != first.rows || t.pad_len != first.pad_len) {
      throw Error("assemble_inputs: tensors do not share a shape");
    }
  }
  const std::size_t plane = first.rows * first.pad_len;
  const std::size_t per_tensor = first.channels * plane;
  for (std::size_t end = sequence_len - 1; end < tensors.size(); ++end) {
    ModelInput in;
    in.shape = {sequence_len * first.channels, first.rows, first.pad_len};
    in.values.reserve(sequence_len * per_tensor);
    for (std::size_t w = end + 1 - sequence_len; w <= end; ++w) {
      in.values.insert(in.values.end(), tensors[w].values.begin(), tensors[w].values.end());
    }
    in.label = data.labels[end];
    in.first_window = data.window_indices[end + 1 - sequence_len];
    in.last_window = data.window_indices[end];
    out.push_back(std::move(in));
  }
  return out;
}

// Tensor archive -------------------------------------------------------------------
//
// Binary layout, little-endian:
//   magic "CIDSWVT\0" | u32 version | u32 levels (J) | u32 pad_len |
//   u32 channels | u32 sequence_len (W) | u64 count |
//   count * channels * (J + 1) * pad_len float64, row-major.
// The JSON sidecar carries band lengths, labels, window indices, scaling
// records and the payload's SHA-256.

inline constexpr std::array<char, 8> kTensorMagic{'C', 'I', 'D', 'S', 'W', 'V', 'T', '\0'};
inline constexpr std::uint32_t kTensorArchiveVersion = 1;

namespace detail {
template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("unexpected end of data");
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}
}  // namespace detail

struct TensorArchive {
  WaveletParams params;
  std::size_t window_len = kWindowLen;
  std::size_t sequence_len = kDefaultSequenceLen;
  LabeledTensors data;
};

inline std::string encode_tensor_payload(const TensorArchive& archive) {
  const auto& tensors = archive.data.tensors;
  std::string out(kTensorMagic.begin(), kTensorMagic.end());
  const WaveletTensor shape = tensors.empty() ? WaveletTensor{2, archive.params.levels + 1, 0, {}, {}, {}} : tensors.front();
  detail::put_le<std::uint32_t>(out, kTensorArchiveVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.rows - 1));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.pad_len));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.channels));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.sequence_len));
  detail::put_le<std::uint64_t>(out, tensors.size());
  for (const auto& t : tensors) {
    if (t.channels != shape.channels || t.rows != shape.rows || t.pad_len != shape.pad_len) {
      throw Error("tensor archive: tensors do not share a shape");
    }
    for (double v : t.values) detail::put_le<double>(out, v);
  }
  return out;
}

inline nlohmann::json tensor_sidecar(const TensorArchive& archive, std::string_view payload) {
  nlohmann::json windows = nlohmann::json::array();
  for (std::size_t i = 0; i < archive.data.tensors.size(); ++i) {
    nlohmann::json scaling = nlohmann::json::array();
    for (const auto& ch : archive.data.tensors[i].scaling) {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : ch) rows.push_back({r.min, r.max});
      scaling.push_back(std::move(rows));
    }
    windows.push_back({{"window_index", archive.data.window_indices[i]},
                       {"label", static_cast<int>(archive.data.labels[i])},
                       {"scaling", std::move(scaling)}});
  }
  const auto lengths = archive.data.tensors.empty()
                           ? band_lengths(archive.window_len, wavelet_by_name(archive.params.wavelet).size(),
                                          archive.params.levels, archive.params.mode)
                           : archive.data.tensors.front().band_lengths;
  return {{"format", "canids-wavelet-tensors"},
          {"version", kTensorArchiveVersion},
          {"wavelet", archive.params.wavelet},
          {"mode", to_string(archive.params.mode)},
          {"levels", archive.params.levels},
          {"window_len", archive.window_len},
          {"sequence_len", archive.sequence_len},
          {"band_lengths", lengths},
          {"payload_sha256", sha256_hex(payload)},
          {"windows", std::move(windows)}};
}

inline std::string sidecar_path(const std::string& archive_path) { return archive_path + ".json"; }

inline void save_tensor_archive(const std::string& path, const TensorArchive& archive) {
  const auto payload = encode_tensor_payload(archive);
  write_text_file(path, payload);
  write_text_file(sidecar_path(path), tensor_sidecar(archive, payload).dump(2) + "\n");
}

inline TensorArchive decode_tensor_archive(std::string_view payload, const nlohmann::json& sidecar) {
  if (payload.size() < kTensorMagic.size() || !std::equal(kTensorMagic.begin(), kTensorMagic.end(), payload.begin())) {
    throw Error("tensor archive: bad magic");
  }
  if (sidecar.value("payload_sha256", std::string{}) != sha256_hex(payload)) {
    throw Error("tensor archive: checksum mismatch (corrupted or truncated archive)");
  }
  std::size_t pos = kTensorMagic.size();
  const auto version = detail::get_le<std::uint32_t>(payload, pos);
  if (version != kTensorArchiveVersion) throw Error("tensor archive: unsupported version " + std::to_string(version));
  const auto levels = detail::get_le<std::uint32_t>(payload, pos);
  const auto pad_len = detail::get_le<std::uint32_t>(payload, pos);
  const auto channels = detail::get_le<std::uint32_t>(payload, pos);
  const auto seq_len = detail::get_le<std::uint32_t>(payload, pos);
  const auto count = detail::get_le<std::uint64_t>(payload, pos);
  const std::size_t per = static_cast<std::size_t>(channels) * (levels + 1) * pad_len;
  if (payload.size() - pos != count * per * sizeof(double)) throw Error("tensor archive: payload size mismatch");

  TensorArchive archive;
  archive.params.wavelet = sidecar.at("wavelet").get<std::string>();
  archive.params.mode = parse_boundary_mode(sidecar.at("mode").get<std::string>());
  archive.params.levels = levels;
  archive.window_len = sidecar.at("window_len").get<std::size_t>();
  archive.sequence_len = seq_len;
  const auto lengths = sidecar.at("band_lengths").get<std::vector<std::size_t>>();
  const auto& windows = sidecar.at("windows");
  if (windows.size() != count || lengths.size() != levels + 1u) throw Error("tensor archive: sidecar does not match payload");
  for (std::size_t i = 0; i < count; ++i) {
    WaveletTensor t;
    t.channels = channels;
    t.rows = levels + 1;
    t.pad_len = pad_len;
    t.band_lengths = lengths;
    t.values.resize(per);
    for (auto& v : t.values) v = detail::get_le<double>(payload, pos);
    for (const auto& ch : windows[i].at("scaling")) {
      std::vector<BandRange> rows;
      for (const auto& r : ch) rows.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
      t.scaling.push_back(std::move(rows));
    }
    archive.data.tensors.push_back(std::move(t));
    archive.data.window_indices.push_back(windows[i].at("window_index").get<std::size_t>());
    archive.data.labels.push_back(windows[i].at("label").get<int>() == 1 ? WindowLabel::Attack : WindowLabel::AttackFree);
  }
  return archive;
}

inline TensorArchive load_tensor_archive(const std::string& path) {
  const auto payload = read_text_file(path);
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_text_file(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error("tensor archive: bad sidecar: " + std::string(e.what()));
  }
  return decode_tensor_archive(payload, sidecar);
}

}  // namespace canids
