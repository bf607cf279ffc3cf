#include "qadapose/signals.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include <unsupported/Eigen/FFT>

#include "qadapose/errors.hpp"

namespace qadapose {
namespace {

// Primitive polynomials x^m + sum_k g_k x^k; bit k of the mask is g_k.
std::uint32_t primitive_taps(int degree) {
  switch (degree) {
    case 5: return 0b100 | 1;                   // x^5 + x^2 + 1
    case 6: return 0b10 | 1;                    // x^6 + x + 1
    case 7: return 0b10 | 1;                    // x^7 + x + 1
    case 8: return 0b11100 | 1;                 // x^8 + x^4 + x^3 + x^2 + 1
    case 9: return 0b10000 | 1;                 // x^9 + x^4 + 1
    case 10: return 0b1000 | 1;                 // x^10 + x^3 + 1
    default: fail(ErrorKind::config, "no m-sequence generator of degree " + std::to_string(degree));
  }
}

int degree_of_length(int chip_length) {
  for (int m = 2; m <= 16; ++m)
    if ((1 << m) - 1 == chip_length) return m;
  fail(ErrorKind::config, "chip_length " + std::to_string(chip_length) + " is not 2^m - 1");
}

std::vector<std::uint8_t> decimate(const std::vector<std::uint8_t>& u, std::size_t q) {
  std::vector<std::uint8_t> v(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) v[n] = u[(q * n) % u.size()];
  return v;
}

Eigen::VectorXd to_bipolar(const std::vector<std::uint8_t>& bits) {
  Eigen::VectorXd c(static_cast<Eigen::Index>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) c(static_cast<Eigen::Index>(i)) = bits[i] ? -1.0 : 1.0;
  return c;
}

Eigen::VectorXd xor_shifted(const std::vector<std::uint8_t>& u, const std::vector<std::uint8_t>& v,
                            std::size_t shift) {
  std::vector<std::uint8_t> bits(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) bits[n] = u[n] ^ v[(n + shift) % v.size()];
  return to_bipolar(bits);
}

double zero_lag(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

using Spectrum = std::vector<std::complex<double>>;

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

Spectrum forward(const Eigen::VectorXd& x, std::size_t nfft) {
  std::vector<double> buf(nfft, 0.0);
  std::copy(x.data(), x.data() + x.size(), buf.begin());
  Spectrum out;
  fft_engine().fwd(out, buf);
  return out;
}

// Full cross-correlation c[k] = sum_m x[m + k] ref[m], k in [-(L-1), N-1].
Eigen::VectorXd cross_correlation(const Spectrum& x_spec, const Spectrum& ref_spec, Eigen::Index n,
                                  Eigen::Index l) {
  const std::size_t nfft = x_spec.size();
  Spectrum prod(nfft);
  for (std::size_t i = 0; i < nfft; ++i) prod[i] = x_spec[i] * std::conj(ref_spec[i]);
  std::vector<double> circ;
  fft_engine().inv(circ, prod);
  Eigen::VectorXd out(n + l - 1);
  for (Eigen::Index k = -(l - 1); k <= n - 1; ++k) {
    const std::size_t idx = k >= 0 ? static_cast<std::size_t>(k) : nfft - static_cast<std::size_t>(-k);
    out(k + l - 1) = circ[idx];
  }
  return out;
}

}  // namespace

std::string to_string(CodeFamily f) { return f == CodeFamily::kasami ? "kasami" : "gold"; }

CodeFamily code_family_from_string(const std::string& s) {
  if (s == "kasami") return CodeFamily::kasami;
  if (s == "gold") return CodeFamily::gold;
  fail(ErrorKind::config, "unknown code family '" + s + "'");
}

std::string to_string(AmplitudeModel m) { return m == AmplitudeModel::unit ? "unit" : "lambertian"; }

AmplitudeModel amplitude_model_from_string(const std::string& s) {
  if (s == "unit") return AmplitudeModel::unit;
  if (s == "lambertian") return AmplitudeModel::lambertian;
  fail(ErrorKind::config, "unknown amplitude model '" + s + "'");
}

std::string to_string(RatioRule r) { return r == RatioRule::signed_peak ? "signed_peak" : "independent_maxima"; }

RatioRule ratio_rule_from_string(const std::string& s) {
  if (s == "signed_peak") return RatioRule::signed_peak;
  if (s == "independent_maxima") return RatioRule::independent_maxima;
  fail(ErrorKind::config, "unknown ratio rule '" + s + "'");
}

Eigen::VectorXd CodeBook::waveform(std::size_t index) const {
  const Eigen::VectorXd& chips = codes.at(index);
  Eigen::VectorXd w(chips.size() * samples_per_chip);
  for (Eigen::Index i = 0; i < chips.size(); ++i) w.segment(i * samples_per_chip, samples_per_chip).setConstant(chips(i));
  return w;
}

std::vector<std::uint8_t> m_sequence(int degree) {
  const std::uint32_t taps = primitive_taps(degree);
  const std::size_t period = (std::size_t{1} << degree) - 1;
  std::vector<std::uint8_t> s(period + static_cast<std::size_t>(degree));
  s[0] = 1;
  for (std::size_t n = 0; n + static_cast<std::size_t>(degree) < s.size(); ++n) {
    std::uint8_t next = 0;
    for (int k = 0; k < degree; ++k)
      if (taps & (1u << k)) next ^= s[n + static_cast<std::size_t>(k)];
    s[n + static_cast<std::size_t>(degree)] = next;
  }
  s.resize(period);
  return s;
}

std::vector<Eigen::VectorXd> code_family(CodeFamily family, int chip_length) {
  const int m = degree_of_length(chip_length);
  const auto u = m_sequence(m);
  std::vector<Eigen::VectorXd> out;
  if (family == CodeFamily::kasami) {
    if (m % 2 != 0 || (m != 6 && m != 8 && m != 10))
      fail(ErrorKind::config, "kasami codes support chip_length 63, 255 or 1023");
    const std::size_t q = (std::size_t{1} << (m / 2)) + 1;
    const auto w = decimate(u, q);
    out.push_back(to_bipolar(u));
    const std::size_t short_period = (std::size_t{1} << (m / 2)) - 1;
    for (std::size_t k = 0; k < short_period; ++k) out.push_back(xor_shifted(u, w, k));
  } else {
    std::size_t q = 0;
    if (m % 2 == 1) q = 3;        // k = 1
    else if (m % 4 == 2) q = 5;   // k = 2, gcd(m, 2) = 2 with m / 2 odd
    else fail(ErrorKind::config, "gold codes do not exist for chip_length " + std::to_string(chip_length));
    const auto v = decimate(u, q);
    out.push_back(to_bipolar(u));
    out.push_back(to_bipolar(v));
    for (std::size_t k = 0; k < u.size(); ++k) out.push_back(xor_shifted(u, v, k));
  }
  return out;
}

CodeBook gen_codes(CodeFamily family, int chip_length, std::size_t count, std::uint64_t seed,
                   int samples_per_chip) {
  require(samples_per_chip >= 1, ErrorKind::config, "samples_per_chip must be >= 1");
  require(count >= 1, ErrorKind::config, "code count must be >= 1");
  auto pool = code_family(family, chip_length);
  if (count > pool.size())
    fail(ErrorKind::config, "requested " + std::to_string(count) + " codes but the family has " +
                                std::to_string(pool.size()));

  std::mt19937_64 rng(seed);
  for (std::size_t i = pool.size() - 1; i > 0; --i) std::swap(pool[i], pool[rng() % (i + 1)]);

  // Odd length: the zero-lag inner product of two +-1 codes is odd, so 1 is the floor.
  std::vector<bool> taken(pool.size(), false);
  std::vector<Eigen::VectorXd> picked;
  for (std::size_t i = 0; i < pool.size() && picked.size() < count; ++i) {
    const bool quiet = std::all_of(picked.begin(), picked.end(),
                                   [&](const Eigen::VectorXd& c) { return std::abs(zero_lag(c, pool[i])) <= 1.0; });
    if (quiet) {
      picked.push_back(pool[i]);
      taken[i] = true;
    }
  }
  for (std::size_t i = 0; i < pool.size() && picked.size() < count; ++i)
    if (!taken[i]) picked.push_back(pool[i]);

  CodeBook book;
  book.family = family;
  book.chip_length = chip_length;
  book.samples_per_chip = samples_per_chip;
  book.seed = seed;
  book.codes = std::move(picked);
  return book;
}

double max_normalized_cross_correlation(const std::vector<Eigen::VectorXd>& codes) {
  double worst = 0;
  for (std::size_t a = 0; a < codes.size(); ++a) {
    for (std::size_t b = a + 1; b < codes.size(); ++b) {
      const Eigen::Index n = codes[a].size();
      for (Eigen::Index lag = 0; lag < n; ++lag) {
        double acc = 0;
        for (Eigen::Index i = 0; i < n; ++i) acc += codes[a](i) * codes[b]((i + lag) % n);
        worst = std::max(worst, std::abs(acc) / static_cast<double>(n));
      }
    }
  }
  return worst;
}

Synthesis synthesize_capture(const BeaconSet& beacons, const Pose& pose, const CalibrationParams& cal,
                             const CodeBook& book, const SynthesisOptions& options) {
  require(beacons.size() > 0, ErrorKind::contract, "synthesize_capture: empty beacon set");
  require(options.active.empty() || options.active.size() == beacons.size(), ErrorKind::contract,
          "synthesize_capture: active mask size mismatch");
  const Eigen::Index n = book.samples();
  Synthesis out;
  QadaCapture& cap = out.capture;
  cap.v_sum = Eigen::VectorXd::Zero(n);
  cap.v_bt = Eigen::VectorXd::Zero(n);
  cap.v_lr = Eigen::VectorXd::Zero(n);
  cap.snr_db = options.snr_db;
  cap.seed = options.seed;
  cap.family = book.family;
  cap.chip_length = book.chip_length;
  cap.samples_per_chip = book.samples_per_chip;
  cap.code_count = book.size();
  cap.code_seed = book.seed;

  const Eigen::Matrix3d r = rotation_of(pose);
  const Eigen::Vector3d normal = r.transpose().col(2);  // receiver normal in world
  for (std::size_t i = 0; i < beacons.size(); ++i) {
    const Beacon& b = beacons.beacons[i];
    require(b.id >= 0 && static_cast<std::size_t>(b.id) < book.size(), ErrorKind::contract,
            "synthesize_capture: beacon id has no code");
    BeaconEmission e;
    const Eigen::Vector3d cam = world_to_cam(pose, b.position);
    e.image = project(cam, cal.h_ap_mm);
    e.ratios = ratios_from_image_point(e.image, cal);
    const Eigen::Vector3d ray = b.position - pose.position;
    const double d = ray.norm();
    if (options.amplitude == AmplitudeModel::unit) {
      e.amplitude = 1.0;
    } else {
      const double cos_emit = std::max(0.0, ray.z() / d);  // LED faces down
      const double cos_inc = std::max(0.0, normal.dot(ray) / d);
      e.amplitude = std::pow(cos_emit, options.lambert_order) * cos_inc / (d * d);
    }
    e.out_of_field = std::abs(e.image.x()) > options.detector_half_extent_mm ||
                     std::abs(e.image.y()) > options.detector_half_extent_mm;
    if (std::abs(e.ratios.p_x) > 1 || std::abs(e.ratios.p_y) > 1) {
      e.saturated = true;
      e.ratios.p_x = std::clamp(e.ratios.p_x, -1.0, 1.0);
      e.ratios.p_y = std::clamp(e.ratios.p_y, -1.0, 1.0);
    }
    const bool emits = options.active.empty() || options.active[i];
    if (emits && !e.out_of_field) {
      const Eigen::VectorXd w = book.waveform(static_cast<std::size_t>(b.id));
      cap.v_sum += e.amplitude * w;
      cap.v_bt += (e.amplitude * e.ratios.p_y) * w;
      cap.v_lr += (e.amplitude * e.ratios.p_x) * w;
    }
    out.emissions.push_back(e);
  }

  if (std::isfinite(options.snr_db)) {
    const double signal_power = cap.v_sum.squaredNorm() / static_cast<double>(n);
    const double sigma = std::sqrt(signal_power / std::pow(10.0, options.snr_db / 10.0));
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Eigen::VectorXd* ch : {&cap.v_sum, &cap.v_bt, &cap.v_lr})
      for (Eigen::Index k = 0; k < n; ++k) (*ch)(k) += sigma * noise(rng);
  }
  return out;
}

CorrelationTriple correlate(const QadaCapture& capture, const Eigen::VectorXd& chips, int samples_per_chip) {
  require(samples_per_chip >= 1, ErrorKind::contract, "correlate: samples_per_chip must be >= 1");
  const Eigen::Index n = capture.sample_count();
  require(capture.v_bt.size() == n && capture.v_lr.size() == n, ErrorKind::contract,
          "correlate: channel length mismatch");
  Eigen::VectorXd ref(chips.size() * samples_per_chip);
  for (Eigen::Index i = 0; i < chips.size(); ++i)
    ref.segment(i * samples_per_chip, samples_per_chip).setConstant(chips(i));
  const Eigen::Index l = ref.size();
  require(n >= l, ErrorKind::contract, "correlate: capture shorter than one code period");

  const std::size_t nfft = next_pow2(static_cast<std::size_t>(n + l - 1));
  const Spectrum ref_spec = forward(ref, nfft);
  CorrelationTriple tri;
  tri.s = cross_correlation(forward(capture.v_sum, nfft), ref_spec, n, l);
  tri.t = cross_correlation(forward(capture.v_bt, nfft), ref_spec, n, l);
  tri.r = cross_correlation(forward(capture.v_lr, nfft), ref_spec, n, l);
  tri.zero_lag = l - 1;
  tri.samples_per_chip = samples_per_chip;
  return tri;
}

std::vector<CorrelationTriple> correlate_all(const QadaCapture& capture, const CodeBook& book) {
  const Eigen::Index n = capture.sample_count();
  const Eigen::Index l = book.samples();
  require(capture.v_bt.size() == n && capture.v_lr.size() == n, ErrorKind::contract,
          "correlate: channel length mismatch");
  require(n >= l, ErrorKind::contract, "correlate: capture shorter than one code period");
  const std::size_t nfft = next_pow2(static_cast<std::size_t>(n + l - 1));
  const Spectrum sum_spec = forward(capture.v_sum, nfft);
  const Spectrum bt_spec = forward(capture.v_bt, nfft);
  const Spectrum lr_spec = forward(capture.v_lr, nfft);
  std::vector<CorrelationTriple> out;
  for (std::size_t i = 0; i < book.size(); ++i) {
    const Spectrum ref_spec = forward(book.waveform(i), nfft);
    CorrelationTriple tri;
    tri.s = cross_correlation(sum_spec, ref_spec, n, l);
    tri.t = cross_correlation(bt_spec, ref_spec, n, l);
    tri.r = cross_correlation(lr_spec, ref_spec, n, l);
    tri.zero_lag = l - 1;
    tri.samples_per_chip = book.samples_per_chip;
    out.push_back(std::move(tri));
  }
  return out;
}

RatioExtraction extract_ratios(const CorrelationTriple& tri, RatioRule rule) {
  require(tri.s.size() == tri.t.size() && tri.s.size() == tri.r.size() && tri.s.size() > 0,
          ErrorKind::contract, "extract_ratios: correlation length mismatch");
  RatioExtraction out;
  Eigen::Index peak = 0;
  const double s_peak = tri.s.maxCoeff(&peak);
  if (!std::isfinite(s_peak) || !(s_peak > 0))
    fail(ErrorKind::detection, "extract_ratios: no positive correlation peak");
  out.peak_index = peak;

  double second = 0;
  for (Eigen::Index k = 0; k < tri.s.size(); ++k)
    if (std::abs(k - peak) >= tri.samples_per_chip) second = std::max(second, tri.s(k));
  out.dominance = second > 0 ? s_peak / second : INFINITY;
  out.low_confidence = out.dominance < kMinPeakDominance;

  if (rule == RatioRule::signed_peak) {
    out.ratios = {tri.r(peak) / s_peak, tri.t(peak) / s_peak};
  } else {
    out.ratios = {tri.r.maxCoeff() / s_peak, tri.t.maxCoeff() / s_peak};
  }
  if (!std::isfinite(out.ratios.p_x) || !std::isfinite(out.ratios.p_y))
    fail(ErrorKind::detection, "extract_ratios: non-finite ratio");
  return out;
}

std::string to_string(Detector d) { return d == Detector::decorrelating ? "decorrelating" : "matched"; }

Detector detector_from_string(const std::string& s) {
  if (s == "decorrelating") return Detector::decorrelating;
  if (s == "matched") return Detector::matched;
  fail(ErrorKind::config, "unknown detector '" + s + "' (expected decorrelating or matched)");
}

std::vector<RatioExtraction> extract_ratios_joint(const std::vector<CorrelationTriple>& tris, const CodeBook& book,
                                                  std::span<const int> ids, RatioRule rule) {
  const Eigen::Index m = static_cast<Eigen::Index>(ids.size());
  std::vector<RatioExtraction> out;
  for (int id : ids) {
    require(id >= 0 && static_cast<std::size_t>(id) < tris.size() && static_cast<std::size_t>(id) < book.size(),
            ErrorKind::detection, "extract_ratios_joint: code id outside the codebook");
    out.push_back(extract_ratios(tris[static_cast<std::size_t>(id)], rule));
  }
  if (rule != RatioRule::signed_peak || m == 0) return out;

  const Eigen::Index l = book.samples();
  const Eigen::Index n = tris[static_cast<std::size_t>(ids[0])].s.size() - l + 1;  // capture length
  std::vector<Eigen::VectorXd> w;
  std::vector<Eigen::Index> delay;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& tri = tris[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])];
    w.push_back(book.waveform(static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])));
    delay.push_back(out[static_cast<std::size_t>(i)].peak_index - tri.zero_lag);
  }
  // g(i, j): output of filter i at its peak for a unit emitter j delayed by delay[j]
  Eigen::MatrixXd g(m, m);
  Eigen::MatrixXd y(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& tri = tris[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])];
    const Eigen::Index peak = out[static_cast<std::size_t>(i)].peak_index;
    y.row(i) << tri.s(peak), tri.t(peak), tri.r(peak);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index shift = delay[static_cast<std::size_t>(i)] - delay[static_cast<std::size_t>(j)];
      const Eigen::Index lo = std::max<Eigen::Index>({0, -shift, -delay[static_cast<std::size_t>(i)]});
      const Eigen::Index hi = std::min<Eigen::Index>({l, l - shift, n - delay[static_cast<std::size_t>(i)]});
      double acc = 0;
      for (Eigen::Index k = lo; k < hi; ++k) acc += w[static_cast<std::size_t>(i)](k) * w[static_cast<std::size_t>(j)](k + shift);
      g(i, j) = acc;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
  require(lu.isInvertible(), ErrorKind::detection, "extract_ratios_joint: code cross-correlations are singular");
  const Eigen::MatrixXd amp = lu.solve(y);  // columns: a, a p_y, a p_x
  const double largest = amp.col(0).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(amp(i, 0) > 1e-6 * largest))
      fail(ErrorKind::detection, "code " + std::to_string(ids[static_cast<std::size_t>(i)]) +
                                     ": no signal after removing cross-talk");
    auto& r = out[static_cast<std::size_t>(i)].ratios;
    r = {amp(i, 2) / amp(i, 0), amp(i, 1) / amp(i, 0)};
    if (!std::isfinite(r.p_x) || !std::isfinite(r.p_y))
      fail(ErrorKind::detection, "extract_ratios_joint: non-finite ratio");
  }
  return out;
}

std::vector<double> emitter_significance(const QadaCapture& capture, const CodeBook& book, std::span<const int> ids,
                                         std::span<const Eigen::Index> delays) {
  require(ids.size() == delays.size(), ErrorKind::contract, "emitter_significance: ids and delays differ in length");
  const Eigen::Index m = static_cast<Eigen::Index>(ids.size());
  const Eigen::Index n = capture.sample_count();
  const Eigen::Index l = book.samples();
  // columns of the design matrix, stored as (start, waveform) to stay O(m n)
  std::vector<Eigen::VectorXd> w;
  for (int id : ids) {
    require(id >= 0 && static_cast<std::size_t>(id) < book.size(), ErrorKind::detection,
            "emitter_significance: code id outside the codebook");
    w.push_back(book.waveform(static_cast<std::size_t>(id)));
  }
  const auto span_of = [&](Eigen::Index i) {
    const Eigen::Index d = delays[static_cast<std::size_t>(i)];
    return std::pair{std::max<Eigen::Index>(0, d), std::min<Eigen::Index>(n, d + l)};
  };
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto [lo, hi] = span_of(i);
    const auto& wi = w[static_cast<std::size_t>(i)];
    const Eigen::Index di = delays[static_cast<std::size_t>(i)];
    for (Eigen::Index k = lo; k < hi; ++k) y(i) += wi(k - di) * capture.v_sum(k);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto [lo2, hi2] = span_of(j);
      const Eigen::Index dj = delays[static_cast<std::size_t>(j)];
      for (Eigen::Index k = std::max(lo, lo2); k < std::min(hi, hi2); ++k)
        g(i, j) += wi(k - di) * w[static_cast<std::size_t>(j)](k - dj);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
  require(lu.isInvertible(), ErrorKind::detection, "emitter_significance: code cross-correlations are singular");
  const Eigen::VectorXd a = lu.solve(y);
  Eigen::VectorXd resid = capture.v_sum;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto [lo, hi] = span_of(i);
    const Eigen::Index di = delays[static_cast<std::size_t>(i)];
    for (Eigen::Index k = lo; k < hi; ++k) resid(k) -= a(i) * w[static_cast<std::size_t>(i)](k - di);
  }
  const double dof = static_cast<double>(std::max<Eigen::Index>(1, n - m));
  const double sigma = std::sqrt(resid.squaredNorm() / dof);
  const Eigen::MatrixXd cov = lu.inverse();
  std::vector<double> z;
  for (Eigen::Index i = 0; i < m; ++i) z.push_back(a(i) / (sigma * std::sqrt(cov(i, i))));
  return z;
}

}  // namespace qadapose
