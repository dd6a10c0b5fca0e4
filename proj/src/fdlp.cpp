#include "derev/fdlp.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "derev/sigproc.h"

namespace derev::fdlp {

namespace {

constexpr double kAbsoluteFloor = 1e-100;

bool all_zero(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

}  // namespace

BurgResult burg_lp(std::span<const double> x, int order) {
  const int len = static_cast<int>(x.size());
  if (order < 1 || order >= len)
    throw std::invalid_argument("invalid-argument: burg_lp order must satisfy 1 <= m < len");
  if (all_zero(x)) throw DegenerateInput("burg_lp on all-zero input");

  const int n = len - 1;
  std::vector<double> f(x.begin(), x.end());
  std::vector<double> b(x.begin(), x.end());
  std::vector<double> a(static_cast<size_t>(order) + 1, 0.0);
  a[0] = 1.0;

  double energy = 0.0;
  for (double v : x) energy += v * v;
  double err_power = energy / static_cast<double>(len);

  double dk = 2.0 * energy - f[0] * f[0] - b[n] * b[n];
  std::vector<double> refl;
  refl.reserve(static_cast<size_t>(order));

  for (int k = 0; k < order; ++k) {
    double num = 0.0;
    for (int i = 0; i <= n - k - 1; ++i) num += f[i + k + 1] * b[i];
    const double mu = (dk > 0.0) ? -2.0 * num / dk : 0.0;
    refl.push_back(mu);

    for (int i = 0; i <= (k + 1) / 2; ++i) {
      const double t1 = a[i] + mu * a[k + 1 - i];
      const double t2 = a[k + 1 - i] + mu * a[i];
      a[i] = t1;
      a[k + 1 - i] = t2;
    }
    for (int i = 0; i <= n - k - 1; ++i) {
      const double t1 = f[i + k + 1] + mu * b[i];
      const double t2 = b[i] + mu * f[i + k + 1];
      f[i + k + 1] = t1;
      b[i] = t2;
    }
    dk = (1.0 - mu * mu) * dk - f[k + 1] * f[k + 1] - b[n - k - 1] * b[n - k - 1];
    err_power *= (1.0 - mu * mu);
  }

  return BurgResult{std::move(a), err_power, std::move(refl)};
}

std::vector<double> fdlp_envelope(std::span<const double> band_segment, const FdlpConfig& cfg,
                                  bool* degenerate) {
  const size_t n = band_segment.size();
  if (n < 2) throw std::invalid_argument("invalid-argument: fdlp_envelope needs length >= 2");
  if (cfg.lp_order < 1 || cfg.lp_order >= static_cast<int>(n))
    throw std::invalid_argument("invalid-argument: lp_order out of range");

  double power = 0.0;
  for (double v : band_segment) power += v * v;
  power /= static_cast<double>(n);
  const double floor_eps = std::max(cfg.floor_rel * power, kAbsoluteFloor);

  if (all_zero(band_segment)) {
    if (degenerate) *degenerate = true;
    return std::vector<double>(n, floor_eps);
  }
  if (degenerate) *degenerate = false;

  const std::vector<double> spec = sigproc::dct_ii(band_segment);
  const BurgResult lp = burg_lp(spec, cfg.lp_order);

  // AR response on the half circle: the DCT models the even-symmetric
  // extension, so time sample n maps to angle pi*n/N
  std::vector<double> env(n);
  const int m = cfg.lp_order;
  for (size_t i = 0; i < n; ++i) {
    const double w = kPi * static_cast<double>(i) / static_cast<double>(n);
    std::complex<double> acc(0.0, 0.0);
    for (int p = 0; p <= m; ++p)
      acc += lp.coeffs[static_cast<size_t>(p)] *
             std::complex<double>(std::cos(w * p), -std::sin(w * p));
    env[i] = 1.0 / std::max(std::norm(acc), 1e-300);
  }

  // energy matching to the Hilbert envelope fixes the scale
  const std::vector<double> henv = sigproc::hilbert_envelope(band_segment);
  const double target = std::accumulate(henv.begin(), henv.end(), 0.0);
  const double raw = std::accumulate(env.begin(), env.end(), 0.0);
  const double scale = (raw > 0.0 && target > 0.0) ? target / raw : 1.0;
  for (auto& e : env) e = std::max(e * scale, floor_eps);
  return env;
}

std::vector<double> carrier(std::span<const double> band_segment,
                            std::span<const double> envelope) {
  if (band_segment.size() != envelope.size())
    throw std::invalid_argument("invalid-argument: carrier length mismatch");
  std::vector<double> c(band_segment.size());
  for (size_t i = 0; i < c.size(); ++i) {
    if (!(envelope[i] > 0.0))
      throw std::invalid_argument("invalid-argument: carrier needs a strictly positive envelope");
    c[i] = band_segment[i] / std::sqrt(envelope[i]);
  }
  return c;
}

std::vector<double> remodulate(std::span<const double> envelope,
                               std::span<const double> carrier) {
  if (envelope.size() != carrier.size())
    throw std::invalid_argument("invalid-argument: remodulate length mismatch");
  std::vector<double> x(envelope.size());
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::sqrt(envelope[i]) * carrier[i];
  return x;
}

EnvelopeCarrier decompose(std::span<const double> segment, const qmf::QmfPrototype& proto,
                          const FdlpConfig& cfg) {
  const qmf::SubbandFrame frame = qmf::analyze(segment, proto);
  const int nb = frame.bands.rows();
  const int fl = frame.bands.cols();

  EnvelopeCarrier ec;
  ec.log_env = Matrix<double>(nb, fl);
  ec.carrier = Matrix<double>(nb, fl);
  ec.degenerate.assign(static_cast<size_t>(nb), false);

  for (int q = 0; q < nb; ++q) {
    bool degen = false;
    const auto band_sig = frame.bands.row(q);
    const std::vector<double> env = fdlp_envelope(band_sig, cfg, &degen);
    const std::vector<double> carr = carrier(band_sig, env);
    ec.degenerate[static_cast<size_t>(q)] = degen;
    for (int i = 0; i < fl; ++i) {
      ec.log_env.at(q, i) = std::log(env[static_cast<size_t>(i)]);
      ec.carrier.at(q, i) = carr[static_cast<size_t>(i)];
    }
  }
  return ec;
}

std::vector<double> reconstruct(const EnvelopeCarrier& ec, const qmf::QmfPrototype& proto) {
  if (!ec.log_env.same_shape(ec.carrier))
    throw std::invalid_argument("invalid-argument: envelope/carrier shape mismatch");
  qmf::SubbandFrame frame;
  frame.bands = Matrix<double>(ec.log_env.rows(), ec.log_env.cols());
  for (int q = 0; q < frame.bands.rows(); ++q)
    for (int i = 0; i < frame.bands.cols(); ++i)
      frame.bands.at(q, i) = std::sqrt(std::exp(ec.log_env.at(q, i))) * ec.carrier.at(q, i);
  return qmf::synthesize(frame, proto);
}

}  // namespace derev::fdlp
