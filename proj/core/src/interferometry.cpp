#include "ionpulse/interferometry.hpp"

#include "ionpulse/least_squares.hpp"
#include "ionpulse/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

namespace ionpulse::interferometry {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kScan = 32;

struct Ellipse {
  double x0, y0, cx, cy, dphi;
};

// Signed orthogonal distance from (u, v) to the curve (x0 + cx sin a, y0 + cy sin(a + dphi)).
double signed_distance(const Ellipse& e, double u, double v) {
  auto dist2 = [&](double a) {
    const double ex = e.x0 + e.cx * std::sin(a) - u;
    const double ey = e.y0 + e.cy * std::sin(a + e.dphi) - v;
    return ex * ex + ey * ey;
  };
  double best_a = 0.0;
  double best = dist2(0.0);
  for (int k = 1; k < kScan; ++k) {
    const double a = 2.0 * kPi * k / kScan;
    const double d = dist2(a);
    if (d < best) {
      best = d;
      best_a = a;
    }
  }
  double a = best_a;
  for (int it = 0; it < 12; ++it) {
    const double s1 = std::sin(a), c1 = std::cos(a);
    const double s2 = std::sin(a + e.dphi), c2 = std::cos(a + e.dphi);
    const double ex = e.x0 + e.cx * s1 - u;
    const double ey = e.y0 + e.cy * s2 - v;
    const double g = e.cx * ex * c1 + e.cy * ey * c2;
    const double h = e.cx * e.cx * c1 * c1 + e.cy * e.cy * c2 * c2 - (e.cx * ex * s1 + e.cy * ey * s2);
    if (!(h > 0.0)) break;
    const double next = a - g / h;
    const double d = dist2(next);
    if (!(d <= best)) break;
    const bool done = std::abs(next - a) < 1e-13;
    best = d;
    a = next;
    if (done) break;
  }
  const double du = (u - e.x0) / e.cx, dv = (v - e.y0) / e.cy;
  const double sd = std::sin(e.dphi);
  const double implicit = du * du - 2.0 * std::cos(e.dphi) * du * dv + dv * dv - sd * sd;
  const double dist = std::sqrt(best);
  return implicit < 0.0 ? -dist : dist;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// General conic through the standardised points. Empty if the conic is not
// an ellipse.
std::optional<Ellipse> conic_guess(const std::vector<double>& u, const std::vector<double>& v) {
  const Eigen::Index n = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd design(n, 6);
  for (Eigen::Index i = 0; i < n; ++i)
    design.row(i) << u[i] * u[i], u[i] * v[i], v[i] * v[i], u[i], v[i], 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  Eigen::VectorXd q = svd.matrixV().col(5);
  if (q(0) < 0.0) q = -q;
  const double A = q(0), B = q(1), C = q(2), D = q(3), E = q(4), F = q(5);
  if (!(4.0 * A * C - B * B > 0.0)) return std::nullopt;

  Eigen::Matrix2d m;
  m << 2.0 * A, B, B, 2.0 * C;
  const Eigen::Vector2d center = m.fullPivLu().solve(Eigen::Vector2d(-D, -E));
  const double fc = A * center(0) * center(0) + B * center(0) * center(1) + C * center(1) * center(1) +
                    D * center(0) + E * center(1) + F;
  const double s = std::sqrt(A * C);
  const double cos_d = std::clamp(-B / (2.0 * s), -1.0, 1.0);
  const double sin_d = std::sqrt(1.0 - cos_d * cos_d);
  if (!(-fc > 0.0) || sin_d < 1e-6) return std::nullopt;
  return Ellipse{center(0), center(1), std::clamp(std::sqrt(-fc / A) / sin_d, 0.1, 10.0),
                 std::clamp(std::sqrt(-fc / C) / sin_d, 0.1, 10.0), std::acos(cos_d)};
}

}  // namespace

void InterferogramSet::validate() const {
  if (areas.cols() < 2) throw std::invalid_argument("interferogram needs at least two peaks");
  if (areas.rows() < 8) throw std::invalid_argument("interferogram needs at least eight measurements");
  if (!areas.allFinite()) throw std::invalid_argument("interferogram areas must be finite");
}

InterferogramSet synth_interferogram(std::span<const double> pulse_phases,
                                     std::span<const double> delta_x_nm, double wavelength_nm,
                                     double noise_sigma, std::uint64_t seed,
                                     const SynthOptions& options) {
  if (pulse_phases.size() < 2) throw std::invalid_argument("need at least two pulse phases");
  if (!(wavelength_nm > 0.0)) throw std::invalid_argument("wavelength must be positive");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");

  const double k = 2.0 * kPi / wavelength_nm;
  const Eigen::Index peaks = static_cast<Eigen::Index>(pulse_phases.size()) - 1;
  const Eigen::Index rows = static_cast<Eigen::Index>(delta_x_nm.size());
  auto rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  InterferogramSet set;
  set.areas.resize(rows, peaks);
  for (Eigen::Index s = 0; s < rows; ++s) {
    for (Eigen::Index i = 0; i < peaks; ++i) {
      const double dphi = pulse_phases[i + 1] - pulse_phases[i];
      const double clean = options.amplitude * std::sin(dphi + k * delta_x_nm[s]) + options.offset;
      set.areas(s, i) = clean + (noise_sigma > 0.0 ? noise_sigma * noise(rng) : 0.0);
    }
  }
  return set;
}

std::vector<double> random_delta_x(int count, double wavelength_nm, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("count must be >= 0");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> dist(0.0, wavelength_nm);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& v : out) v = dist(rng);
  return out;
}

EllipseFitResult fit_ellipse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("x and y differ in length");
  if (x.size() < 8) throw std::invalid_argument("ellipse fit needs at least eight samples");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw std::invalid_argument("ellipse samples must be finite");

  const double mx = mean_of(x), my = mean_of(y);
  const double sx = std_of(x, mx), sy = std_of(y, my);
  if (!(sx > 0.0) || !(sy > 0.0)) throw std::invalid_argument("samples need spread on both axes");

  const std::size_t n = x.size();
  std::vector<double> u(n), v(n);
  double corr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = (x[i] - mx) / sx;
    v[i] = (y[i] - my) / sy;
    corr += u[i] * v[i];
  }
  corr = std::clamp(corr / static_cast<double>(n), -1.0, 1.0);

  EllipseFitResult out;
  auto finish = [&](const Ellipse& e) {
    out.x0 = mx + sx * e.x0;
    out.y0 = my + sy * e.y0;
    out.amplitude_x = sx * e.cx;
    out.amplitude_y = sy * e.cy;
  };

  // Exactly collinear samples: the line limit of the ellipse family.
  if (1.0 - std::abs(corr) <= 1e-12) {
    out.degenerate = true;
    out.dphi_abs = corr > 0.0 ? 0.0 : kPi;
    finish(Ellipse{0.0, 0.0, std::sqrt(2.0), std::sqrt(2.0), out.dphi_abs});
    return out;
  }

  estimation::FitProblem problem;
  problem.params = {{"x0", 0.0, -5.0, 5.0},
                    {"y0", 0.0, -5.0, 5.0},
                    {"cx", std::sqrt(2.0), 1e-3, 10.0},
                    {"cy", std::sqrt(2.0), 1e-3, 10.0},
                    {"dphi", std::acos(corr), 0.0, kPi}};
  problem.observed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  problem.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  problem.model = [u, v](const Eigen::VectorXd& p) {
    const Ellipse e{p(0), p(1), p(2), p(3), p(4)};
    Eigen::VectorXd d(static_cast<Eigen::Index>(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i) d(static_cast<Eigen::Index>(i)) = signed_distance(e, u[i], v[i]);
    return d;
  };

  std::vector<Eigen::VectorXd> starts;
  if (const auto g = conic_guess(u, v)) {
    Eigen::VectorXd s(5);
    s << std::clamp(g->x0, -5.0, 5.0), std::clamp(g->y0, -5.0, 5.0), g->cx, g->cy, g->dphi;
    starts.push_back(s);
  }
  Eigen::VectorXd plain(5);
  plain << 0.0, 0.0, std::sqrt(2.0), std::sqrt(2.0), std::acos(corr);
  starts.push_back(plain);
  const auto fit = estimation::multi_start(problem, starts, {}, 4);

  const Ellipse e{fit.values(0), fit.values(1), fit.values(2), fit.values(3), fit.values(4)};
  finish(e);
  out.dphi_abs = e.dphi;
  out.dphi_error = fit.std_errors(4);
  out.residual_rms = std::sqrt(fit.chi2 / static_cast<double>(n));
  const double edge = std::min(e.dphi, kPi - e.dphi);
  if (edge < 3.0 * out.dphi_error || fit.singular) {
    out.degenerate = true;
    out.dphi_abs = e.dphi < 0.5 * kPi ? 0.0 : kPi;
  }
  return out;
}

std::vector<EllipseFitResult> pairwise_phases(const InterferogramSet& set, int reference_peak) {
  set.validate();
  if (reference_peak < 0 || reference_peak >= set.peaks())
    throw std::out_of_range("reference peak out of range");
  const Eigen::VectorXd ref = set.areas.col(reference_peak);
  std::vector<EllipseFitResult> out;
  for (int p = 0; p < set.peaks(); ++p) {
    if (p == reference_peak) continue;
    const Eigen::VectorXd other = set.areas.col(p);
    auto r = fit_ellipse(std::span<const double>(ref.data(), ref.size()),
                         std::span<const double>(other.data(), other.size()));
    r.peak = p;
    out.push_back(r);
  }
  return out;
}

}  // namespace ionpulse::interferometry
