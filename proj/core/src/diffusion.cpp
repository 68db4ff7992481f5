#include "drivemap/diffusion.hpp"

#include "drivemap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace drivemap {

namespace {

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": sizes " + std::to_string(a) + " and " + std::to_string(b) + " differ");
  }
}

double abar_at(const NoiseSchedule& s, int t) {
  return t == kFinalStep ? 1.0 : s[t];
}

} // namespace

double NoiseSchedule::operator[](int t) const {
  if (t < 0 || t >= size()) {
    throw PreconditionError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(size()) + ")");
  }
  return alphas_cumprod[static_cast<std::size_t>(t)];
}

NoiseSchedule linear_schedule(int n_steps, double beta_start, double beta_end) {
  if (n_steps < 1) {
    throw PreconditionError("schedule needs at least one step");
  }
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw PreconditionError("beta endpoints must satisfy 0 < start < end < 1");
  }
  NoiseSchedule s;
  s.alphas_cumprod.resize(static_cast<std::size_t>(n_steps));
  double prod = 1.0;
  for (int t = 0; t < n_steps; ++t) {
    const double frac = n_steps == 1 ? 0.0 : static_cast<double>(t) / (n_steps - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    prod *= 1.0 - beta;
    s.alphas_cumprod[static_cast<std::size_t>(t)] = prod;
  }
  return s;
}

NoiseSchedule enforce_zero_terminal_snr(const NoiseSchedule& schedule) {
  if (schedule.alphas_cumprod.empty() || schedule.alphas_cumprod.back() == 0.0) {
    return schedule;
  }
  const double first = std::sqrt(schedule.alphas_cumprod.front());
  const double last = std::sqrt(schedule.alphas_cumprod.back());
  if (!(first > last)) {
    throw PreconditionError("schedule must be decreasing to rescale its terminal SNR");
  }
  NoiseSchedule out;
  out.alphas_cumprod.resize(schedule.alphas_cumprod.size());
  const double gain = first / (first - last);
  for (std::size_t t = 0; t < out.alphas_cumprod.size(); ++t) {
    const double r = (std::sqrt(schedule.alphas_cumprod[t]) - last) * gain;
    out.alphas_cumprod[t] = r * r;
  }
  out.alphas_cumprod.front() = schedule.alphas_cumprod.front();
  out.alphas_cumprod.back() = 0.0;
  return out;
}

double snr(double alpha_cumprod) {
  return alpha_cumprod / (1.0 - alpha_cumprod);
}

NoiseSchedule shift_log_snr(const NoiseSchedule& schedule, double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw PreconditionError("shift ratio must be positive and finite");
  }
  const double offset = 2.0 * std::log(ratio);
  NoiseSchedule out = schedule;
  for (double& a : out.alphas_cumprod) {
    if (a <= 0.0 || a >= 1.0) {
      continue;
    }
    const double log_snr = std::log(a) - std::log1p(-a) + offset;
    // abar = sigmoid(log SNR)
    a = log_snr >= 0.0 ? 1.0 / (1.0 + std::exp(-log_snr)) : std::exp(log_snr) / (1.0 + std::exp(log_snr));
  }
  return out;
}

ShiftedSchedule temporal_shift(const NoiseSchedule& schedule, int n_gen, ShiftMode mode) {
  if (n_gen < 1) {
    throw PreconditionError("n_gen must be at least 1");
  }
  ShiftedSchedule out;
  out.ratio = std::sqrt(1.0 / n_gen);
  if (n_gen == 1) {
    out.schedule = schedule;
    return out;
  }
  if (mode == ShiftMode::LogSnr) {
    out.schedule = shift_log_snr(schedule, out.ratio);
  } else {
    out.schedule = schedule;
    const double r2 = out.ratio * out.ratio;
    for (double& a : out.schedule.alphas_cumprod) {
      if (a > 0.0 && a < 1.0) {
        a *= r2;
      }
    }
  }
  return out;
}

std::vector<double> add_noise(
    std::span<const double> z0,
    std::span<const double> eps,
    const NoiseSchedule& schedule,
    int t) {
  check_same_size(z0.size(), eps.size(), "add_noise");
  const double a = schedule[t];
  const double sa = std::sqrt(a);
  const double sn = std::sqrt(1.0 - a);
  std::vector<double> out(z0.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = sa * z0[i] + sn * eps[i];
  }
  return out;
}

DdimStepResult ddim_step(
    std::span<const double> z_t,
    std::span<const double> eps_pred,
    const NoiseSchedule& schedule,
    int t,
    int t_prev) {
  check_same_size(z_t.size(), eps_pred.size(), "ddim_step");
  if (!(t > t_prev)) {
    throw PreconditionError("ddim_step requires t > t_prev");
  }
  const double a_t = schedule[t];
  if (!(a_t > 0.0)) {
    throw PreconditionError("z0 estimate is undefined at a zero-SNR timestep");
  }
  const double a_prev = abar_at(schedule, t_prev);
  const double sa_t = std::sqrt(a_t);
  const double sn_t = std::sqrt(1.0 - a_t);
  const double sa_p = std::sqrt(a_prev);
  const double sn_p = std::sqrt(1.0 - a_prev);
  DdimStepResult r;
  r.z0_hat.resize(z_t.size());
  r.z_prev.resize(z_t.size());
  for (std::size_t i = 0; i < z_t.size(); ++i) {
    r.z0_hat[i] = (z_t[i] - sn_t * eps_pred[i]) / sa_t;
    r.z_prev[i] = sa_p * r.z0_hat[i] + sn_p * eps_pred[i];
  }
  return r;
}

std::vector<int> ddim_timesteps(const NoiseSchedule& schedule, int n_steps) {
  if (n_steps < 1) {
    throw PreconditionError("DDIM needs at least one step");
  }
  int top = schedule.size() - 1;
  while (top >= 0 && !(schedule.alphas_cumprod[static_cast<std::size_t>(top)] > 0.0)) {
    --top;
  }
  if (top < 0) {
    throw PreconditionError("schedule has no timestep with positive signal");
  }
  if (n_steps > top + 1) {
    throw PreconditionError(
        "requested " + std::to_string(n_steps) + " steps but only " + std::to_string(top + 1) +
        " timesteps have positive signal");
  }
  std::vector<int> ladder(static_cast<std::size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i) {
    const double frac = n_steps == 1 ? 0.0 : static_cast<double>(i) / (n_steps - 1);
    ladder[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(top * (1.0 - frac)));
  }
  return ladder;
}

std::vector<double> ddim_sample(
    std::span<const double> z_start,
    const Denoiser& denoiser,
    const NoiseSchedule& schedule,
    int n_steps,
    const StepCallback& on_step) {
  const std::vector<int> ladder = ddim_timesteps(schedule, n_steps);
  std::vector<double> z(z_start.begin(), z_start.end());
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const int t = ladder[i];
    const int t_prev = i + 1 < ladder.size() ? ladder[i + 1] : kFinalStep;
    const std::vector<double> eps = denoiser(z, t);
    DdimStepResult r = ddim_step(z, eps, schedule, t, t_prev);
    if (on_step) {
      on_step(static_cast<int>(i), t, r);
    }
    z = std::move(r.z_prev);
  }
  return z;
}

std::vector<double> cfg_combine(std::span<const double> eps_uncond, std::span<const double> eps_cond, double scale) {
  check_same_size(eps_uncond.size(), eps_cond.size(), "cfg_combine");
  std::vector<double> out(eps_uncond.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = eps_uncond[i] + scale * (eps_cond[i] - eps_uncond[i]);
  }
  return out;
}

void GuidanceConfig::validate() const {
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw PreconditionError("guidance scale must be finite and non-negative");
  }
  if (!(dropout >= 0.0 && dropout <= 1.0)) {
    throw PreconditionError("dropout probability must lie in [0, 1]");
  }
}

std::vector<int> sample_frame_timesteps(int batch, int frames, int n_steps, std::uint64_t seed) {
  if (n_steps < 1) {
    throw PreconditionError("n_steps must be at least 1");
  }
  if (batch < 0 || frames < 0) {
    throw PreconditionError("grid dimensions must be non-negative");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(0, n_steps - 1);
  std::vector<int> grid(static_cast<std::size_t>(batch) * static_cast<std::size_t>(frames));
  for (int& v : grid) {
    v = dist(rng);
  }
  return grid;
}

std::vector<bool> cfg_dropout_mask(int batch, double dropout, std::uint64_t seed) {
  GuidanceConfig{0.0, dropout}.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution dist(dropout);
  std::vector<bool> mask(static_cast<std::size_t>(std::max(batch, 0)));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = dist(rng);
  }
  return mask;
}

} // namespace drivemap
