#pragma once

// Schedule and sampler arithmetic for an epsilon-prediction latent diffusion model:
//   z_t   = sqrt(abar_t) z_0 + sqrt(1 - abar_t) eps
//   z0hat = (z_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)
// All arithmetic is float64.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace drivemap {

struct NoiseSchedule {
  std::vector<double> alphas_cumprod; // abar_t, t = 0 .. N-1

  int size() const {
    return static_cast<int>(alphas_cumprod.size());
  }
  double operator[](int t) const;
};

inline constexpr double kDefaultBetaStart = 0.00085;
inline constexpr double kDefaultBetaEnd = 0.012;
inline constexpr int kTrainTimesteps = 1000;

/// beta_t linear from beta_start to beta_end, abar_t = prod_{s <= t} (1 - beta_s).
/// Throws PreconditionError unless 0 < beta_start < beta_end < 1 and n_steps >= 1.
/// With n_steps == 1 the single beta is beta_start.
NoiseSchedule linear_schedule(
    int n_steps,
    double beta_start = kDefaultBetaStart,
    double beta_end = kDefaultBetaEnd);

/// Affine rescale of sqrt(abar) keeping the first entry and sending the last to exactly 0.
/// A schedule whose last entry is already 0 is returned unchanged.
NoiseSchedule enforce_zero_terminal_snr(const NoiseSchedule& schedule);

enum class ShiftMode {
  LogSnr, // SNR' = ratio^2 * SNR
  Direct, // abar' = ratio^2 * abar
};

struct ShiftedSchedule {
  NoiseSchedule schedule;
  double ratio = 1.0;
};

/// ratio = sqrt(1 / n_gen). Entries at exactly 0 or 1 pass through. Throws on n_gen < 1.
ShiftedSchedule temporal_shift(const NoiseSchedule& schedule, int n_gen, ShiftMode mode = ShiftMode::LogSnr);

/// log SNR' = log SNR + 2 ln(ratio); abar' = SNR' / (1 + SNR'). Throws on ratio <= 0.
NoiseSchedule shift_log_snr(const NoiseSchedule& schedule, double ratio);

double snr(double alpha_cumprod);

/// Throws DimensionError on shape mismatch, PreconditionError on an invalid index.
std::vector<double> add_noise(
    std::span<const double> z0,
    std::span<const double> eps,
    const NoiseSchedule& schedule,
    int t);

/// t_prev == kFinalStep stands for abar = 1, i.e. the clean sample.
inline constexpr int kFinalStep = -1;

struct DdimStepResult {
  std::vector<double> z_prev;
  std::vector<double> z0_hat;
};

/// Deterministic (eta = 0) update. Requires t > t_prev and abar_t > 0; throws
/// PreconditionError otherwise.
DdimStepResult ddim_step(
    std::span<const double> z_t,
    std::span<const double> eps_pred,
    const NoiseSchedule& schedule,
    int t,
    int t_prev);

/// n_steps indices evenly spaced from the highest index with abar > 0 down to 0, descending.
/// A zero-SNR terminal index is never part of the ladder.
std::vector<int> ddim_timesteps(const NoiseSchedule& schedule, int n_steps);

using Denoiser = std::function<std::vector<double>(std::span<const double> z_t, int t)>;
using StepCallback = std::function<void(int step, int t, const DdimStepResult& result)>;

/// Runs ddim_step down the ladder and finishes with a step to kFinalStep.
/// `z_start` is the latent at the first ladder index.
std::vector<double> ddim_sample(
    std::span<const double> z_start,
    const Denoiser& denoiser,
    const NoiseSchedule& schedule,
    int n_steps,
    const StepCallback& on_step = {});

/// eps_uncond + s (eps_cond - eps_uncond). Throws DimensionError on shape mismatch.
std::vector<double> cfg_combine(std::span<const double> eps_uncond, std::span<const double> eps_cond, double scale);

struct GuidanceConfig {
  double scale = 2.0;
  double dropout = 0.1;

  /// Throws PreconditionError unless scale >= 0 and dropout in [0, 1].
  void validate() const;
};

/// batch x frames grid (row-major) of independent uniform integers in [0, n_steps).
std::vector<int> sample_frame_timesteps(int batch, int frames, int n_steps, std::uint64_t seed);

/// Per-sample condition dropout flags drawn with probability `dropout`.
std::vector<bool> cfg_dropout_mask(int batch, double dropout, std::uint64_t seed);

} // namespace drivemap
