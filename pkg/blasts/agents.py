# Copyright 2024 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Action-selection policies and their diagnostics.

BLASTS samples an ensemble of environments from the belief, builds the
squared-regret distortion between every sampled environment and every arm,
solves the rate-distortion problem with Blahut-Arimoto, and probability-matches
on the resulting target-action channel. Thompson sampling and a uniform policy
are provided as baselines.
"""

import dataclasses
import math

import belief as belief_lib
import numpy as np
import rdcore

FIXED = "fixed"
ADAPTIVE = "adaptive"
DEFAULT_ADAPTIVE_EPSILON = 1e-8


@dataclasses.dataclass(frozen=True)
class BetaSchedule:
  """How BLASTS picks its Lagrange multiplier each step.

  mode: "fixed" uses `beta` every step; "adaptive" uses the inverse of the
    minimised variance-based information ratio plus `epsilon`.
  """

  mode: str
  beta: float = 0.0
  epsilon: float = DEFAULT_ADAPTIVE_EPSILON

  def __post_init__(self):
    if self.mode not in (FIXED, ADAPTIVE):
      raise ValueError(f"Unknown beta schedule mode: {self.mode}")
    if self.mode == FIXED and not (math.isfinite(self.beta) and self.beta >= 0):
      raise ValueError(f"Fixed beta must be nonnegative, got {self.beta}.")
    if not self.epsilon > 0:
      raise ValueError(f"epsilon must be positive, got {self.epsilon}.")

  @classmethod
  def fixed(cls, beta: float) -> "BetaSchedule":
    return cls(mode=FIXED, beta=float(beta))

  @classmethod
  def adaptive(
      cls, epsilon: float = DEFAULT_ADAPTIVE_EPSILON
  ) -> "BetaSchedule":
    return cls(mode=ADAPTIVE, epsilon=float(epsilon))


@dataclasses.dataclass(frozen=True)
class StepDiagnostics:
  beta_used: float
  rate_bits: float
  achieved_distortion: float
  ba_iterations: int
  psi_bar: float | None = None

  @property
  def epsilon_target(self) -> float:
    return math.sqrt(self.achieved_distortion)

  def is_finite(self) -> bool:
    values = [self.beta_used, self.rate_bits, self.achieved_distortion]
    if self.psi_bar is not None:
      values.append(self.psi_bar)
    return all(math.isfinite(v) for v in values)


@dataclasses.dataclass(frozen=True)
class InfoRatioEstimate:
  deltas: np.ndarray
  variances: np.ndarray
  psi_bar: float
  minimizer: np.ndarray


@dataclasses.dataclass(frozen=True)
class Discounted:
  gamma: float


@dataclasses.dataclass(frozen=True)
class FiniteHorizon:
  horizon: int


def build_distortion_matrix(samples: np.ndarray) -> np.ndarray:
  """Squared gap between each sampled environment's best arm and every arm.

  Given a sampled environment the optimal arm and all mean rewards are fixed,
  so the conditional expected squared regret is this pointwise square.
  """
  samples = np.asarray(samples, dtype=float)
  if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 2:
    raise ValueError(
        f"Need a Z x K ensemble with Z >= 1 and K >= 2, got {samples.shape}."
    )
  return (samples.max(axis=1, keepdims=True) - samples) ** 2


def info_ratio_min(
    deltas: np.ndarray, variances: np.ndarray, epsilon: float
) -> InfoRatioEstimate:
  """Minimises (pi . deltas)^2 / (pi . variances + epsilon) over the simplex.

  Some minimiser is supported on at most two arms, so every pair (i, j) is
  searched along the mixing weight t of pi = t e_i + (1 - t) e_j. On a pair
  the objective's derivative vanishes only where the numerator is zero or at
  one closed-form stationary point, so checking those and the two endpoints
  is an exact line search.

  Args:
    deltas: Expected regret of every arm, nonnegative.
    variances: Variance of every arm's mean reward, nonnegative.
    epsilon: Positive constant added to the denominator.

  Returns:
    The minimum value and a minimiser with support of at most two arms.
  """
  deltas = np.asarray(deltas, dtype=float)
  variances = np.asarray(variances, dtype=float)
  if deltas.shape != variances.shape or deltas.ndim != 1 or deltas.size < 1:
    raise ValueError(
        f"Mismatched info-ratio inputs: {deltas.shape} vs {variances.shape}."
    )
  if not epsilon > 0:
    raise ValueError(f"epsilon must be positive, got {epsilon}.")

  num_arms = deltas.size
  if num_arms == 1:
    return InfoRatioEstimate(
        deltas=deltas,
        variances=variances,
        psi_bar=float(deltas[0] ** 2 / (variances[0] + epsilon)),
        minimizer=np.ones(1),
    )

  first, second = np.triu_indices(num_arms, k=1)
  slope = deltas[first] - deltas[second]
  intercept = deltas[second]
  variance_slope = variances[first] - variances[second]
  variance_intercept = variances[second] + epsilon
  with np.errstate(divide="ignore", invalid="ignore"):
    numerator_root = -intercept / slope
    stationary = (
        variance_slope * intercept - 2 * slope * variance_intercept
    ) / (slope * variance_slope)
  candidates = np.stack(
      [
          np.zeros_like(slope),
          np.ones_like(slope),
          numerator_root,
          stationary,
      ],
      axis=1,
  )
  candidates = np.clip(np.nan_to_num(candidates, nan=0.0), 0.0, 1.0)
  numerator = intercept[:, np.newaxis] + candidates * slope[:, np.newaxis]
  denominator = (
      variance_intercept[:, np.newaxis]
      + candidates * variance_slope[:, np.newaxis]
  )
  values = numerator**2 / denominator

  best = int(np.argmin(values))
  pair, candidate = divmod(best, values.shape[1])
  weight = float(candidates[pair, candidate])
  minimizer = np.zeros(num_arms)
  minimizer[first[pair]] += weight
  minimizer[second[pair]] += 1.0 - weight
  return InfoRatioEstimate(
      deltas=deltas,
      variances=variances,
      psi_bar=float(values[pair, candidate]),
      minimizer=minimizer,
  )


def info_ratio_estimate(
    samples: np.ndarray, epsilon: float = DEFAULT_ADAPTIVE_EPSILON
) -> InfoRatioEstimate:
  """Estimates per-arm regret and variance from an ensemble and minimises.

  Raises:
    ValueError: If the ensemble has fewer than two rows.
  """
  samples = np.asarray(samples, dtype=float)
  if samples.ndim != 2 or samples.shape[0] < 2:
    raise ValueError(
        "The information ratio needs at least 2 posterior samples, got"
        f" shape {samples.shape}."
    )
  deltas = np.mean(samples.max(axis=1, keepdims=True) - samples, axis=0)
  variances = np.var(samples, axis=0)
  return info_ratio_min(deltas, variances, epsilon)


def adaptive_beta(
    samples: np.ndarray, epsilon: float = DEFAULT_ADAPTIVE_EPSILON
) -> float:
  """Returns 1 / (min_pi psi_bar(pi) + epsilon) for the ensemble."""
  estimate = info_ratio_estimate(samples, epsilon)
  return 1.0 / (estimate.psi_bar + epsilon)


def compute_target(
    samples: np.ndarray,
    schedule: BetaSchedule,
    ba_max_iters: int = rdcore.DEFAULT_MAX_ITERS,
    ba_tol: float = rdcore.DEFAULT_TOL,
) -> tuple[rdcore.RdSolution, StepDiagnostics]:
  """Solves for the target-action channel of one ensemble.

  Source weights are uniform over the ensemble rows and the solver starts
  from the uniform channel.
  """
  distortion = build_distortion_matrix(samples)
  psi_bar = None
  if schedule.mode == ADAPTIVE:
    estimate = info_ratio_estimate(samples, schedule.epsilon)
    psi_bar = estimate.psi_bar
    beta = 1.0 / (psi_bar + schedule.epsilon)
  else:
    beta = schedule.beta
  num_samples = distortion.shape[0]
  solution = rdcore.solve_rate_distortion(
      np.full(num_samples, 1.0 / num_samples),
      distortion,
      beta,
      max_iters=ba_max_iters,
      tol=ba_tol,
  )
  diagnostics = StepDiagnostics(
      beta_used=beta,
      rate_bits=solution.rate_bits,
      achieved_distortion=solution.distortion,
      ba_iterations=solution.iterations,
      psi_bar=psi_bar,
  )
  return solution, diagnostics


def blasts_select(
    belief: belief_lib.BeliefState,
    schedule: BetaSchedule,
    num_samples: int,
    ba_max_iters: int,
    ba_tol: float,
    rng: np.random.Generator,
    action_rng: np.random.Generator | None = None,
) -> tuple[int, StepDiagnostics]:
  """Selects an action by probability matching on the target action.

  Args:
    belief: Current posterior over arm means.
    schedule: Fixed or adaptive beta.
    num_samples: Ensemble size Z.
    ba_max_iters: Blahut-Arimoto iteration cap.
    ba_tol: Blahut-Arimoto distortion-change threshold.
    rng: Stream for posterior sampling.
    action_rng: Stream for picking the ensemble row and the action. Defaults
      to rng.

  Returns:
    The chosen arm and the step's diagnostics.
  """
  if action_rng is None:
    action_rng = rng
  samples = belief_lib.sample_means(belief, num_samples, rng)
  solution, diagnostics = compute_target(
      samples, schedule, ba_max_iters, ba_tol
  )
  row = int(action_rng.integers(num_samples))
  action = int(action_rng.choice(belief.num_arms, p=solution.channel[row]))
  return action, diagnostics


def ts_select(
    belief: belief_lib.BeliefState, rng: np.random.Generator
) -> int:
  """Thompson sampling: the argmax of one posterior draw."""
  return int(np.argmax(belief_lib.sample_means(belief, 1, rng)[0]))


def uniform_select(num_arms: int, rng: np.random.Generator) -> int:
  if num_arms < 1:
    raise ValueError(f"Need at least one arm, got {num_arms}.")
  return int(rng.integers(num_arms))


def default_info_ratio_bound(num_arms: int) -> float:
  """Information-ratio bound used for K-armed bandit diagnostics."""
  return num_arms / 2.0


def _check_bound_inputs(info_ratio_bound: float, mode) -> None:
  if not info_ratio_bound > 0:
    raise ValueError(
        f"The information-ratio bound must be positive, got {info_ratio_bound}."
    )
  if isinstance(mode, Discounted):
    if not 0 <= mode.gamma < 1:
      raise ValueError(f"gamma must lie in [0, 1), got {mode.gamma}.")
  elif isinstance(mode, FiniteHorizon):
    if mode.horizon < 1:
      raise ValueError(f"The horizon must be at least 1, got {mode.horizon}.")
  else:
    raise ValueError(f"Unknown regret mode: {mode!r}")


def regret_bound_rhs(
    rate_bits: float,
    epsilon_target: float,
    info_ratio_bound: float,
    mode: Discounted | FiniteHorizon,
) -> float:
  """Right-hand side of the target-action regret bound.

  The analysis is in nats, so the rate is converted from bits first.

  Args:
    rate_bits: Information the target action carries about the environment.
    epsilon_target: Root mean squared regret of the target action.
    info_ratio_bound: Upper bound on the information ratio.
    mode: Discounted(gamma) or FiniteHorizon(horizon).

  Returns:
    2 sqrt(G I / (1 - gamma^2)) + 2 eps / (1 - gamma) in the discounted case,
    2 sqrt(G T I) + 2 T eps over a finite horizon.
  """
  _check_bound_inputs(info_ratio_bound, mode)
  rate_nats = rate_bits * math.log(2)
  if isinstance(mode, Discounted):
    return 2 * math.sqrt(
        info_ratio_bound * rate_nats / (1 - mode.gamma**2)
    ) + 2 * epsilon_target / (1 - mode.gamma)
  return (
      2 * math.sqrt(info_ratio_bound * mode.horizon * rate_nats)
      + 2 * mode.horizon * epsilon_target
  )


def bound_tuned_beta(
    info_ratio_bound: float, mode: Discounted | FiniteHorizon
) -> float:
  """The beta under which the regret bound holds, in bits per distortion.

  The analysis states it in nats, (1 - gamma^2) / ((1 - gamma)^2 G) or T / G,
  and the solver's base-2 exponent divides that by ln 2.
  """
  _check_bound_inputs(info_ratio_bound, mode)
  if isinstance(mode, Discounted):
    beta_nats = (1 - mode.gamma**2) / ((1 - mode.gamma) ** 2 * info_ratio_bound)
  else:
    beta_nats = mode.horizon / info_ratio_bound
  return beta_nats / math.log(2)
