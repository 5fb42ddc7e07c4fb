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
"""Base-2 Blahut-Arimoto solver for the Lagrangian rate-distortion problem.

The source is a finite set of Z weighted points and the reproduction alphabet
has A symbols. A channel is a Z x A row-stochastic matrix p(a|z). All
information quantities are in bits and the update uses 2^(-beta * d), so beta
is the slope of the rate-distortion curve in bits per unit of distortion.

Every function here is pure: no shared state, safe to call from any thread.
"""

import dataclasses
import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special
from scipy import stats

DEFAULT_MAX_ITERS = 100
DEFAULT_TOL = 1e-6
# Marginal entries that are exactly zero are clamped here before log2, and
# channel entries below this fraction of their row maximum are flushed to zero.
MIN_MARGINAL = 2.0**-60
_LOG2_FLOOR = math.log2(MIN_MARGINAL)
_SUM_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class RdSolution:
  """Converged Blahut-Arimoto solution for one value of beta.

  channel: Z x A conditional probabilities p(a|z).
  marginal: Length A marginal q(a) induced by the channel.
  rate_bits: Mutual information between source and reproduction, in bits.
  distortion: Expected distortion achieved by the channel.
  iterations: Number of Blahut-Arimoto updates performed.
  converged: Whether the distortion change fell below the tolerance.
  lagrangian_trace: rate + beta * distortion for the initial channel and
    after every update.
  """

  channel: np.ndarray
  marginal: np.ndarray
  rate_bits: float
  distortion: float
  iterations: int
  converged: bool
  lagrangian_trace: np.ndarray


class RdCurvePoint(NamedTuple):
  beta: float
  rate_bits: float
  distortion: float
  iterations: int
  converged: bool


def _check_finite(name: str, values: np.ndarray) -> None:
  if not np.all(np.isfinite(values)):
    raise ValueError(f"{name} contains non-finite entries.")


def _check_weights(weights: np.ndarray) -> None:
  if weights.ndim != 1 or weights.size < 1:
    raise ValueError(
        f"Source weights must be a non-empty vector, got shape {weights.shape}."
    )
  _check_finite("Source weights", weights)
  if np.any(weights < 0) or abs(weights.sum() - 1.0) > _SUM_TOLERANCE:
    raise ValueError("Source weights must be nonnegative and sum to 1.")


def _check_distortion(d: np.ndarray, num_points: int) -> None:
  if d.ndim != 2 or d.shape[0] != num_points or d.shape[1] < 1:
    raise ValueError(
        f"Distortion matrix of shape {d.shape} does not match {num_points}"
        " source points."
    )
  _check_finite("Distortion matrix", d)
  if np.any(d < 0):
    raise ValueError("Distortion matrix entries must be nonnegative.")


def _check_channel(channel: np.ndarray, shape: tuple[int, int]) -> None:
  if channel.shape != shape:
    raise ValueError(
        f"Channel of shape {channel.shape} does not match expected {shape}."
    )
  _check_finite("Channel", channel)


def uniform_channel(num_points: int, num_symbols: int) -> np.ndarray:
  """Returns the Z x A channel with every entry equal to 1/A."""
  return np.full((num_points, num_symbols), 1.0 / num_symbols)


def channel_marginal(weights: np.ndarray, channel: np.ndarray) -> np.ndarray:
  """Returns q(a) = sum_z w_z p(a|z)."""
  return weights @ channel


def ba_iterate(
    channel: np.ndarray,
    weights: np.ndarray,
    d: np.ndarray,
    beta: float,
) -> tuple[np.ndarray, np.ndarray]:
  """Performs one Blahut-Arimoto update.

  The marginal of the incoming channel is computed first, then every row is
  replaced by q(a) 2^(-beta d[z][a]) normalised. The normalisation runs in the
  log domain with a max shift, so no row can underflow to all zeros however
  large beta is. Entries below MIN_MARGINAL times their row maximum are set to
  exactly zero, which keeps every nonzero entry's share of the marginal above
  the smallest normal float.

  Args:
    channel: Z x A channel p_k(a|z).
    weights: Length Z source weights.
    d: Z x A distortion matrix.
    beta: Nonnegative Lagrange multiplier.

  Returns:
    A tuple (p_{k+1}, q_k) of the updated channel and the marginal of the
    incoming channel.

  Raises:
    ValueError: On dimension mismatch, non-finite entries or negative beta.
  """
  weights = np.asarray(weights, dtype=float)
  d = np.asarray(d, dtype=float)
  channel = np.asarray(channel, dtype=float)
  _check_weights(weights)
  _check_distortion(d, weights.size)
  _check_channel(channel, d.shape)
  if not math.isfinite(beta) or beta < 0:
    raise ValueError(f"beta must be finite and nonnegative, got {beta}.")

  marginal = channel_marginal(weights, channel)
  log_marginal = np.log2(np.where(marginal > 0, marginal, MIN_MARGINAL))
  logits = log_marginal[np.newaxis, :] - beta * d
  shifted = logits - logits.max(axis=1, keepdims=True)
  unnormalised = np.where(shifted < _LOG2_FLOOR, 0.0, np.exp2(shifted))
  return unnormalised / unnormalised.sum(axis=1, keepdims=True), marginal


def mutual_information_bits(
    weights: np.ndarray, channel: np.ndarray
) -> float:
  """Returns I(source; reproduction) in bits for a weighted source.

  Terms with p(a|z) = 0 contribute nothing, as do source points of zero
  weight. A marginal entry that underflowed to zero is read as the smallest
  normal float, so subnormal channel entries add a vanishing amount instead of
  an infinite one.

  Raises:
    ValueError: On dimension mismatch or non-finite entries.
  """
  weights = np.asarray(weights, dtype=float)
  channel = np.asarray(channel, dtype=float)
  _check_weights(weights)
  if channel.ndim != 2 or channel.shape[0] != weights.size:
    raise ValueError(
        f"Channel of shape {channel.shape} does not match {weights.size}"
        " source points."
    )
  _check_finite("Channel", channel)
  marginal = channel_marginal(weights, channel)
  active = weights > 0
  marginal = np.where(marginal > 0, marginal, np.finfo(float).tiny)
  divergences = special.rel_entr(channel[active], marginal).sum(axis=1)
  nats = float(weights[active] @ divergences)
  return max(0.0, nats / math.log(2))


def expected_distortion(
    weights: np.ndarray, channel: np.ndarray, d: np.ndarray
) -> float:
  """Returns sum_z w_z sum_a p(a|z) d[z][a].

  Raises:
    ValueError: On dimension mismatch.
  """
  weights = np.asarray(weights, dtype=float)
  channel = np.asarray(channel, dtype=float)
  d = np.asarray(d, dtype=float)
  if channel.shape != d.shape or d.ndim != 2 or d.shape[0] != weights.size:
    raise ValueError(
        f"Shapes do not agree: weights {weights.shape}, channel"
        f" {channel.shape}, distortion {d.shape}."
    )
  return float(weights @ np.sum(channel * d, axis=1))


def solve_rate_distortion(
    weights: np.ndarray,
    d: np.ndarray,
    beta: float,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> RdSolution:
  """Runs Blahut-Arimoto from the uniform channel until the distortion settles.

  Iteration stops once the expected distortion changes by less than tol
  between consecutive iterates, or after max_iters updates.

  Args:
    weights: Length Z source weights.
    d: Z x A distortion matrix.
    beta: Nonnegative Lagrange multiplier, in bits per unit distortion.
    max_iters: Maximum number of updates, at least 1.
    tol: Positive threshold on the change in distortion.

  Returns:
    The RdSolution for the final iterate.

  Raises:
    ValueError: If the inputs are invalid.
  """
  if max_iters < 1:
    raise ValueError(f"max_iters must be at least 1, got {max_iters}.")
  if not tol > 0:
    raise ValueError(f"tol must be positive, got {tol}.")
  weights = np.asarray(weights, dtype=float)
  d = np.asarray(d, dtype=float)
  _check_weights(weights)
  _check_distortion(d, weights.size)

  channel = uniform_channel(*d.shape)
  distortion = expected_distortion(weights, channel, d)
  trace = [mutual_information_bits(weights, channel) + beta * distortion]
  converged = False
  iterations = 0
  while iterations < max_iters:
    channel, _ = ba_iterate(channel, weights, d, beta)
    iterations += 1
    previous_distortion = distortion
    distortion = expected_distortion(weights, channel, d)
    trace.append(mutual_information_bits(weights, channel) + beta * distortion)
    if abs(distortion - previous_distortion) < tol:
      converged = True
      break

  return RdSolution(
      channel=channel,
      marginal=channel_marginal(weights, channel),
      rate_bits=mutual_information_bits(weights, channel),
      distortion=max(0.0, distortion),
      iterations=iterations,
      converged=converged,
      lagrangian_trace=np.asarray(trace),
  )


def rd_curve(
    weights: np.ndarray,
    d: np.ndarray,
    betas: Sequence[float],
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> list[RdCurvePoint]:
  """Traces the rate-distortion curve, one solve per beta, beta ascending."""
  if len(betas) == 0:
    raise ValueError("At least one beta is required.")
  points = []
  for beta in sorted(betas):
    solution = solve_rate_distortion(weights, d, beta, max_iters, tol)
    points.append(
        RdCurvePoint(
            beta=float(beta),
            rate_bits=solution.rate_bits,
            distortion=solution.distortion,
            iterations=solution.iterations,
            converged=solution.converged,
        )
    )
  return points


def entropy_bits(probs: np.ndarray) -> float:
  """Shannon entropy of a probability vector, in bits."""
  return float(stats.entropy(np.asarray(probs, dtype=float), base=2))


def binary_entropy_bits(p: float | np.ndarray) -> float | np.ndarray:
  """Binary entropy H_b(p) in bits, with H_b(0) = H_b(1) = 0."""
  p = np.asarray(p, dtype=float)
  nats = special.entr(p) + special.entr(1.0 - p)
  result = nats / math.log(2)
  return float(result) if result.ndim == 0 else result


def binary_hamming_rate_bits(distortion: float) -> float:
  """R(D) of a fair binary source under Hamming distortion."""
  if distortion >= 0.5:
    return 0.0
  return 1.0 - binary_entropy_bits(max(distortion, 0.0))


def binary_hamming_instance() -> tuple[np.ndarray, np.ndarray]:
  """Returns the weights and distortion of a fair bit under Hamming loss."""
  return np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]])
