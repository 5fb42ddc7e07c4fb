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
"""Exact conjugate posteriors over independent arm means.

Bernoulli arms carry a Beta(alpha, beta) posterior, Gaussian arms a Normal
posterior with known likelihood noise. A BeliefState is a value: updates
return a new state and leave the old one untouched.
"""

import dataclasses

import bandit
import numpy as np

DEFAULT_PRIOR_ALPHA = 1.0
DEFAULT_PRIOR_BETA = 1.0
DEFAULT_PRIOR_MEAN = 0.5
DEFAULT_PRIOR_VAR = 1.0
DEFAULT_NOISE_VAR = 1.0


@dataclasses.dataclass(frozen=True)
class Prior:
  """Prior parameters shared by every arm.

  alpha, beta: Beta pseudo-successes and pseudo-failures (Bernoulli arms).
  mean, var: Normal prior mean and variance (Gaussian arms).
  noise_var: Likelihood noise variance assumed for Gaussian rewards.
  """

  alpha: float = DEFAULT_PRIOR_ALPHA
  beta: float = DEFAULT_PRIOR_BETA
  mean: float = DEFAULT_PRIOR_MEAN
  var: float = DEFAULT_PRIOR_VAR
  noise_var: float = DEFAULT_NOISE_VAR

  def __post_init__(self):
    for name in ("alpha", "beta", "var", "noise_var"):
      value = getattr(self, name)
      if not value > 0:
        raise ValueError(f"Prior {name} must be positive, got {value}.")


@dataclasses.dataclass(frozen=True)
class BeliefState:
  """Per-arm posterior parameters.

  For Bernoulli arms `first`/`second` hold (alpha, beta); for Gaussian arms
  they hold (posterior mean, posterior variance).
  """

  kind: bandit.BanditKind
  prior: Prior
  first: np.ndarray
  second: np.ndarray
  pulls: np.ndarray

  @property
  def num_arms(self) -> int:
    return self.first.size

  def posterior_means(self) -> np.ndarray:
    if self.kind.is_bernoulli:
      return self.first / (self.first + self.second)
    return self.first.copy()


def new_belief(
    kind: bandit.BanditKind, num_arms: int, prior: Prior | None = None
) -> BeliefState:
  """Initialises every arm identically from the prior.

  Raises:
    ValueError: If num_arms is not positive.
  """
  if num_arms < 1:
    raise ValueError(f"A belief needs at least one arm, got {num_arms}.")
  prior = prior or Prior()
  if kind.is_bernoulli:
    first, second = prior.alpha, prior.beta
  else:
    first, second = prior.mean, prior.var
  return BeliefState(
      kind=kind,
      prior=prior,
      first=np.full(num_arms, float(first)),
      second=np.full(num_arms, float(second)),
      pulls=np.zeros(num_arms, dtype=int),
  )


def update_belief(
    belief: BeliefState, action: int, reward: float
) -> BeliefState:
  """Conditions the pulled arm's posterior on one reward.

  Raises:
    ValueError: If a Bernoulli reward is not 0 or 1.
    IndexError: If the action is not an arm of the belief.
  """
  if not 0 <= action < belief.num_arms:
    raise IndexError(
        f"Action {action} is out of range for {belief.num_arms} arms."
    )
  first = belief.first.copy()
  second = belief.second.copy()
  pulls = belief.pulls.copy()
  if belief.kind.is_bernoulli:
    if reward not in (0, 1):
      raise ValueError(f"Bernoulli rewards must be 0 or 1, got {reward}.")
    first[action] += reward
    second[action] += 1 - reward
  else:
    noise_var = belief.prior.noise_var
    var = 1.0 / (1.0 / second[action] + 1.0 / noise_var)
    first[action] = var * (first[action] / second[action] + reward / noise_var)
    second[action] = var
  pulls[action] += 1
  return dataclasses.replace(belief, first=first, second=second, pulls=pulls)


def sample_means(
    belief: BeliefState, count: int, rng: np.random.Generator
) -> np.ndarray:
  """Draws a Z x K ensemble, each row an independent mean vector.

  Raises:
    ValueError: If count is not positive.
  """
  if count < 1:
    raise ValueError(f"At least one posterior sample is needed, got {count}.")
  size = (count, belief.num_arms)
  if belief.kind.is_bernoulli:
    return rng.beta(belief.first, belief.second, size=size)
  return rng.normal(belief.first, np.sqrt(belief.second), size=size)
