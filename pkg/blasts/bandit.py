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
"""Ground-truth bandit environments with independent arms.

Arm means are drawn i.i.d. Uniform(0, 1). Rewards are either Bernoulli with
that mean or Gaussian around it. All randomness comes from an explicitly
passed numpy Generator, so callers own reproducibility and parallelism.
"""

import dataclasses

import numpy as np

BERNOULLI = "bernoulli"
GAUSSIAN = "gaussian"
REWARD_FAMILIES = (BERNOULLI, GAUSSIAN)
DEFAULT_REWARD_NOISE_SD = 1.0


@dataclasses.dataclass(frozen=True)
class BanditKind:
  """The reward family of every arm.

  family: Either "bernoulli" or "gaussian".
  reward_noise_sd: Standard deviation of Gaussian rewards. Ignored for
    Bernoulli arms.
  """

  family: str = BERNOULLI
  reward_noise_sd: float = DEFAULT_REWARD_NOISE_SD

  def __post_init__(self):
    if self.family not in REWARD_FAMILIES:
      raise ValueError(f"Unknown reward family: {self.family}")
    if self.family == GAUSSIAN and not self.reward_noise_sd > 0:
      raise ValueError(
          "Gaussian reward_noise_sd must be positive, got"
          f" {self.reward_noise_sd}."
      )

  @property
  def is_bernoulli(self) -> bool:
    return self.family == BERNOULLI


@dataclasses.dataclass(frozen=True)
class EnvironmentSample:
  means: np.ndarray

  @property
  def num_arms(self) -> int:
    return self.means.size


@dataclasses.dataclass(frozen=True)
class ArmStats:
  optimal_arm: int
  optimal_mean: float
  gaps: np.ndarray


def sample_environment(
    kind: BanditKind, num_arms: int, rng: np.random.Generator
) -> EnvironmentSample:
  """Draws every arm mean i.i.d. from Uniform(0, 1).

  The reward family does not affect the draw; it is accepted so that callers
  describe an environment by its kind and size in one place.

  Raises:
    ValueError: If num_arms is smaller than 2.
  """
  del kind  # Both families share the same mean generator.
  if num_arms < 2:
    raise ValueError(f"A bandit needs at least 2 arms, got {num_arms}.")
  return EnvironmentSample(means=rng.uniform(0.0, 1.0, size=num_arms))


def pull(
    kind: BanditKind,
    env: EnvironmentSample,
    action: int,
    rng: np.random.Generator,
) -> float:
  """Samples the reward of one arm.

  Raises:
    IndexError: If the action is not an arm of env.
  """
  if not 0 <= action < env.num_arms:
    raise IndexError(
        f"Action {action} is out of range for {env.num_arms} arms."
    )
  mean = float(env.means[action])
  if kind.is_bernoulli:
    return float(rng.binomial(1, mean))
  return float(rng.normal(mean, kind.reward_noise_sd))


def optimal_stats(env: EnvironmentSample) -> ArmStats:
  """Returns the optimal arm (lowest index on ties) and every arm's gap."""
  optimal_arm = int(np.argmax(env.means))
  optimal_mean = float(env.means[optimal_arm])
  return ArmStats(
      optimal_arm=optimal_arm,
      optimal_mean=optimal_mean,
      gaps=optimal_mean - env.means,
  )
