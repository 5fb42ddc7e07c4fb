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
"""Experiment configuration: defaults, agent descriptors and config files.

A config file is a flat TOML document whose keys mirror the CLI flags, e.g.

  env = "bernoulli"
  arms = 10
  horizon = 2000
  seeds = 10
  agents = ["ts", "uniform", "blasts:0.001", "blasts:adaptive"]
  out = "results"
"""

import dataclasses
import math
from typing import Any, Literal

import agents as agents_lib
import bandit
import belief
import pydantic
import rdcore
import tomlkit

# Desk-scale defaults.
DEFAULT_ENV = bandit.BERNOULLI
DEFAULT_NUM_ARMS = 10
DEFAULT_HORIZON = 2000
DEFAULT_NUM_SEEDS = 10
DEFAULT_NUM_SAMPLES = 64
DEFAULT_AGENTS = ("ts", "uniform")
DEFAULT_OUTPUT_DIR = "results"

TS = "ts"
UNIFORM = "uniform"
BLASTS = "blasts"
BOUND_TUNED = "bound_tuned"


@dataclasses.dataclass(frozen=True)
class AgentSpec:
  """One agent of an experiment.

  policy: "ts", "uniform" or "blasts".
  beta_mode: "" for baselines, else "fixed", "adaptive" or "bound_tuned".
  beta: The fixed beta, when beta_mode is "fixed".
  """

  policy: str
  beta_mode: str = ""
  beta: float | None = None

  @property
  def descriptor(self) -> str:
    if self.policy != BLASTS:
      return self.policy
    if self.beta_mode == agents_lib.FIXED:
      return f"{BLASTS}:{self.beta!r}"
    return f"{BLASTS}:{self.beta_mode.replace('_', '-')}"


def parse_agent_spec(text: str) -> AgentSpec:
  """Parses "ts", "uniform", "blasts:<beta>", "blasts:adaptive" and
  "blasts:bound-tuned".

  Raises:
    ValueError: If the descriptor is not recognised.
  """
  policy, _, argument = text.strip().lower().partition(":")
  if policy in (TS, UNIFORM) and not argument:
    return AgentSpec(policy)
  if policy != BLASTS or not argument:
    raise ValueError(f"Unknown agent descriptor: {text!r}")
  if argument == agents_lib.ADAPTIVE:
    return AgentSpec(BLASTS, agents_lib.ADAPTIVE)
  if argument in ("bound-tuned", BOUND_TUNED):
    return AgentSpec(BLASTS, BOUND_TUNED)
  try:
    beta = float(argument)
  except ValueError:
    raise ValueError(f"Invalid beta in agent descriptor: {text!r}") from None
  if not (math.isfinite(beta) and beta >= 0):
    raise ValueError(f"beta must be finite and nonnegative: {text!r}")
  return AgentSpec(BLASTS, agents_lib.FIXED, beta)


class ExperimentConfig(pydantic.BaseModel):
  """Everything needed to reproduce one experiment.

  Fields are populated either by name or by the CLI-style alias
  (arms, samples, ba_iters, out, threads).
  """

  model_config = pydantic.ConfigDict(
      populate_by_name=True, extra="forbid", frozen=True
  )

  env: Literal["bernoulli", "gaussian"] = DEFAULT_ENV
  num_arms: int = pydantic.Field(DEFAULT_NUM_ARMS, ge=2, alias="arms")
  horizon: int = pydantic.Field(DEFAULT_HORIZON, ge=1)
  agents: list[str] = pydantic.Field(
      default_factory=lambda: list(DEFAULT_AGENTS), min_length=1
  )
  num_samples: int = pydantic.Field(
      DEFAULT_NUM_SAMPLES, ge=1, alias="samples"
  )
  ba_max_iters: int = pydantic.Field(
      rdcore.DEFAULT_MAX_ITERS, ge=1, alias="ba_iters"
  )
  ba_tol: float = pydantic.Field(rdcore.DEFAULT_TOL, gt=0)
  seeds: list[int] = pydantic.Field(
      default_factory=lambda: list(range(DEFAULT_NUM_SEEDS)), min_length=1
  )
  reward_noise_sd: float = pydantic.Field(
      bandit.DEFAULT_REWARD_NOISE_SD, gt=0
  )
  prior_alpha: float = pydantic.Field(belief.DEFAULT_PRIOR_ALPHA, gt=0)
  prior_beta: float = pydantic.Field(belief.DEFAULT_PRIOR_BETA, gt=0)
  prior_mean: float = belief.DEFAULT_PRIOR_MEAN
  prior_var: float = pydantic.Field(belief.DEFAULT_PRIOR_VAR, gt=0)
  noise_var: float = pydantic.Field(belief.DEFAULT_NOISE_VAR, gt=0)
  adaptive_epsilon: float = pydantic.Field(
      agents_lib.DEFAULT_ADAPTIVE_EPSILON, gt=0
  )
  info_ratio_bound: float | None = pydantic.Field(None, gt=0)
  output_dir: str = pydantic.Field(DEFAULT_OUTPUT_DIR, alias="out")
  parallelism: int = pydantic.Field(1, ge=1, alias="threads")
  svg: bool = True
  force: bool = False

  @pydantic.field_validator("seeds", mode="before")
  @classmethod
  def _expand_seed_count(cls, value: Any) -> Any:
    if isinstance(value, int) and not isinstance(value, bool):
      if value < 1:
        raise ValueError(f"Seed count must be positive, got {value}.")
      return list(range(value))
    return value

  @pydantic.field_validator("seeds")
  @classmethod
  def _check_seeds(cls, value: list[int]) -> list[int]:
    if any(seed < 0 for seed in value):
      raise ValueError(f"Seeds must be nonnegative, got {value}.")
    if len(set(value)) != len(value):
      raise ValueError(f"Seeds must be unique, got {value}.")
    return value

  @pydantic.field_validator("agents")
  @classmethod
  def _check_agents(cls, value: list[str]) -> list[str]:
    descriptors = [parse_agent_spec(text).descriptor for text in value]
    if len(set(descriptors)) != len(descriptors):
      raise ValueError(f"Agents must be unique, got {value}.")
    return descriptors

  @pydantic.model_validator(mode="after")
  def _check_adaptive_samples(self) -> "ExperimentConfig":
    adaptive = any(
        spec.beta_mode == agents_lib.ADAPTIVE for spec in self.agent_specs
    )
    if adaptive and self.num_samples < 2:
      raise ValueError("The adaptive beta schedule needs at least 2 samples.")
    return self

  @property
  def agent_specs(self) -> list[AgentSpec]:
    return [parse_agent_spec(text) for text in self.agents]

  @property
  def bandit_kind(self) -> bandit.BanditKind:
    return bandit.BanditKind(self.env, self.reward_noise_sd)

  @property
  def prior(self) -> belief.Prior:
    return belief.Prior(
        alpha=self.prior_alpha,
        beta=self.prior_beta,
        mean=self.prior_mean,
        var=self.prior_var,
        noise_var=self.noise_var,
    )

  @property
  def gamma_bound(self) -> float:
    """Information-ratio bound for diagnostics, K/2 unless configured."""
    if self.info_ratio_bound is not None:
      return self.info_ratio_bound
    return agents_lib.default_info_ratio_bound(self.num_arms)


def _canonical_key(key: str) -> str:
  key = key.replace("-", "_")
  field = ExperimentConfig.model_fields.get(key)
  if field is not None and field.alias:
    return field.alias
  return key


def load_config_file(path: str) -> dict[str, Any]:
  """Reads a flat TOML config file into a plain dict.

  Raises:
    IOError: If the file cannot be read.
    ValueError: If the file is not valid flat TOML.
  """
  try:
    with open(path, "r", encoding="utf-8") as config_file:
      text = config_file.read()
  except OSError as e:
    raise IOError(f"Failed to read config file {path}") from e
  try:
    document = tomlkit.parse(text).unwrap()
  except tomlkit.exceptions.ParseError as e:
    raise ValueError(f"Invalid TOML in {path}: {e}") from e
  nested = [key for key, value in document.items() if isinstance(value, dict)]
  if nested:
    raise ValueError(f"Config file {path} must be flat, found tables {nested}.")
  return document


def build_config(
    path: str | None = None, overrides: dict[str, Any] | None = None
) -> ExperimentConfig:
  """Merges defaults, an optional config file and CLI overrides.

  Overrides whose value is None are ignored, so unset flags keep the file's
  value.
  """
  data = {}
  if path:
    data.update(
        {_canonical_key(k): v for k, v in load_config_file(path).items()}
    )
  for key, value in (overrides or {}).items():
    if value is not None:
      data[_canonical_key(key)] = value
  return ExperimentConfig.model_validate(data)
