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
"""Seeded experiment runner, seed aggregation and CSV/SVG emission.

Every (agent, seed) pair is an independent episode with its own named random
streams. The environment stream depends on the seed alone. The reward,
belief-sampling and action-sampling streams also depend on the agent
descriptor.
"""

from concurrent import futures
import csv
import dataclasses
import logging
import math
import os
from typing import Any, Iterable, NamedTuple, Sequence
import zlib

import agents as agents_lib
import bandit
import belief as belief_lib
import experiment_config
import numpy as np
import rdcore
import summary_plot

SummaryRow = summary_plot.SummaryRow

STEPS_FILE = "steps.csv"
SUMMARY_FILE = "summary.csv"
BOUNDS_FILE = "bounds.csv"
RDCURVE_FILE = "rdcurve.csv"
SVG_FILE = "summary.svg"

STEPS_HEADER = (
    "agent",
    "beta_mode",
    "beta",
    "seed",
    "t",
    "action",
    "reward",
    "expected_regret",
    "cum_regret",
    "rate_bits",
    "achieved_distortion",
    "ba_iterations",
    "psi_bar",
)
BOUNDS_HEADER = (
    "agent",
    "beta_mode",
    "beta",
    "seed",
    "cum_regret",
    "mean_rate_bits",
    "mean_epsilon",
    "gamma_bound",
    "bound",
    "bound_holds",
)
RDCURVE_HEADER = ("beta", "rate_bits", "distortion", "iterations", "converged")

CI95_Z = 1.96
PLATEAU_FRACTION = 0.25

_ENVIRONMENT_STREAM = 0
_REWARD_STREAM = 1
_BELIEF_STREAM = 2
_ACTION_STREAM = 3


@dataclasses.dataclass(frozen=True)
class Streams:
  environment: np.random.Generator
  reward: np.random.Generator
  belief: np.random.Generator
  action: np.random.Generator


def make_streams(seed: int, descriptor: str) -> Streams:
  """Derives the named random streams of one (agent, seed) pair."""
  agent_key = zlib.crc32(descriptor.encode("utf-8"))

  def stream(*spawn_key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=spawn_key)
    )

  return Streams(
      environment=stream(_ENVIRONMENT_STREAM),
      reward=stream(_REWARD_STREAM, agent_key),
      belief=stream(_BELIEF_STREAM, agent_key),
      action=stream(_ACTION_STREAM, agent_key),
  )


@dataclasses.dataclass(frozen=True)
class Trajectory:
  """One episode of one agent under one seed.

  Step t is the t-th action (t = 0 .. T-1); cum_regret[t] includes it.
  `diagnostics` is empty for the baselines and has one entry per step for
  BLASTS.
  """

  agent: str
  beta_mode: str
  beta: str
  seed: int
  actions: np.ndarray
  rewards: np.ndarray
  expected_regret: np.ndarray
  diagnostics: tuple[agents_lib.StepDiagnostics, ...] = ()

  @property
  def horizon(self) -> int:
    return self.actions.size

  @property
  def cum_regret(self) -> np.ndarray:
    return np.cumsum(self.expected_regret)


class FailedRun(NamedTuple):
  agent: str
  seed: int
  reason: str


class BoundRow(NamedTuple):
  agent: str
  beta_mode: str
  beta: str
  seed: int
  cum_regret: float
  mean_rate_bits: float
  mean_epsilon: float
  gamma_bound: float
  bound: float
  bound_holds: bool


class PlateauRow(NamedTuple):
  """Late regret growth of one agent against the reference's early growth.

  final_increment: Mean cumulative regret added over the last tenth of the
    horizon.
  reference_increment: The reference agent's mean cumulative regret over the
    first tenth of the horizon.
  """

  agent: str
  final_increment: float
  reference_increment: float

  @property
  def locked_on(self) -> bool:
    return self.final_increment < PLATEAU_FRACTION * self.reference_increment


@dataclasses.dataclass(frozen=True)
class ExperimentResult:
  trajectories: list[Trajectory]
  summary: list[SummaryRow]
  bounds: list[BoundRow]
  failures: list[FailedRun]
  plateaus: list[PlateauRow] = dataclasses.field(default_factory=list)


def resolve_schedule(
    spec: experiment_config.AgentSpec,
    config: experiment_config.ExperimentConfig,
) -> agents_lib.BetaSchedule | None:
  """The beta schedule of a BLASTS agent, None for the baselines."""
  if spec.policy != experiment_config.BLASTS:
    return None
  if spec.beta_mode == agents_lib.ADAPTIVE:
    return agents_lib.BetaSchedule.adaptive(config.adaptive_epsilon)
  if spec.beta_mode == experiment_config.BOUND_TUNED:
    return agents_lib.BetaSchedule.fixed(
        agents_lib.bound_tuned_beta(
            config.gamma_bound, agents_lib.FiniteHorizon(config.horizon)
        )
    )
  return agents_lib.BetaSchedule.fixed(spec.beta)


def run_episode(
    config: experiment_config.ExperimentConfig,
    spec: experiment_config.AgentSpec,
    seed: int,
) -> Trajectory:
  """Runs select, pull and update for config.horizon steps.

  Raises:
    FloatingPointError: If a BLASTS step produces a non-finite diagnostic.
  """
  streams = make_streams(seed, spec.descriptor)
  kind = config.bandit_kind
  env = bandit.sample_environment(kind, config.num_arms, streams.environment)
  gaps = bandit.optimal_stats(env).gaps
  state = belief_lib.new_belief(kind, config.num_arms, config.prior)
  schedule = resolve_schedule(spec, config)

  actions = np.zeros(config.horizon, dtype=int)
  rewards = np.zeros(config.horizon)
  diagnostics = []
  for t in range(config.horizon):
    if spec.policy == experiment_config.TS:
      action = agents_lib.ts_select(state, streams.belief)
    elif spec.policy == experiment_config.UNIFORM:
      action = agents_lib.uniform_select(config.num_arms, streams.action)
    else:
      action, step = agents_lib.blasts_select(
          state,
          schedule,
          config.num_samples,
          config.ba_max_iters,
          config.ba_tol,
          streams.belief,
          streams.action,
      )
      if not step.is_finite():
        raise FloatingPointError(
            f"Non-finite diagnostics for agent {spec.descriptor}, seed {seed},"
            f" step {t}: {step}"
        )
      diagnostics.append(step)
    reward = bandit.pull(kind, env, action, streams.reward)
    state = belief_lib.update_belief(state, action, reward)
    actions[t] = action
    rewards[t] = reward

  fixed = schedule is not None and schedule.mode == agents_lib.FIXED
  return Trajectory(
      agent=spec.descriptor,
      beta_mode=spec.beta_mode,
      beta=repr(schedule.beta) if fixed else "",
      seed=seed,
      actions=actions,
      rewards=rewards,
      expected_regret=gaps[actions],
      diagnostics=tuple(diagnostics),
  )


def summarize(trajectories: Sequence[Trajectory]) -> list[SummaryRow]:
  """Mean cumulative regret per (agent, t) with a normal 95% CI over seeds.

  Agents keep their first-appearance order; within an agent the seeds are
  reduced in ascending order so the result does not depend on the order the
  episodes finished in.

  Raises:
    ValueError: If there are no trajectories or an agent's horizons differ.
  """
  if not trajectories:
    raise ValueError("Cannot summarize an empty set of trajectories.")
  groups: dict[str, list[Trajectory]] = {}
  for trajectory in trajectories:
    groups.setdefault(trajectory.agent, []).append(trajectory)

  rows = []
  for agent, group in groups.items():
    group = sorted(group, key=lambda trajectory: trajectory.seed)
    if len({trajectory.horizon for trajectory in group}) != 1:
      raise ValueError(f"Trajectories of {agent} have different horizons.")
    cum_regret = np.stack([trajectory.cum_regret for trajectory in group])
    count = cum_regret.shape[0]
    mean = cum_regret.mean(axis=0)
    if count > 1:
      half_width = CI95_Z * cum_regret.std(axis=0, ddof=1) / math.sqrt(count)
    else:
      half_width = np.zeros_like(mean)
    first = group[0]
    rows.extend(
        SummaryRow(
            agent=agent,
            beta_mode=first.beta_mode,
            beta=first.beta,
            t=t,
            mean_cum_regret=float(mean[t]),
            ci95_lo=float(mean[t] - half_width[t]),
            ci95_hi=float(mean[t] + half_width[t]),
        )
        for t in range(mean.size)
    )
  return rows


def bound_report(
    trajectories: Iterable[Trajectory],
    config: experiment_config.ExperimentConfig,
) -> list[BoundRow]:
  """Compares each BLASTS run's final regret with its finite-horizon bound.

  The rate and the target's root mean squared regret are averaged over the
  run's steps. The bound is loose; `bound_holds` is reported, not enforced.
  """
  rows = []
  for trajectory in trajectories:
    if not trajectory.diagnostics:
      continue
    mean_rate_bits = float(
        np.mean([step.rate_bits for step in trajectory.diagnostics])
    )
    mean_epsilon = float(
        np.mean([step.epsilon_target for step in trajectory.diagnostics])
    )
    bound = agents_lib.regret_bound_rhs(
        mean_rate_bits,
        mean_epsilon,
        config.gamma_bound,
        agents_lib.FiniteHorizon(trajectory.horizon),
    )
    cum_regret = float(trajectory.cum_regret[-1])
    rows.append(
        BoundRow(
            agent=trajectory.agent,
            beta_mode=trajectory.beta_mode,
            beta=trajectory.beta,
            seed=trajectory.seed,
            cum_regret=cum_regret,
            mean_rate_bits=mean_rate_bits,
            mean_epsilon=mean_epsilon,
            gamma_bound=config.gamma_bound,
            bound=bound,
            bound_holds=cum_regret <= bound,
        )
    )
  return rows


def plateau_report(
    summary: Sequence[SummaryRow], reference: str = experiment_config.TS
) -> list[PlateauRow]:
  """Compares every agent's final-tenth regret increment with the reference.

  An agent whose increment is below PLATEAU_FRACTION of the reference's
  first-tenth regret has settled on a fixed, possibly satisficing, policy.
  Returns an empty list when the reference agent is not in the summary.
  """
  curves: dict[str, list[float]] = {}
  for row in summary:
    curves.setdefault(row.agent, []).append(row.mean_cum_regret)
  if reference not in curves:
    return []
  reference_curve = curves[reference]
  window = max(1, len(reference_curve) // 10)
  reference_increment = reference_curve[window - 1]
  rows = []
  for agent, curve in curves.items():
    if agent == reference:
      continue
    tail = max(1, len(curve) // 10)
    start = curve[-tail - 1] if len(curve) > tail else 0.0
    rows.append(PlateauRow(agent, curve[-1] - start, reference_increment))
  return rows


def run_experiment(
    config: experiment_config.ExperimentConfig, emit: bool = True
) -> ExperimentResult:
  """Runs every (agent, seed) pair and aggregates the completed ones.

  Pairs run on a thread pool of config.parallelism workers; results are
  collected in (agent, seed) order regardless of completion order. A failing
  pair is recorded as a FailedRun and left out of the summary.

  Args:
    config: The experiment to run.
    emit: Whether to write the CSVs (and summary.svg) to config.output_dir.

  Returns:
    Trajectories, summary, bound report, plateau report and failures.

  Raises:
    FileExistsError: If emitting would overwrite results without force.
    RuntimeError: If every pair failed.
  """
  if emit:
    check_output_paths(
        config.output_dir, _result_files(config.svg), config.force
    )
  pairs = [(spec, seed) for spec in config.agent_specs for seed in config.seeds]
  logging.info(
      "Running %d agents x %d seeds, horizon %d, %d threads",
      len(config.agents),
      len(config.seeds),
      config.horizon,
      config.parallelism,
  )

  trajectories = []
  failures = []
  with futures.ThreadPoolExecutor(max_workers=config.parallelism) as executor:
    jobs = [
        executor.submit(run_episode, config, spec, seed) for spec, seed in pairs
    ]
    for (spec, seed), job in zip(pairs, jobs):
      try:
        trajectory = job.result()
      except Exception as e:  # pylint: disable=broad-exception-caught
        logging.warning("Run %s seed %d failed: %s", spec.descriptor, seed, e)
        failures.append(FailedRun(spec.descriptor, seed, str(e)))
        continue
      logging.info(
          "Finished %s seed %d: cum_regret %.3f",
          spec.descriptor,
          seed,
          trajectory.cum_regret[-1],
      )
      trajectories.append(trajectory)

  if not trajectories:
    raise RuntimeError(f"All {len(pairs)} runs failed: {failures[0].reason}")
  if failures:
    logging.warning(
        "Summary covers %d of %d runs; %d failed.",
        len(trajectories),
        len(pairs),
        len(failures),
    )
  bounds = bound_report(trajectories, config)
  if bounds:
    logging.info(
        "Regret bound held on %d of %d BLASTS runs.",
        sum(row.bound_holds for row in bounds),
        len(bounds),
    )
  summary = summarize(trajectories)
  plateaus = plateau_report(summary)
  for row in plateaus:
    if row.locked_on:
      logging.info(
          "%s added %.3f regret over the final tenth, under %.2f of %s's"
          " first-tenth %.3f.",
          row.agent,
          row.final_increment,
          PLATEAU_FRACTION,
          experiment_config.TS,
          row.reference_increment,
      )
  result = ExperimentResult(
      trajectories=trajectories,
      summary=summary,
      bounds=bounds,
      failures=failures,
      plateaus=plateaus,
  )
  if emit:
    emit_outputs(
        config.output_dir, result, svg=config.svg, force=config.force
    )
  return result


def _result_files(svg: bool) -> list[str]:
  files = [STEPS_FILE, SUMMARY_FILE, BOUNDS_FILE]
  if svg:
    files.append(SVG_FILE)
  return files


def check_output_paths(
    out_dir: str, file_names: Iterable[str], force: bool
) -> None:
  """Raises FileExistsError if any output already exists and force is off."""
  if force:
    return
  for name in file_names:
    path = os.path.join(out_dir, name)
    if os.path.exists(path):
      raise FileExistsError(
          f"Refusing to overwrite {path}; pass --force to replace it."
      )


def _format(value: Any) -> str:
  if value is None:
    return ""
  if isinstance(value, (bool, np.bool_)):
    return str(bool(value)).lower()
  if isinstance(value, (int, np.integer)):
    return str(int(value))
  if isinstance(value, (float, np.floating)):
    return repr(float(value))
  return str(value)


def _write_csv(
    path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
  try:
    with open(path, "w", encoding="utf-8", newline="") as output_file:
      writer = csv.writer(output_file, lineterminator="\n")
      writer.writerow(header)
      for row in rows:
        writer.writerow([_format(value) for value in row])
  except OSError as e:
    raise IOError(f"Failed to write {path}") from e
  logging.info("Wrote %s", path)


def _step_rows(trajectory: Trajectory) -> Iterable[tuple[Any, ...]]:
  cum_regret = trajectory.cum_regret
  for t in range(trajectory.horizon):
    if trajectory.diagnostics:
      step = trajectory.diagnostics[t]
      beta = step.beta_used
      diagnostics = (
          step.rate_bits,
          step.achieved_distortion,
          step.ba_iterations,
          step.psi_bar,
      )
    else:
      beta = None
      diagnostics = (None, None, None, None)
    yield (
        trajectory.agent,
        trajectory.beta_mode,
        beta,
        trajectory.seed,
        t,
        trajectory.actions[t],
        trajectory.rewards[t],
        trajectory.expected_regret[t],
        cum_regret[t],
    ) + diagnostics


def emit_outputs(
    out_dir: str,
    result: ExperimentResult | None = None,
    rd_points: Sequence[rdcore.RdCurvePoint] | None = None,
    svg: bool = True,
    force: bool = False,
) -> list[str]:
  """Writes the experiment and/or rate-distortion curve files.

  Args:
    out_dir: Output directory, created if missing.
    result: Experiment to write as steps.csv, summary.csv, bounds.csv and,
      when svg is set, summary.svg.
    rd_points: Curve to write as rdcurve.csv.
    svg: Whether to draw summary.svg.
    force: Whether existing files may be overwritten.

  Returns:
    The written paths.

  Raises:
    FileExistsError: If a target exists and force is off.
    IOError: If the directory or a file cannot be written.
  """
  file_names = []
  if result is not None:
    file_names.extend(_result_files(svg))
  if rd_points is not None:
    file_names.append(RDCURVE_FILE)
  check_output_paths(out_dir, file_names, force)
  try:
    os.makedirs(out_dir, exist_ok=True)
  except OSError as e:
    raise IOError(f"Failed to create output directory {out_dir}") from e

  written = []
  if result is not None:
    steps_path = os.path.join(out_dir, STEPS_FILE)
    _write_csv(
        steps_path,
        STEPS_HEADER,
        (row for trajectory in result.trajectories
         for row in _step_rows(trajectory)),
    )
    summary_path = os.path.join(out_dir, SUMMARY_FILE)
    _write_csv(summary_path, summary_plot.SUMMARY_HEADER, result.summary)
    bounds_path = os.path.join(out_dir, BOUNDS_FILE)
    _write_csv(bounds_path, BOUNDS_HEADER, result.bounds)
    written.extend([steps_path, summary_path, bounds_path])
    if svg:
      svg_path = os.path.join(out_dir, SVG_FILE)
      summary_plot.plot_summary(result.summary, svg_path)
      written.append(svg_path)
  if rd_points is not None:
    rdcurve_path = os.path.join(out_dir, RDCURVE_FILE)
    _write_csv(rdcurve_path, RDCURVE_HEADER, rd_points)
    written.append(rdcurve_path)
  return written
