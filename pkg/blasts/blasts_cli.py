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
"""Command-line entry point for BLASTS experiments.

  python3 blasts_cli.py run --arms 10 --horizon 2000 --seeds 10 \
      --agents ts,uniform --beta 0.001,8192 --adaptive-beta --out results
  python3 blasts_cli.py sweep --betas 1,4,16,64,256 --out sweep
  python3 blasts_cli.py rd-curve --source binary-hamming --out curve
  python3 blasts_cli.py plot results/summary.csv
"""

import argparse
import logging
import os
import sys
from typing import Any

import agents
import bandit
import belief
import experiment_config
import harness
import numpy as np
import rdcore
import summary_plot

BINARY_HAMMING = "binary-hamming"
ENSEMBLE = "ensemble"
DEFAULT_RD_BETAS = "0,0.5,1,2,4,8,16,32,64"


def _float_list(text: str) -> list[float]:
  try:
    return [float(value) for value in text.split(",") if value.strip()]
  except ValueError:
    raise argparse.ArgumentTypeError(
        f"Expected a comma-separated list of numbers, got {text!r}"
    ) from None


def _str_list(text: str) -> list[str]:
  return [value.strip() for value in text.split(",") if value.strip()]


def _seeds(text: str) -> int | list[int]:
  """A seed count ("10") or an explicit comma-separated list ("3,5")."""
  try:
    if "," in text:
      return [int(value) for value in text.split(",") if value.strip()]
    return int(text)
  except ValueError:
    raise argparse.ArgumentTypeError(
        f"Expected a seed count or a comma-separated list, got {text!r}"
    ) from None


def _experiment_flags() -> argparse.ArgumentParser:
  flags = argparse.ArgumentParser(add_help=False)
  flags.add_argument(
      "--config",
      type=str,
      help="Flat TOML file of experiment settings; flags override it.",
  )
  flags.add_argument(
      "--env", choices=bandit.REWARD_FAMILIES, help="Reward family."
  )
  flags.add_argument("--arms", type=int, help="Number of arms.")
  flags.add_argument("--horizon", type=int, help="Steps per episode.")
  flags.add_argument(
      "--seeds", type=_seeds, help="Seed count or comma-separated seeds."
  )
  flags.add_argument(
      "--samples", type=int, help="Posterior samples per BLASTS step."
  )
  flags.add_argument(
      "--ba-iters", type=int, help="Blahut-Arimoto iteration cap."
  )
  flags.add_argument(
      "--ba-tol", type=float, help="Blahut-Arimoto distortion-change tolerance."
  )
  flags.add_argument("--out", type=str, help="Output directory.")
  flags.add_argument("--threads", type=int, help="Episodes run in parallel.")
  flags.add_argument(
      "--reward-noise-sd",
      type=float,
      help="Reward noise standard deviation of the gaussian family.",
  )
  flags.add_argument(
      "--prior-alpha", type=float, help="Beta prior alpha (bernoulli)."
  )
  flags.add_argument(
      "--prior-beta", type=float, help="Beta prior beta (bernoulli)."
  )
  flags.add_argument(
      "--prior-mean", type=float, help="Normal prior mean (gaussian)."
  )
  flags.add_argument(
      "--prior-var", type=float, help="Normal prior variance (gaussian)."
  )
  flags.add_argument(
      "--noise-var",
      type=float,
      help="Observation noise variance assumed by the gaussian belief.",
  )
  flags.add_argument(
      "--adaptive-epsilon",
      type=float,
      help="Constant added to the information ratio of adaptive beta.",
  )
  flags.add_argument(
      "--info-ratio-bound",
      type=float,
      help="Information-ratio bound of the regret report (default arms/2).",
  )
  flags.add_argument(
      "--force",
      action="store_true",
      default=None,
      help="Overwrite existing output files.",
  )
  flags.add_argument(
      "--svg",
      action=argparse.BooleanOptionalAction,
      default=None,
      help="Draw summary.svg (default on).",
  )
  return flags


def _blasts_flags() -> argparse.ArgumentParser:
  flags = argparse.ArgumentParser(add_help=False)
  flags.add_argument(
      "--beta",
      type=_float_list,
      default=[],
      help="Adds one fixed-beta BLASTS agent per comma-separated value.",
  )
  flags.add_argument(
      "--adaptive-beta",
      action="store_true",
      help="Adds the adaptive-beta BLASTS agent.",
  )
  return flags


def _parse_args(args) -> argparse.Namespace:
  argparser = argparse.ArgumentParser(
      description=(
          "Runs Blahut-Arimoto satisficing Thompson sampling bandit"
          " experiments and rate-distortion curves."
      )
  )
  subparsers = argparser.add_subparsers(dest="command", required=True)
  flags = _experiment_flags()
  blasts_flags = _blasts_flags()

  run_parser = subparsers.add_parser(
      "run", parents=[flags, blasts_flags], help="Runs an experiment."
  )
  run_parser.add_argument(
      "--agents",
      type=_str_list,
      help="Comma-separated agents: ts, uniform, blasts:<beta>, "
      "blasts:adaptive, blasts:bound-tuned.",
  )

  sweep_parser = subparsers.add_parser(
      "sweep",
      parents=[flags, blasts_flags],
      help="Runs the baselines plus one BLASTS agent per beta.",
  )
  sweep_parser.add_argument(
      "--betas",
      type=_float_list,
      required=True,
      help="Comma-separated beta values.",
  )
  sweep_parser.add_argument(
      "--agents",
      type=_str_list,
      help="Baseline agents kept alongside the sweep (default ts,uniform).",
  )

  rd_parser = subparsers.add_parser(
      "rd-curve",
      parents=[flags],
      help="Traces a rate-distortion curve into rdcurve.csv.",
  )
  rd_parser.add_argument(
      "--source",
      choices=(BINARY_HAMMING, ENSEMBLE),
      default=BINARY_HAMMING,
      help="Synthetic source when no distortion file is given.",
  )
  rd_parser.add_argument(
      "--distortion-file",
      type=str,
      help="CSV distortion matrix, one source point per row.",
  )
  rd_parser.add_argument(
      "--weights-file",
      type=str,
      help="Source weights, one per line (uniform if absent).",
  )
  rd_parser.add_argument(
      "--betas",
      type=_float_list,
      default=_float_list(DEFAULT_RD_BETAS),
      help="Comma-separated beta values.",
  )
  rd_parser.add_argument(
      "--seed", type=int, default=0, help="Seed of the ensemble source."
  )

  plot_parser = subparsers.add_parser(
      "plot", help="Draws summary.svg from a summary.csv."
  )
  plot_parser.add_argument("summary", type=str, help="Path to summary.csv.")
  plot_parser.add_argument(
      "--output",
      type=str,
      help="SVG path (default: summary.svg next to the summary).",
  )
  plot_parser.add_argument(
      "--force", action="store_true", help="Overwrite an existing SVG."
  )

  return argparser.parse_args(args)


_CONFIG_FLAGS = (
    "env",
    "arms",
    "horizon",
    "seeds",
    "samples",
    "ba_iters",
    "ba_tol",
    "out",
    "threads",
    "reward_noise_sd",
    "prior_alpha",
    "prior_beta",
    "prior_mean",
    "prior_var",
    "noise_var",
    "adaptive_epsilon",
    "info_ratio_bound",
    "force",
    "svg",
    "agents",
)


def _build_config(
    args: argparse.Namespace, extra_agents: list[str] | None = None
) -> experiment_config.ExperimentConfig:
  overrides: dict[str, Any] = {
      name: getattr(args, name, None) for name in _CONFIG_FLAGS
  }
  config = experiment_config.build_config(args.config, overrides)
  if not extra_agents:
    return config
  data = config.model_dump(by_alias=True)
  data["agents"] = config.agents + extra_agents
  return experiment_config.ExperimentConfig.model_validate(data)


def _blasts_agents(args: argparse.Namespace, betas: list[float]) -> list[str]:
  extra_agents = [f"blasts:{beta!r}" for beta in betas]
  if args.adaptive_beta:
    extra_agents.append(f"blasts:{agents.ADAPTIVE}")
  return extra_agents


def _run(args: argparse.Namespace) -> None:
  harness.run_experiment(
      _build_config(args, _blasts_agents(args, args.beta))
  )


def _sweep(args: argparse.Namespace) -> None:
  harness.run_experiment(
      _build_config(args, _blasts_agents(args, args.betas + args.beta))
  )


def _rd_source(
    args: argparse.Namespace, config: experiment_config.ExperimentConfig
) -> tuple[np.ndarray, np.ndarray]:
  """Source weights and distortion matrix for the rd-curve command."""
  if args.distortion_file:
    try:
      d = np.loadtxt(args.distortion_file, delimiter=",", ndmin=2)
      if args.weights_file:
        weights = np.loadtxt(args.weights_file, ndmin=1)
      else:
        weights = np.full(d.shape[0], 1.0 / d.shape[0])
    except OSError as e:
      raise IOError(f"Failed to read the rate-distortion source: {e}") from e
    return weights, d
  if args.weights_file:
    raise ValueError("--weights-file requires --distortion-file.")
  if args.source == ENSEMBLE:
    state = belief.new_belief(
        config.bandit_kind, config.num_arms, config.prior
    )
    samples = belief.sample_means(
        state, config.num_samples, np.random.default_rng(args.seed)
    )
    d = agents.build_distortion_matrix(samples)
    return np.full(d.shape[0], 1.0 / d.shape[0]), d
  return rdcore.binary_hamming_instance()


def _rd_curve(args: argparse.Namespace) -> None:
  config = _build_config(args)
  weights, d = _rd_source(args, config)
  points = rdcore.rd_curve(
      weights, d, args.betas, config.ba_max_iters, config.ba_tol
  )
  for point in points:
    if not point.converged:
      logging.warning(
          "beta %r did not converge in %d iterations.",
          point.beta,
          point.iterations,
      )
  harness.emit_outputs(config.output_dir, rd_points=points, force=config.force)


def _plot(args: argparse.Namespace) -> None:
  output = args.output or os.path.join(
      os.path.dirname(args.summary), harness.SVG_FILE
  )
  harness.check_output_paths(
      os.path.dirname(output), [os.path.basename(output)], args.force
  )
  summary_plot.plot_summary(summary_plot.read_summary_csv(args.summary), output)


_COMMANDS = {
    "run": _run,
    "sweep": _sweep,
    "rd-curve": _rd_curve,
    "plot": _plot,
}


def _one_line(error: Exception) -> str:
  return " ".join(str(error).split())


def main(args=sys.argv[1:]) -> int:
  logging.basicConfig(
      level=logging.INFO,
      format="%(asctime)s [%(levelname)s] %(message)s",
  )
  args = _parse_args(args)
  try:
    _COMMANDS[args.command](args)
  except Exception as e:  # pylint: disable=broad-exception-caught
    logging.error("%s failed: %s", args.command, _one_line(e))
    return 1
  return 0


if __name__ == "__main__":
  sys.exit(main())
