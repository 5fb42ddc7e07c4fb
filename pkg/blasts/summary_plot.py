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
"""Summary table rows, summary.csv parsing and the summary.svg chart."""

import csv
import itertools
import logging
from typing import NamedTuple, Sequence

import matplotlib

matplotlib.use("Agg")

# pylint: disable=wrong-import-position
from matplotlib import pyplot as plt
import numpy as np

SUMMARY_HEADER = (
    "agent",
    "beta_mode",
    "beta",
    "t",
    "mean_cum_regret",
    "ci95_lo",
    "ci95_hi",
)


class SummaryRow(NamedTuple):
  """Mean cumulative regret of one agent at step t, with its 95% CI."""

  agent: str
  beta_mode: str
  beta: str
  t: int
  mean_cum_regret: float
  ci95_lo: float
  ci95_hi: float


def read_summary_csv(path: str) -> list[SummaryRow]:
  """Parses a summary.csv written by the harness.

  Raises:
    IOError: If the file cannot be read.
    ValueError: If the header does not match the summary schema.
  """
  try:
    with open(path, "r", encoding="utf-8", newline="") as summary_file:
      reader = csv.reader(summary_file)
      header = tuple(next(reader, ()))
      if header != SUMMARY_HEADER:
        raise ValueError(f"Unexpected summary header in {path}: {header}")
      return [
          SummaryRow(
              agent=agent,
              beta_mode=beta_mode,
              beta=beta,
              t=int(t),
              mean_cum_regret=float(mean),
              ci95_lo=float(lo),
              ci95_hi=float(hi),
          )
          for agent, beta_mode, beta, t, mean, lo, hi in reader
      ]
  except OSError as e:
    raise IOError(f"Failed to read summary file {path}") from e


def plot_summary(rows: Sequence[SummaryRow], path: str) -> None:
  """Draws mean cumulative regret against t per agent with shaded CIs.

  Raises:
    ValueError: If there are no rows.
    IOError: If the SVG cannot be written.
  """
  if not rows:
    raise ValueError("Cannot plot an empty summary.")
  figure, axes = plt.subplots(figsize=(8, 5))
  try:
    for agent, group in itertools.groupby(rows, key=lambda row: row.agent):
      group = list(group)
      t = np.array([row.t for row in group])
      line = axes.plot(
          t, [row.mean_cum_regret for row in group], label=agent
      )[0]
      axes.fill_between(
          t,
          [row.ci95_lo for row in group],
          [row.ci95_hi for row in group],
          color=line.get_color(),
          alpha=0.2,
          linewidth=0,
      )
    axes.set_xlabel("t")
    axes.set_ylabel("Cumulative regret")
    axes.legend()
    axes.grid(alpha=0.3)
    figure.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "blasts"}):
      figure.savefig(path, format="svg", metadata={"Date": None})
  except OSError as e:
    raise IOError(f"Failed to write plot to {path}") from e
  finally:
    plt.close(figure)
  logging.info("Wrote %s", path)
