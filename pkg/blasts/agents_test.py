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
"""Tests for the agents module."""

import dataclasses
import itertools
import math
import unittest

import agents
import bandit
import belief
import numpy as np
import rdcore

_BERNOULLI = bandit.BanditKind(bandit.BERNOULLI)


def _collapsed_belief(means: list[float]) -> belief.BeliefState:
  """A Beta belief so concentrated that every draw is the given means."""
  means = np.asarray(means)
  return dataclasses.replace(
      belief.new_belief(_BERNOULLI, means.size),
      first=means * 1e9,
      second=(1.0 - means) * 1e9,
  )


def _simplex_grid(num_arms: int, resolution: int) -> np.ndarray:
  points = []
  for head in itertools.product(range(resolution + 1), repeat=num_arms - 1):
    if sum(head) <= resolution:
      points.append(list(head) + [resolution - sum(head)])
  return np.asarray(points, dtype=float) / resolution


def _separated_ensemble(rng, num_samples=16, num_arms=5):
  """Each row is a permutation of evenly spaced means, 0.1 apart."""
  base = np.arange(num_arms) * 0.1
  return np.stack([rng.permutation(base) for _ in range(num_samples)])


class BetaScheduleTest(unittest.TestCase):

  def test_negative_fixed_beta_raises(self):
    with self.assertRaises(ValueError):
      agents.BetaSchedule.fixed(-1.0)

  def test_non_positive_epsilon_raises(self):
    with self.assertRaises(ValueError):
      agents.BetaSchedule.adaptive(0.0)


class BuildDistortionMatrixTest(unittest.TestCase):

  def test_two_arm_row(self):
    np.testing.assert_allclose(
        agents.build_distortion_matrix([[1.0, 0.3]]), [[0.0, 0.49]]
    )

  def test_row_minimum_is_zero_at_argmax(self):
    samples = np.random.default_rng(0).random((32, 6))

    d = agents.build_distortion_matrix(samples)

    np.testing.assert_array_equal(d.min(axis=1), np.zeros(32))
    np.testing.assert_array_equal(
        d[np.arange(32), samples.argmax(axis=1)], np.zeros(32)
    )

  def test_all_arms_optimal(self):
    np.testing.assert_array_equal(
        agents.build_distortion_matrix([[0.5, 0.5, 0.5]]), [[0.0, 0.0, 0.0]]
    )

  def test_single_arm_raises(self):
    with self.assertRaises(ValueError):
      agents.build_distortion_matrix([[0.5], [0.2]])


class ComputeTargetTest(unittest.TestCase):

  def test_zero_beta_keeps_uniform_channel(self):
    samples = np.random.default_rng(1).random((64, 7))

    solution, diagnostics = agents.compute_target(
        samples, agents.BetaSchedule.fixed(0.0)
    )

    np.testing.assert_array_equal(solution.channel, np.full((64, 7), 1 / 7))
    self.assertAlmostEqual(diagnostics.rate_bits, 0.0, places=12)
    self.assertIsNone(diagnostics.psi_bar)

  def test_huge_beta_recovers_optimal_action(self):
    samples = _separated_ensemble(np.random.default_rng(2))

    solution, _ = agents.compute_target(
        samples, agents.BetaSchedule.fixed(2.0**20)
    )

    mass = solution.channel[np.arange(16), samples.argmax(axis=1)]
    self.assertTrue(np.all(mass >= 1 - 1e-6))

  def test_rate_bounded_by_optimal_action_entropy(self):
    rng = np.random.default_rng(3)
    tol = rdcore.DEFAULT_TOL
    for _ in range(100):
      num_arms = int(rng.integers(2, 11))
      samples = rng.random((64, num_arms))
      beta = float(2.0 ** rng.uniform(-2, 10))
      labels = np.bincount(samples.argmax(axis=1), minlength=num_arms) / 64

      _, diagnostics = agents.compute_target(
          samples, agents.BetaSchedule.fixed(beta), ba_tol=tol
      )

      self.assertLessEqual(
          diagnostics.rate_bits, rdcore.entropy_bits(labels) + 2 * tol
      )

  def test_adaptive_schedule_reports_info_ratio(self):
    samples = np.random.default_rng(4).random((64, 10))
    schedule = agents.BetaSchedule.adaptive()

    _, diagnostics = agents.compute_target(samples, schedule)

    self.assertIsNotNone(diagnostics.psi_bar)
    self.assertAlmostEqual(
        diagnostics.beta_used, agents.adaptive_beta(samples, schedule.epsilon)
    )
    self.assertAlmostEqual(
        diagnostics.epsilon_target,
        math.sqrt(diagnostics.achieved_distortion),
    )


class BlastsSelectTest(unittest.TestCase):

  def test_zero_beta_is_uniform(self):
    state = belief.new_belief(_BERNOULLI, 4)
    rng = np.random.default_rng(5)
    counts = np.zeros(4)
    draws = 10_000

    for _ in range(draws):
      action, _ = agents.blasts_select(
          state, agents.BetaSchedule.fixed(0.0), 8, 100, 1e-6, rng
      )
      counts[action] += 1

    sigma = math.sqrt(0.25 * 0.75 / draws)
    np.testing.assert_array_less(np.abs(counts / draws - 0.25), 4 * sigma)

  def test_huge_beta_matches_thompson_sampling(self):
    state = _collapsed_belief([0.2, 0.9, 0.5])
    rng = np.random.default_rng(6)

    for _ in range(20):
      action, diagnostics = agents.blasts_select(
          state, agents.BetaSchedule.fixed(2.0**20), 16, 100, 1e-6, rng
      )
      self.assertEqual(action, 1)
      self.assertEqual(agents.ts_select(state, rng), 1)
      self.assertTrue(diagnostics.is_finite())

  def test_fifty_arm_rate_bound(self):
    rng = np.random.default_rng(7)
    state = belief.new_belief(_BERNOULLI, 50)
    for arm in range(50):
      state = belief.update_belief(state, arm, float(arm % 3 == 0))

    _, diagnostics = agents.blasts_select(
        state, agents.BetaSchedule.fixed(64.0), 64, 100, 1e-6, rng
    )

    self.assertLessEqual(diagnostics.ba_iterations, 100)
    self.assertLessEqual(diagnostics.rate_bits, math.log2(50))

  def test_deterministic_given_streams(self):
    state = belief.new_belief(_BERNOULLI, 6)
    schedule = agents.BetaSchedule.adaptive()

    first = agents.blasts_select(
        state, schedule, 32, 100, 1e-6, np.random.default_rng(8)
    )
    second = agents.blasts_select(
        state, schedule, 32, 100, 1e-6, np.random.default_rng(8)
    )

    self.assertEqual(first, second)


class TsSelectTest(unittest.TestCase):

  def test_collapsed_belief(self):
    state = _collapsed_belief([0.1, 0.9])
    rng = np.random.default_rng(0)

    self.assertEqual({agents.ts_select(state, rng) for _ in range(100)}, {1})

  def test_symmetric_belief(self):
    state = belief.new_belief(_BERNOULLI, 2)
    rng = np.random.default_rng(1)
    draws = 10_000

    frequency = np.mean([agents.ts_select(state, rng) for _ in range(draws)])

    self.assertAlmostEqual(frequency, 0.5, delta=4 * math.sqrt(0.25 / draws))

  def test_dominant_arm(self):
    state = dataclasses.replace(
        belief.new_belief(_BERNOULLI, 2),
        first=np.array([100.0, 1.0]),
        second=np.array([1.0, 100.0]),
    )
    rng = np.random.default_rng(2)

    picks = [agents.ts_select(state, rng) for _ in range(1000)]

    self.assertGreaterEqual(picks.count(0) / 1000, 0.99)


class UniformSelectTest(unittest.TestCase):

  def test_single_arm(self):
    self.assertEqual(agents.uniform_select(1, np.random.default_rng(0)), 0)

  def test_frequencies(self):
    rng = np.random.default_rng(1)
    draws = 100_000

    counts = np.bincount(
        [agents.uniform_select(50, rng) for _ in range(draws)], minlength=50
    )

    sigma = math.sqrt(0.02 * 0.98 / draws)
    np.testing.assert_array_less(np.abs(counts / draws - 0.02), 4 * sigma)

  def test_reproducible(self):
    first = np.random.default_rng(3)
    second = np.random.default_rng(3)

    self.assertEqual(
        [agents.uniform_select(10, first) for _ in range(20)],
        [agents.uniform_select(10, second) for _ in range(20)],
    )

  def test_no_arms_raises(self):
    with self.assertRaises(ValueError):
      agents.uniform_select(0, np.random.default_rng(0))


class InfoRatioMinTest(unittest.TestCase):

  def test_zero_regret_arm(self):
    estimate = agents.info_ratio_min([0.3, 0.0, 0.5], [0.1, 0.0, 0.2], 1e-8)

    self.assertEqual(estimate.psi_bar, 0.0)
    np.testing.assert_array_equal(estimate.minimizer, [0.0, 1.0, 0.0])

  def test_single_arm(self):
    estimate = agents.info_ratio_min([0.5], [0.1], 1e-8)

    self.assertAlmostEqual(estimate.psi_bar, 0.25 / (0.1 + 1e-8))
    np.testing.assert_array_equal(estimate.minimizer, [1.0])

  def test_beats_simplex_grid(self):
    rng = np.random.default_rng(4)
    grid = _simplex_grid(4, 37)
    for _ in range(50):
      deltas = rng.random(4)
      variances = rng.random(4) * 0.1
      grid_values = (grid @ deltas) ** 2 / (grid @ variances + 1e-8)

      estimate = agents.info_ratio_min(deltas, variances, 1e-8)

      self.assertLessEqual(estimate.psi_bar, grid_values.min() + 1e-4)
      self.assertLessEqual(np.count_nonzero(estimate.minimizer), 2)
      self.assertAlmostEqual(estimate.minimizer.sum(), 1.0)

  def test_mismatched_lengths_raise(self):
    with self.assertRaises(ValueError):
      agents.info_ratio_min([0.1, 0.2], [0.1], 1e-8)


class AdaptiveBetaTest(unittest.TestCase):

  def test_dominant_arm_drives_beta_up(self):
    samples = np.random.default_rng(0).random((64, 5)) * 0.5
    samples[:, 2] = 0.9
    epsilon = 1e-8

    self.assertAlmostEqual(
        agents.adaptive_beta(samples, epsilon), 1.0 / epsilon
    )

  def test_identical_rows_stay_finite(self):
    samples = np.tile([0.2, 0.7, 0.4], (10, 1))

    beta = agents.adaptive_beta(samples, 1e-8)

    self.assertTrue(math.isfinite(beta))
    self.assertAlmostEqual(beta, 1e8)

  def test_random_ensemble_is_positive_and_deterministic(self):
    samples = np.random.default_rng(1).random((64, 10))

    beta = agents.adaptive_beta(samples)

    self.assertGreater(beta, 0.0)
    self.assertTrue(math.isfinite(beta))
    self.assertEqual(beta, agents.adaptive_beta(samples.copy()))

  def test_single_sample_raises(self):
    with self.assertRaises(ValueError):
      agents.adaptive_beta(np.array([[0.1, 0.2]]))


class RegretBoundTest(unittest.TestCase):

  def test_zero_information_zero_shortfall(self):
    for mode in [agents.Discounted(0.9), agents.FiniteHorizon(100)]:
      self.assertEqual(agents.regret_bound_rhs(0.0, 0.0, 5.0, mode), 0.0)

  def test_finite_horizon(self):
    bound = agents.regret_bound_rhs(2.0, 0.0, 5.0, agents.FiniteHorizon(100))

    self.assertAlmostEqual(bound, 2 * math.sqrt(5 * 100 * 2 * math.log(2)))
    self.assertAlmostEqual(bound, 52.7, delta=0.1)

  def test_discounted(self):
    bound = agents.regret_bound_rhs(2.0, 0.01, 5.0, agents.Discounted(0.99))

    expected = 2 * math.sqrt(5 * 2 * math.log(2) / (1 - 0.99**2)) + 2.0
    self.assertAlmostEqual(bound, expected)

  def test_gamma_of_one_raises(self):
    with self.assertRaises(ValueError):
      agents.regret_bound_rhs(1.0, 0.1, 5.0, agents.Discounted(1.0))

  def test_bound_tuned_beta(self):
    self.assertAlmostEqual(
        agents.bound_tuned_beta(5.0, agents.FiniteHorizon(100)),
        20.0 / math.log(2),
    )
    self.assertAlmostEqual(
        agents.bound_tuned_beta(5.0, agents.Discounted(0.5)),
        (0.75 / (0.25 * 5.0)) / math.log(2),
    )


if __name__ == "__main__":
  unittest.main()
