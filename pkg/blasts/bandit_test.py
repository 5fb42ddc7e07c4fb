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
"""Tests for the bandit module."""

import unittest

import bandit
import numpy as np

_BERNOULLI = bandit.BanditKind(bandit.BERNOULLI)
_GAUSSIAN = bandit.BanditKind(bandit.GAUSSIAN, reward_noise_sd=1.0)


class BanditKindTest(unittest.TestCase):

  def test_unknown_family_raises(self):
    with self.assertRaises(ValueError):
      bandit.BanditKind("poisson")

  def test_non_positive_noise_raises(self):
    with self.assertRaises(ValueError):
      bandit.BanditKind(bandit.GAUSSIAN, reward_noise_sd=0.0)


class SampleEnvironmentTest(unittest.TestCase):

  def test_large_arm_counts(self):
    for num_arms in [50, 250]:
      env = bandit.sample_environment(
          _BERNOULLI, num_arms, np.random.default_rng(0)
      )

      self.assertEqual(env.num_arms, num_arms)
      self.assertTrue(np.all((env.means >= 0) & (env.means <= 1)))

  def test_fixed_seed_is_reproducible(self):
    first = bandit.sample_environment(_GAUSSIAN, 10, np.random.default_rng(5))
    second = bandit.sample_environment(_GAUSSIAN, 10, np.random.default_rng(5))

    np.testing.assert_array_equal(first.means, second.means)

  def test_too_few_arms_raises(self):
    with self.assertRaises(ValueError):
      bandit.sample_environment(_BERNOULLI, 1, np.random.default_rng(0))


class PullTest(unittest.TestCase):

  def test_degenerate_bernoulli_arms(self):
    env = bandit.EnvironmentSample(means=np.array([1.0, 0.0]))
    rng = np.random.default_rng(1)

    for _ in range(100):
      self.assertEqual(bandit.pull(_BERNOULLI, env, 0, rng), 1.0)
      self.assertEqual(bandit.pull(_BERNOULLI, env, 1, rng), 0.0)

  def test_bernoulli_rewards_are_binary(self):
    env = bandit.EnvironmentSample(means=np.array([0.3, 0.6]))
    rng = np.random.default_rng(2)

    rewards = {bandit.pull(_BERNOULLI, env, 1, rng) for _ in range(200)}

    self.assertEqual(rewards, {0.0, 1.0})

  def test_gaussian_sample_mean(self):
    env = bandit.EnvironmentSample(means=np.array([0.3, 0.8]))
    rng = np.random.default_rng(3)

    rewards = [bandit.pull(_GAUSSIAN, env, 0, rng) for _ in range(100_000)]

    self.assertTrue(np.all(np.isfinite(rewards)))
    self.assertAlmostEqual(float(np.mean(rewards)), 0.3, delta=0.02)

  def test_out_of_range_action_raises(self):
    env = bandit.EnvironmentSample(means=np.array([0.3, 0.8]))

    with self.assertRaises(IndexError):
      bandit.pull(_BERNOULLI, env, 2, np.random.default_rng(0))


class OptimalStatsTest(unittest.TestCase):

  def test_gaps(self):
    stats = bandit.optimal_stats(
        bandit.EnvironmentSample(means=np.array([0.2, 0.9, 0.5]))
    )

    self.assertEqual(stats.optimal_arm, 1)
    self.assertEqual(stats.optimal_mean, 0.9)
    np.testing.assert_allclose(stats.gaps, [0.7, 0.0, 0.4])

  def test_ties_break_to_lowest_index(self):
    stats = bandit.optimal_stats(
        bandit.EnvironmentSample(means=np.full(4, 0.5))
    )

    self.assertEqual(stats.optimal_arm, 0)
    np.testing.assert_array_equal(stats.gaps, np.zeros(4))

  def test_gaps_are_exact_differences(self):
    means = np.random.default_rng(4).random(20)

    stats = bandit.optimal_stats(bandit.EnvironmentSample(means=means))

    np.testing.assert_array_equal(stats.gaps, means.max() - means)
    self.assertEqual(stats.gaps[stats.optimal_arm], 0.0)

  def test_squared_gap_row(self):
    stats = bandit.optimal_stats(
        bandit.EnvironmentSample(means=np.array([1.0, 0.3]))
    )

    np.testing.assert_allclose(stats.gaps, [0.0, 0.7])
    np.testing.assert_allclose(stats.gaps**2, [0.0, 0.49])


if __name__ == "__main__":
  unittest.main()
