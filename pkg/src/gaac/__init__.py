"""Genetic-algorithm aided actor-critic (GAAC).

Trains a Gaussian control policy from a small, optimized dataset: actor-critic
rounds collect (state, policy-parameter, TD-error) samples, only each round's
best episode is retained, a parameter-fitness regressor plus a genetic
optimizer rewrite part of the dataset, and the final policy is regressed from
the result. Ships a native Mountain Car Continuous environment and an
experiment harness with ablations.
"""

__version__ = "0.1.0"
