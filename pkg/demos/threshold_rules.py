"""Accuracy of three threshold rules as the alphabet grows (small, fast settings)."""
from latentsearch import InferGraphConfig, ThresholdRule, run_accuracy_experiment
from latentsearch.synth import accuracy_to_csv

rules = [ThresholdRule.constant(2), ThresholdRule.scaled_min(0.5), ThresholdRule.scaled_min_offset(1, 1)]
rows = run_accuracy_experiment([4, 8], rules, 8, lambda n: InferGraphConfig(k=n, restarts=4), seed=0)
print(accuracy_to_csv(rows))
