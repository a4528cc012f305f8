"""Recover the skeleton of a planted five-column categorical table.

Point ``load_table`` at a local copy of the Adult data to run the same
pipeline on real columns.
"""
from latentsearch import recover_skeleton
from latentsearch.causal import ThresholdRule
from latentsearch.skeleton import planted_table

table, planted = planted_table()
skel = recover_skeleton(table, ThresholdRule.scaled_min(0.8))
print(skel.to_csv())
print(skel.to_dot())
print("planted:", sorted("-".join(sorted(e)) for e in planted))
print("min:1.0 keeps:", sorted(skel.rethreshold(ThresholdRule.scaled_min(1.0)).edges))
