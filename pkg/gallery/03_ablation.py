"""
A small ablation on the synthetic suite
=======================================

Generate a paired Dynamic/Static suite, run the four variants and print the
table. With 40 questions and two seeds this takes a few seconds; the
acceptance suite uses 200 questions and three seeds.
"""

import sys

from divrr import ExperimentConfig, generate_suite, run_ablation
from divrr.harness import report_table

n_questions = int(sys.argv[1]) if len(sys.argv) > 1 else 40
scenarios = generate_suite(n_questions, seed=1)
print(f"{len(scenarios)} scenarios, {sum(len(s.questions) for s in scenarios)} questions")

cfg = ExperimentConfig(seeds=(0, 1), parallelism=1)
reports = run_ablation(cfg, scenarios)
print(report_table(reports))

# Gating is what keeps memory small: the baseline stores nearly every view.
for r in reports:
    print(f"{r.variant:<11} refinement views per episode: {r.metrics['all'].sensing_steps:.2f}")
