"""
Group-wise fusion: smaller pre-log factor
=========================================

Split nine sensors into three groups of three, run a pooled CUSUM per group
and alarm when two groups agree. Compare against second-alarm fusion at the
same ARL, and against a centralized CUSUM over the eight honest sensors.
"""

from bftqcd.experiment import ExperimentConfig, delay_ratio_report, run_sweep

common = dict(attacker="worst_case", thresholds=(3.0, 4.0, 5.0, 6.0), trials=500)
group_cfg = ExperimentConfig(scheme="group", seed=4, **common)
second_cfg = ExperimentConfig(scheme="kth", seed=5, **common)

for cfg in (group_cfg, second_cfg):
    rows = run_sweep(cfg)
    # ratio of delays against the 8-honest-sensor baseline, matched on ARL
    for q in delay_ratio_report(cfg, sweep=rows):
        print(f"{q.scheme:13s} h={q.threshold}: ARL {q.arl_mean:7.2f} delay {q.delay_mean:5.3f}"
              f"  ratio {q.ratio:5.2f} (ceiling {q.ratio_bound:.2f})")

# %%
# Group-wise delays are smaller at comparable ARL and their ratio to the
# honest baseline stays well below ``6(N-1)/N``.
