"""A small Monte Carlo study: rejection rates of both tests.

The desk profile of the command line (``crsim study --profile desk``) runs
300 replicates with B = 300 per cell; this demo uses fewer so it finishes
in well under a minute.
"""

# %%
import sys

from crsim.study import builtin_scenarios, run_study, write_results_csv

cells = [s for s in builtin_scenarios()
         if s.name in ("Margin", "Alt2", "Alt4") and s.censoring_label in ("adm", "Exp(0.01)")]


def show(r):
    print(f"{r.scenario:>6} {r.censoring:>10} {r.measure:>4}: {r.rejection_rate:.3f}",
          file=sys.stderr)


results = run_study(cells, sizes=[(200, 200)], n_sim=60, B=200, seed=0, progress=show)

# %% Same layout as the CLI output, ready for plotting
write_results_csv(results, sys.stdout)
