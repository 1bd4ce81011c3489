"""
Least-squares optimum versus posterior mean
===========================================

The box-constrained least-squares fit reaches the smallest misfit, but the
data leave many directions unconstrained and the optimizer keeps whatever
its start had along them. The posterior mean averages over those directions
instead. This script compares the two curves for the best-instrumented case
by their misfit, agreement with the truth and total variation.
"""

import sys
import warnings

import numpy as np

from liningbayes import pipeline
from liningbayes.metrics import total_variation
from liningbayes.parameterization import interpolation_matrix
from liningbayes.scenario import load_scenario

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
scenario = load_scenario("illustration").with_(sampler={"iterations": iterations})
study = pipeline.Study(scenario)
truth = study.truth_curves()["total"]

os_result = pipeline.deterministic_baseline(study, "F1")
os_curve = interpolation_matrix(scenario.n_knots, study.angles) @ os_result.knots
with warnings.catch_warnings():
    warnings.simplefilter("ignore", pipeline.ConvergenceWarning)
    rec = pipeline.run_inversion(study, "F1")
pm_curve = rec.summary.mean

obs = rec.observations
A, y = pipeline.weighted_system(obs, study.operator())
pm_misfit = float(np.sum((A @ rec.summary.mean_knots - y) ** 2))

print(f"{'':<16}{'misfit':>10}{'IA':>8}{'RMSE':>9}{'TV':>10}")
print(f"{'optimum (OS)':<16}{os_result.misfit:>10.2f}{os_result.metrics.IA:>8.3f}"
      f"{os_result.metrics.RMSE:>9.1f}{total_variation(os_curve):>10.0f}")
print(f"{'posterior mean':<16}{pm_misfit:>10.2f}{rec.primary.IA:>8.3f}"
      f"{rec.primary.RMSE:>9.1f}{total_variation(pm_curve):>10.0f}")
print(f"{'truth':<16}{'':>10}{'':>8}{'':>9}{total_variation(truth):>10.0f}")
