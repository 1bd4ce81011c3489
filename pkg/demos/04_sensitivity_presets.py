"""
Noise and soil-spring sensitivity
=================================

Runs the reference scenario's preset ladders: the same observations at
three noise levels, and one observation record inverted with soil springs
of 100, 1000 and 2000 kN/m^3. Scores are for the net pressure, which is the
quantity the convergence readings actually constrain. The bundled settings
take about eight minutes on one core; pass a generation count to shorten
the run (below about 60000 the chains have not mixed and the spring ladder
spreads out).
"""

import sys
import warnings

from liningbayes import pipeline
from liningbayes.scenario import load_scenario

scenario = load_scenario("reference")
if len(sys.argv) > 1:
    n = int(sys.argv[1])
    scenario = scenario.with_(sampler={"iterations": n, "thin": max(1, n // 1000)})

with warnings.catch_warnings():
    warnings.simplefilter("ignore", pipeline.ConvergenceWarning)
    result = pipeline.sensitivity_presets(scenario)

print(f"{'label':<7}{'ladder':<9}{'noise mm':>9}{'k_f':>8}{'IA':>8}{'RMSE':>9}{'Std':>9}{'R-hat':>8}")
for label, ladder, noise, k_f, ia, err, std in result["rows"]:
    rhat = result["runs"][label].diagnostics["rhat_max"]
    print(f"{label:<7}{ladder:<9}{noise:>9.3f}{k_f:>8.0f}{ia:>8.3f}{err:>9.1f}{std:>9.1f}{rhat:>8.3f}")
