"""Checks the variance decay bound on the quadratic with the library API."""

from cbo import ChiSolverParams, check_concentration_conditions, chi_from_uniform, chi_run, make_quadratic, verify_variance_decay

lam, sigma, alpha = 0.5, 0.1, 1.0
f = make_quadratic(1, shift=1.0)
grid = chi_from_uniform(-0.5, 0.5, 200)
report = check_concentration_conditions(grid, f, lam, sigma, alpha)
print(report.to_text())
_, series = chi_run(grid, f, ChiSolverParams(lam=lam, sigma=sigma, alpha=alpha))
verdict = verify_variance_decay(series, report, slack=0.1)
print("bound %s, worst V/bound %.4f over %d steps" % (verdict.status, verdict.worst, series.steps_taken))
