"""
Worst-case risk of a linear classifier
======================================

A tiny walk through the one-dimensional dual: the robust risk of a fixed
parameter is the minimum over lambda of ``lambda * sigma + H(theta, lambda)``.
"""

import numpy as np

from wdrocore import LossModel, MetricSpec, WdroProblem, brute_force_risk, worst_case_risk
from wdrocore.dataio import synth_blobs
from wdrocore.wdro import eval_H

# eight points in the plane, two noisy clusters
ds = synth_blobs(8, 2, separation=3.0, seed=1)
metric = MetricSpec("l2", gamma=7.0)
model = LossModel("logistic", metric)
problem = WdroProblem.build(ds, model, sigma=0.3)

theta = np.array([1.2, -0.3])
res = worst_case_risk(problem, theta)
print(f"risk {res.risk:.6f} at lambda* = {res.lambda_star:.4f} (boundary: {res.at_boundary})")

# the dual objective is convex in lambda; print a few values around the minimiser
lo, hi = problem.interval(theta)
for lam in np.linspace(lo, min(hi, lo + 2.0), 6):
    print(f"  lambda {lam:7.4f}   g = {lam * problem.sigma + eval_H(problem, theta, lam):.6f}")

# an independent check that maximises over explicit perturbed points
print(f"brute force {brute_force_risk(problem, theta):.6f}")

# the robust risk grows with the radius of the ball
for sigma in (0.01, 0.1, 0.3, 1.0):
    print(f"sigma {sigma:4}: risk {worst_case_risk(problem.with_sigma(sigma), theta).risk:.5f}")
