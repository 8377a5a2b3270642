"""
Dead zone under a bounded disturbance, and the windowed lemma
=============================================================
"""

import numpy as np

from incremental_adaptive import analysis, robust_scenario, simulate

# second-order plant, w = 0.3 sin 5t, dead zone of half width 0.1
traj = simulate(robust_scenario())
late = traj.t >= 80
print("sup |e_f| after 80 s:", np.abs(traj.e_f[late]).max(), " epsilon:", traj.epsilon)
print("final output error:", traj.e[-1, 0])
print("share of late samples inside the zone:", np.mean(traj.sigma[late] == 0))

###############################################################################
# Switching the disturbance term to iota pushes the wrong way when e_f < 0
strict = simulate(robust_scenario(controller__strict_paper_form=True))
print("strict form, sup |e_f| after 80 s:", np.abs(strict.e_f[strict.t >= 80]).max())

###############################################################################
# The lemma: bounded windowed energy of g' plus a vanishing window integral of
# g imply g -> 0. Narrowing bumps keep the window integral small while the
# derivative energy blows up, so the hypothesis fails and so may the conclusion.
for family in analysis.LEMMA_FAMILIES:
    g, h, tau = analysis.lemma_family(family)
    lv = analysis.barbalat_monitor(g, h, tau)
    print(f"{family:15s} {lv.verdict}  (bounded, decayed, conclusion) = {lv.profile()}")

lv = analysis.barbalat_monitor(traj.V, traj.h, traj.tau)
print("robust run V series:", lv.verdict, lv.profile())
