"""
Mixer phases and the cavity readout
===================================

The mixer phase picks which combination of the two sideband modes reaches
the detector. The Psi = +/- pi/4 settings cannot see the sideband
unbalance. The cavity transmission supplies it instead.
"""

# %%
import math

import numpy as np

from sideband_tomo.gaussian import TmstParams, change_basis, tmst_state
from sideband_tomo.sideband import (
    CavityModel, QuadratureSpec, cavity_transmission, pdh_error_signal, quadrature_moments,
    selection_vector, unbalance_from_pdh,
)

# %%
for theta, psi in ((0, 0), (math.pi / 2, math.pi / 2), (0, math.pi / 4)):
    print(f"theta={theta:.3f} psi={psi:.3f} ->", np.round(selection_vector(QuadratureSpec(theta, psi)), 4))

# %%
# Two states that differ only in the sideband unbalance give identical
# statistics at Psi = +/- pi/4, for every LO phase.
balanced = change_basis(tmst_state(TmstParams(n_th=1.0, r_th=0.5)))
unbalanced = change_basis(tmst_state(TmstParams(n_th=1.0, r_th=1.0)))
for theta in np.linspace(0, math.pi, 5):
    spec = QuadratureSpec(theta, math.pi / 4)
    print(f"theta={theta:.2f}", quadrature_moments(balanced, spec), quadrature_moments(unbalanced, spec))

# %%
# A detuned cavity transmits the two sidebands unequally. The relative
# transmissions turn the total photon number into the unbalance.
cavity = CavityModel(detuning=5e6)
t_plus, t_minus, readout = cavity_transmission(cavity)
print(f"T+={t_plus:.5f} T-={t_minus:.5f} tau+={readout.tau_plus:.5f} tau-={readout.tau_minus:.5f}")
print("unbalance for N=2:", unbalance_from_pdh(readout, 2.0))

# %%
# The ideal reflection PDH error signal that would hold such a detuning.
curve = pdh_error_signal(CavityModel(), np.linspace(-150e6, 150e6, 13))
for d, e in curve:
    print(f"{d / 1e6:8.1f} MHz  {e:+.3f}")
