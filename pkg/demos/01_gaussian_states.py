"""
Two-mode squeezed thermal states
================================

Build the ground-truth state of two optical sidebands, move it to the
symmetric/antisymmetric modes that a homodyne mixer actually sees, and read
off the figures of merit.
"""

# %%
import numpy as np

from sideband_tomo.gaussian import (
    TmstParams, change_basis, check_physicality, noise_reduction_db, ppt_min_symplectic_eigenvalue,
    purity, sideband_energies, symplectic_eigenvalues, tmst_state, total_fluctuation_photons,
)

np.set_printoptions(precision=4, suppress=True)

# %%
# Quadratures are normalised so the vacuum has unit variance. A state is set
# by its squeezed photons per mode, its thermal photons and how those thermal
# photons split between the upper and lower sideband.
params = TmstParams(n_sq=0.320, n_th=0.471, r_th=0.5)
state = tmst_state(params)
print("sideband-basis covariance matrix\n", state.cm)

# %%
# In the symmetric/antisymmetric basis the correlations turn into ordinary
# single-mode squeezing: q is antisqueezed and p squeezed, in both modes.
prime = change_basis(state)
print("symmetric/antisymmetric basis\n", prime.cm)
for name, i in (("s", 0), ("a", 1)):
    block = prime.block(i, i)
    print(f"mode {name}: purity {purity(block):.3f}, noise reduction {noise_reduction_db(block):.2f} dB")

# %%
# Entanglement lives in the sideband basis: the smallest symplectic
# eigenvalue of the partial transpose drops below 1.
print("PPT eigenvalue", round(ppt_min_symplectic_eigenvalue(state.cm), 4))
print("symplectic spectrum", symplectic_eigenvalues(state.cm))
print("physical:", check_physicality(prime.cm))

# %%
# Putting every thermal photon in one sideband makes the sidebands unequal.
# That unbalance shows up only as the antisymmetric off-block of the
# symmetric/antisymmetric matrix.
unbalanced = TmstParams(n_th=1.0, r_th=1.0)
print("N+, N- =", sideband_energies(unbalanced))
print(change_basis(tmst_state(unbalanced)).cm)
print("total fluctuation photons", total_fluctuation_photons(tmst_state(unbalanced).cm))
