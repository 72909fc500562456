"""
Monte Carlo pipeline
====================

Repeat simulate + reconstruct with independent seeds and compare the spread
of each figure of merit with the ground truth.
"""

# %%
from sideband_tomo import pipeline

for name in ("coherent", "squeezed", "squeezed-coherent"):
    summary = pipeline.cmd_pipeline(pipeline.load_scenario(name), n_reps=10)
    print(pipeline.format_summary(summary))

# %%
# The same run from the command line, as machine-readable JSON:
#
#   sideband-tomo pipeline --scenario squeezed --reps 30 --format machine
