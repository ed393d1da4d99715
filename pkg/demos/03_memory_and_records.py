"""
Memory effects and the stability of records
===========================================

Fidelity-based non-Markovianity N and the non-monotonicity N_f of the
redundancy fraction, for a frequency near the lower band edge and one in
the middle of the band. Information flowing back from the bath shows up
in both: the edge frequency has the larger N, and its records are less
stable.
"""

import numpy as np

from qbmdarwin import Model, default_probe_pairs, nm_measure, non_monotonicity_Nf, redundancy_trace

fid_times = np.round(np.arange(0, 1501) * 0.1, 12)
rec_times = np.arange(0.0, 151.0, 10.0)

for omega in (0.314, 0.466):
    model = Model.build(omega, squeezing_r=10.0, n_osc=300)
    nm = nm_measure(model, default_probe_pairs(omega), fid_times)
    trace = redundancy_trace(model, rec_times, delta=0.05, n_samples=10)
    print(f"omega_s = {omega}: N = {nm.n_measure:.3f}, N_f = {non_monotonicity_Nf(trace):.2f}")
    print("   f_5%(t):", " ".join(f"{f:.2f}" for f in trace.f_delta))
