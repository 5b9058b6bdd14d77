"""Synthetic homodyne traces back to a density matrix.

Run: python3 demos/03_closed_loop.py  (about a minute with the bootstrap)
"""
import time

from sideband_cat import fock
from sideband_cat import homodyne as hd
from sideband_cat import sideband as sb
from sideband_cat import spectral as sp
from sideband_cat import tomography as tm

t_start = time.perf_counter()
env = sp.cat_envelope(sp.REFERENCE_OPO, sp.REFERENCE_FILTERS)
model = sb.HeraldedStateModel(sb.effective_squeezing(sp.SpectralModel(sp.REFERENCE_OPO), env), 0.68, 0.04)
truth = sb.build_model_state(model)

# %% 2000 triggered traces at each of 12 LO phases, plus pump-off calibration.
cfg = hd.HomodyneConfig(n_traces_per_phase=2000, seed=1)
traces = hd.synthesize_traces(model, sp.SpectralModel(sp.REFERENCE_OPO, 0.70), cfg, env)
cal = hd.synthesize_calibration(cfg)
print(f"{traces.n_traces} traces of {traces.n_samples} samples at {cfg.sample_rate / 1e9} GS/s")

# %% ICA finds the mode without being told its shape.
ica = tm.run_ica(traces, tm.IcaConfig(init="random", seed=3))
xi = tm.physical_mode(ica.chi, cfg.f_c)
print(f"ICA: kurtosis {ica.kurtosis:.3f} (Gaussian threshold {ica.threshold:.3f}), "
      f"overlap with theory {sp.mode_overlap(xi, env):.4f}")

# %% Both channels through maximum likelihood.
for ch in ("I", "Q"):
    data = tm.extract_quadratures(traces, ica.chi, ch, cal)
    res = tm.mle_reconstruct_full(data)
    print(f"\n{ch} channel: {res.n_iter} iterations, converged {res.converged}")
    print(f"  W(0,0) = {tm.wigner_origin(res.rho):+.4f}")
    if ch == "I":
        print(f"  truth  = {fock.wigner_at(truth, 0, 0):+.4f}")
        mean, std = tm.bootstrap_wigner(data, n_boot=100, seed=5, warm_start=res.rho)
        print(f"  bootstrap: {mean:+.4f} +/- {std:.4f}")
    else:
        r, eta, _, f = tm.best_fit_lossy_squeezed(res.rho)
        print(f"  closest lossy squeezed vacuum: r {r:.3f}, eta {eta:.3f}, fidelity {f:.4f}")

print(f"\ntotal {time.perf_counter() - t_start:.0f} s")
