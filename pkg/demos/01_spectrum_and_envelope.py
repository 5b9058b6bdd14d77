"""Squeezing spectrum of the OPO and the temporal mode of the cat.

Run: python3 demos/01_spectrum_and_envelope.py
"""
import numpy as np

from sideband_cat import spectral as sp

opo = sp.REFERENCE_OPO
print(f"OPO: gamma = 1/{1e9 / opo.gamma:.0f} ns, epsilon = {opo.epsilon}, FSR = {opo.fsr / 1e9:.4f} GHz")

# %% The comb formula peaks at the first sideband, not at the carrier.
for label, w in [("carrier", 0.0), ("sideband", opo.omega_sideband)]:
    print(f"  r({label:8s}) = {sp.r_exact(opo, w):.4f}")

# %% Near the peak the three spectral forms agree.
nu = np.linspace(-2, 2, 5) * opo.gamma
w = opo.omega_sideband + nu
print("\n  nu/gamma    exact   single  lorentzian")
for k in range(w.size):
    print(f"  {nu[k] / opo.gamma:+6.1f}   {sp.r_exact(opo, w[k]):.4f}   "
          f"{sp.r_single_resonance(opo, w[k]):.4f}   {sp.r_lorentzian(opo, w[k]):.4f}")

# %% Measured levels with a 70 % efficient detector.
model = sp.SpectralModel(opo, eta=0.70)
print(f"\nsqueezing {model.level_db(opo.omega_sideband, -1):+.2f} dB, "
      f"anti-squeezing {model.level_db(opo.omega_sideband, +1):+.2f} dB")

# %% The herald filters shape the mode: (f * h)(t), asymmetric in time.
env = sp.cat_envelope(opo, sp.REFERENCE_FILTERS)
trig = sp.trigger_response(sp.REFERENCE_FILTERS)
print(f"\nenvelope peak at {env.peak_time() * 1e9:.1f} ns, trigger response peak at "
      f"{trig.peak_time() * 1e9:.1f} ns")
print(f"|<envelope, bare OPO decay>|^2 = "
      f"{sp.mode_overlap(env, sp.opo_decay(opo)):.3f}")
