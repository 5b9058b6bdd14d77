"""The heralded state: squeezed single photon, loss and background.

Run: python3 demos/02_model_state.py
"""
import numpy as np

from sideband_cat import fock
from sideband_cat import sideband as sb
from sideband_cat import spectral as sp

# %% Effective squeezing seen by the cat mode.
env = sp.cat_envelope(sp.REFERENCE_OPO, sp.REFERENCE_FILTERS)
forms = {form: sb.effective_squeezing(sp.SpectralModel(sp.REFERENCE_OPO, form=form), env)
         for form in ("exact", "single", "lorentzian")}
for form, r in forms.items():
    print(f"r_eff ({form:10s}) = {r:.4f}")

# %% Efficiency budget for the cos sideband and the background fraction.
rep = sb.efficiency_budget(sb.EfficiencyBudget())
print(f"\neta_cos = {rep.eta_cos:.3f}, eta_sin = {rep.eta_sin:.3f}, p_bg = {rep.p_background:.3f}")

# %% A lossless herald is S(r)|1>, with W(0,0) = -1/pi.
pure = fock.ket_to_dm(sb.herald_condition(forms["exact"], 13))
print(f"\nlossless herald: W(0,0) = {fock.wigner_at(pure, 0, 0):.4f} (-1/pi = {-1 / np.pi:.4f})")

# %% Loss and false triggers wash out the negativity.
rho = sb.build_model_state(sb.HeraldedStateModel(forms["exact"], 0.68, 0.04))
alpha, f = fock.best_fit_odd_cat(rho)
print(f"model state:     W(0,0) = {fock.wigner_at(rho, 0, 0):.4f}")
print(f"closest odd cat: |alpha| = {abs(alpha):.3f}, fidelity {f:.3f}")
print("photon numbers:", np.round(np.diag(rho).real[:6], 3))

# %% A coarse text map of W(x, p); '-' marks negative values.
xs = np.linspace(-2.5, 2.5, 21)
w = fock.wigner_grid(rho, xs, xs)
for row in w[::-2]:
    print("  " + "".join("-" if v < 0 else ("#" if v > 0.1 else ".") for v in row))
