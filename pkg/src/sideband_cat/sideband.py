"""Phase modulation as a sideband beamsplitter and the heralded cat model.

A weak phase modulation at the sideband frequency couples the carrier
(trigger) mode to one double-sideband mode selected by the modulation
phase.  Detecting a carrier photon then subtracts a photon from that
sideband mode.  The heralded state is reduced to a single effective mode:
a squeezed single photon of effective squeezing ``r_eff``, degraded by
pure loss and mixed with an unheralded squeezed-vacuum background.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import jv

from . import fock
from .errors import ApproximationDomain, TruncationError
from .spectral import TemporalMode

SMALL_BETA_LIMIT = 0.1  # largest beta^2 for the first-order transform


@dataclass(frozen=True)
class ModulationParams:
    beta: float
    theta: float = 0.0
    omega: float = 2 * np.pi * 500.6e6

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    @classmethod
    def from_transfer(cls, beta_squared, theta=0.0, omega=2 * np.pi * 500.6e6):
        return cls(float(np.sqrt(beta_squared)), theta, omega)

    @property
    def small_beta_valid(self):
        return self.beta ** 2 <= SMALL_BETA_LIMIT


def bessel_expansion(params, n_max=20):
    """Bessel weights J_n(beta) for n in [-n_max, n_max].

    Returns (orders, J_n, transfer) where ``transfer`` holds the sideband
    transfer amplitudes J_n(beta) exp(i n theta).
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    orders = np.arange(-n_max, n_max + 1)
    j = jv(orders, params.beta)
    return orders, j, j * np.exp(1j * orders * params.theta)


def sideband_beamsplitter(params):
    """First-order mode transform on (carrier, cos-sideband, sin-sideband).

    Row i gives the output annihilation operator of mode i in terms of the
    inputs.  The sideband rows lose an extra beta^2/4 to the 2*Omega modes,
    which is not tracked, so the matrix is sub-unitary.
    """
    if not params.small_beta_valid:
        raise ApproximationDomain(f"beta^2={params.beta ** 2:.3g} exceeds {SMALL_BETA_LIMIT}")
    b2 = params.beta ** 2
    c, s = np.cos(params.theta), np.sin(params.theta)
    k = params.beta / np.sqrt(2)
    return np.array([
        [np.sqrt(1 - b2 / 2), k * c, -k * s],
        [k * c, np.sqrt(1 - b2 / 4 - b2 / 2 * c ** 2), 0.0],
        [-k * s, 0.0, np.sqrt(1 - b2 / 4 - b2 / 2 * s ** 2)],
    ])


def heralded_mode(params):
    """Unit vector (cos, sin) of the sideband mode feeding the trigger."""
    row = sideband_beamsplitter(params)[0, 1:]
    return row / np.linalg.norm(row)


def herald_condition(r_eff, cutoff=fock.DEFAULT_CUTOFF, tol=fock.NORM_TOL):
    """Normalized a S(r)|0>: the photon-subtracted squeezed vacuum."""
    if r_eff <= 0:
        raise ValueError("r_eff must be positive")
    # build one photon above the cutoff so the annihilation sees the full tail
    sq = fock.squeeze(r_eff, fock.vacuum(cutoff + 1), tol=tol)
    cat = fock.annihilate(sq)[: cutoff + 1]
    cat[0::2] = 0.0  # odd parity is exact; clear roundoff from the matrix exponential
    return fock.normalize(cat)


def effective_squeezing(spectrum, mode, pad_factor=8):
    """Mode-weighted mean of r over the envelope's power spectrum.

    The cos-sideband wavepacket mode(t) cos(Omega t) sees r at Omega + nu
    with weight |M(nu)|^2, M the Fourier transform of the envelope.
    """
    n = mode.samples.size * pad_factor
    spec = np.abs(np.fft.rfft(mode.samples, n)) ** 2
    nu = 2 * np.pi * np.fft.rfftfreq(n, mode.dt)
    weights = spec.copy()
    weights[1:] *= 2  # negative detunings mirror positive ones for a real envelope
    if n % 2 == 0:
        weights[-1] /= 2
    r = spectrum.r_baseband(nu)
    return float(np.sum(weights * r) / np.sum(weights))


@dataclass
class HeraldedStateModel:
    r_eff: float
    eta_cos: float
    p_background: float
    cutoff: int = fock.DEFAULT_CUTOFF
    tol: float = fock.NORM_TOL
    pad: int = 30

    def __post_init__(self):
        if not 0 <= self.p_background <= 1:
            raise ValueError("p_background must lie in [0, 1]")
        if not 0 <= self.eta_cos <= 1:
            raise ValueError("eta_cos must lie in [0, 1]")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")


def build_model_state(model):
    """Density matrix (1 - p) L[cat] + p L[squeezed vacuum] at model.cutoff.

    States and loss are evaluated in a padded space, since loss moves
    population down from above the cutoff; the truncated result must keep
    its trace to within ``model.tol``.
    """
    work = model.cutoff + model.pad
    big_tol = max(model.tol, 1e-12)
    cat = fock.ket_to_dm(herald_condition(model.r_eff, work, tol=big_tol))
    sq = fock.ket_to_dm(fock.normalize(fock.squeeze(model.r_eff, fock.vacuum(work), tol=big_tol)))
    rho = ((1 - model.p_background) * fock.apply_loss(cat, model.eta_cos)
           + model.p_background * fock.apply_loss(sq, model.eta_cos))
    dim = model.cutoff + 1
    kept = np.trace(rho[:dim, :dim]).real
    if 1 - kept > model.tol:
        raise TruncationError(f"model state loses {1 - kept:.2e} of its trace at cutoff {model.cutoff}")
    rho = rho[:dim, :dim] / kept
    return (rho + rho.conj().T) / 2


def lossy_squeezed_vacuum(r, eta, cutoff=fock.DEFAULT_CUTOFF, phase=0.0, pad=30):
    """Squeezed vacuum after loss, anti-squeezed along x(phase), at ``cutoff``."""
    work = cutoff + pad
    sq = fock.ket_to_dm(fock.normalize(fock.squeeze(r, fock.vacuum(work), tol=1e-9)))
    rho = fock.apply_loss(sq, eta)
    if phase:
        rot = np.exp(1j * phase * np.arange(work + 1))
        rho = rot[:, None] * rho * rot.conj()[None, :]
    rho = rho[: cutoff + 1, : cutoff + 1]
    return rho / np.trace(rho).real


@dataclass
class EfficiencyBudget:
    escape: float = 0.982
    propagation_loss: float = 0.035
    interference: float = 0.935
    homodyne_det: float = 0.91
    beta_squared: float = 0.040
    eta_sin_measured: float = 0.70
    fake_click_fraction: float = 0.008
    mode_mismatch_fraction: float = 0.030
    trigger_efficiency: float = 0.10

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not 0 <= value <= 1:
                raise ValueError(f"{name}={value} outside [0, 1]")

    @property
    def mod_tap_cos(self):
        return 3 * self.beta_squared / 4

    @property
    def mod_tap_sin(self):
        return self.beta_squared / 4

    @property
    def p_background(self):
        return self.fake_click_fraction + self.mode_mismatch_fraction


@dataclass
class BudgetReport:
    eta_est: float
    eta_tot: float
    eta_cos: float
    eta_sin: float
    p_background: float
    factors: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def efficiency_budget(budget):
    """Optical efficiency bookkeeping.

    eta_est multiplies the independently characterized factors (the
    interference efficiency enters linearly).  The total efficiency is
    inferred from the measured sin-sideband efficiency by removing its
    modulation tap, and the cos-sideband efficiency re-applies the larger
    cos tap.
    """
    eta_est = (budget.escape * (1 - budget.propagation_loss)
               * budget.interference * budget.homodyne_det)
    eta_tot = budget.eta_sin_measured / (1 - budget.mod_tap_sin)
    eta_cos = eta_tot * (1 - budget.mod_tap_cos)
    eta_sin = eta_tot * (1 - budget.mod_tap_sin)
    factors = dict(asdict(budget), mod_tap_cos=budget.mod_tap_cos, mod_tap_sin=budget.mod_tap_sin)
    return BudgetReport(eta_est, eta_tot, eta_cos, eta_sin, budget.p_background, factors)


def model_from_config(spectrum, envelope: TemporalMode, budget, cutoff=fock.DEFAULT_CUTOFF):
    """HeraldedStateModel with r_eff from the envelope and eta, p_bg from the budget."""
    report = efficiency_budget(budget)
    r_eff = effective_squeezing(spectrum, envelope)
    return HeraldedStateModel(r_eff=r_eff, eta_cos=report.eta_cos,
                              p_background=report.p_background, cutoff=cutoff)
