"""Continuous-wave OPO squeezing spectra and temporal responses.

All quantities are SI: decay constants in rad/s, frequencies in Hz, times
in seconds.  Angular frequencies ``omega`` are measured from the optical
carrier.  The pump parameter is stored as a fraction of the OPO decay
constant and converted to a rate where a formula needs one.
"""

import csv
import enum
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import GridError, GridMismatch, PoleError

DEFAULT_DT = 0.1e-9
DEFAULT_T_START = -100e-9
DEFAULT_T_STOP = 400e-9


class Parity(str, enum.Enum):
    """OPO resonance condition at the carrier frequency."""

    RESONANT = "resonant_at_carrier"
    ANTI_RESONANT = "anti_resonant_at_carrier"


@dataclass(frozen=True)
class OpoParams:
    gamma: float            # cavity decay constant, rad/s
    epsilon: float          # pump amplitude as a fraction of gamma
    fsr: float              # free spectral range 2*Omega/(2*pi), Hz
    parity: Parity = Parity.ANTI_RESONANT

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1) (below threshold)")
        if self.fsr <= 0:
            raise ValueError("fsr must be positive")
        object.__setattr__(self, "parity", Parity(self.parity))

    @property
    def delta(self):
        """Cavity round-trip time."""
        return 1.0 / self.fsr

    @property
    def omega_sideband(self):
        """Angular frequency Omega of the first sideband resonance."""
        return np.pi * self.fsr

    @property
    def pump_rate(self):
        return self.epsilon * self.gamma


REFERENCE_OPO = OpoParams(gamma=1 / 16e-9, epsilon=0.21, fsr=1.0012e9)


@dataclass(frozen=True)
class FilterChain:
    """Cascade of single-sided exponential filters (decay constants in rad/s)."""

    decays: tuple

    def __post_init__(self):
        decays = tuple(float(g) for g in self.decays)
        if not decays:
            raise ValueError("filter chain must not be empty")
        if any(g <= 0 for g in decays):
            raise ValueError("filter decay constants must be positive")
        object.__setattr__(self, "decays", decays)

    @classmethod
    def from_time_constants(cls, taus):
        return cls(tuple(1.0 / t for t in taus))


# separator cavity, filter 1, filter 2
REFERENCE_FILTERS = FilterChain.from_time_constants((30e-9, 2.2e-9, 3.2e-9))


@dataclass
class TemporalMode:
    """Real mode function sampled at t0 + k*dt."""

    samples: np.ndarray
    t0: float
    dt: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def norm(self):
        return float(np.sqrt(np.sum(self.samples ** 2) * self.dt))

    def normalize(self):
        return TemporalMode(self.samples / self.norm, self.t0, self.dt)

    def same_grid(self, other):
        return (self.samples.size == other.samples.size
                and np.isclose(self.t0, other.t0, rtol=0, atol=1e-6 * self.dt)
                and np.isclose(self.dt, other.dt, rtol=1e-9, atol=0))

    def resample(self, times):
        """Linear interpolation onto ``times``; zero outside this mode's extent."""
        return np.interp(times, self.times, self.samples, left=0.0, right=0.0)

    def peak_time(self):
        return float(self.times[np.argmax(np.abs(self.samples))])


def time_grid(dt=DEFAULT_DT, t_start=DEFAULT_T_START, t_stop=DEFAULT_T_STOP):
    n = int(round((t_stop - t_start) / dt))
    return t_start + dt * np.arange(n)


# --------------------------------------------------------------------------
# squeezing spectra
# --------------------------------------------------------------------------

def r_exact(params, omega):
    """Squeezing parameter of the full OPO resonance comb.

    r = ln|((g + e)^2 - z^2) / ((g - z)^2 - e^2)| with z = (1 +/- exp(i w d)) / d,
    '+' for an OPO anti-resonant at the carrier.
    """
    omega = np.asarray(omega, dtype=float)
    d = params.delta
    sign = 1.0 if params.parity is Parity.ANTI_RESONANT else -1.0
    z = (1 + sign * np.exp(1j * omega * d)) / d
    g, e = params.gamma, params.pump_rate
    num = (g + e) ** 2 - z ** 2
    den = (g - z) ** 2 - e ** 2
    if np.any(np.abs(den) < 1e-300):
        raise PoleError("denominator vanishes; spectrum evaluated at a pole")
    return np.log(np.abs(num / den))


def r_single_resonance(params, omega):
    """r around the first resonance: ln|(g + e + i v)/(g - e - i v)|, v = |w| - Omega."""
    nu = np.abs(np.asarray(omega, dtype=float)) - params.omega_sideband
    g, e = params.gamma, params.pump_rate
    return np.log(np.abs((g + e + 1j * nu) / (g - e - 1j * nu)))


def r_lorentzian(params, omega):
    """Weak-pump Lorentzian 2 g e / (g^2 + v^2); peak value 2*epsilon."""
    nu = np.abs(np.asarray(omega, dtype=float)) - params.omega_sideband
    g, e = params.gamma, params.pump_rate
    return 2 * g * e / (g ** 2 + nu ** 2)


_FORMS = {"exact": r_exact, "single": r_single_resonance, "lorentzian": r_lorentzian}


def noise_power(r, eta, sign):
    """Shot-noise-normalized quadrature noise 1 + eta (exp(+/-2r) - 1)."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    return 1 + eta * (np.exp(2 * sign * np.asarray(r)) - 1)


def measured_squeezing_level(params, eta, omega, sign, form="exact"):
    """Detected (anti-)squeezing level in dB; sign=-1 squeezed, +1 anti-squeezed."""
    r = _FORMS[form](params, omega)
    return 10 * np.log10(noise_power(r, eta, sign))


def time_correlation(params, t):
    """Weak-pump time correlation sqrt(2 pi) e exp(-g|t| - i Omega t)."""
    t = np.asarray(t, dtype=float)
    return (np.sqrt(2 * np.pi) * params.pump_rate
            * np.exp(-params.gamma * np.abs(t) - 1j * params.omega_sideband * t))


@dataclass(frozen=True)
class SpectralModel:
    """Squeezing spectrum of one OPO resonance seen with detection efficiency eta."""

    opo: OpoParams
    eta: float = 1.0
    form: str = "exact"

    def __post_init__(self):
        if self.form not in _FORMS:
            raise ValueError(f"unknown spectrum form {self.form!r}")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")

    def r(self, omega):
        return _FORMS[self.form](self.opo, omega)

    def r_baseband(self, nu):
        """r at detuning ``nu`` (rad/s) from the first sideband resonance."""
        return self.r(self.opo.omega_sideband + np.asarray(nu, dtype=float))

    def noise_power(self, omega, sign):
        return noise_power(self.r(omega), self.eta, sign)

    def level_db(self, omega, sign):
        return 10 * np.log10(self.noise_power(omega, sign))


# --------------------------------------------------------------------------
# temporal responses
# --------------------------------------------------------------------------

def _check_dt(decays, dt):
    if dt > min(1.0 / g for g in decays) / 20:
        raise GridError(f"dt={dt:.3g}s does not resolve the fastest decay time")


def _one_sided(gamma, t):
    # Heaviside taken as 1/2 at t = 0 (trapezoid rule in the discrete convolution)
    return np.where(t > 0, np.exp(-gamma * np.clip(t, 0, None)), np.where(t == 0, 0.5, 0.0))


def _causal_index(t_start, dt):
    i0 = -t_start / dt
    if t_start > 0 or abs(i0 - round(i0)) > 1e-6:
        raise GridError("time grid must start at or before t=0 and contain t=0")
    return int(round(i0))


def trigger_response(chain, dt=DEFAULT_DT, t_start=DEFAULT_T_START, t_stop=DEFAULT_T_STOP):
    """Normalized impulse response f = T1 * T2 * ... of the trigger-line filters."""
    _check_dt(chain.decays, dt)
    t = time_grid(dt, t_start, t_stop)
    i0 = _causal_index(t_start, dt)
    tc = t[i0:] - t[i0]
    f = _one_sided(chain.decays[0], tc)
    for g in chain.decays[1:]:
        f = fftconvolve(f, _one_sided(g, tc))[: tc.size] * dt
    out = np.zeros(t.size)
    out[i0:] = f
    return TemporalMode(out, t[0], dt).normalize()


def opo_decay(params, dt=DEFAULT_DT, t_start=DEFAULT_T_START, t_stop=DEFAULT_T_STOP):
    """Normalized double-sided OPO decay h(t) = exp(-gamma |t|).

    This is also the envelope of the passively subtracted (beamsplitter tap)
    wavepacket, and the limit of ``cat_envelope`` for a broadband filter.
    """
    t = time_grid(dt, t_start, t_stop)
    return TemporalMode(np.exp(-params.gamma * np.abs(t)), t[0], dt).normalize()


def cat_envelope(params, chain, dt=DEFAULT_DT, t_start=DEFAULT_T_START,
                 t_stop=DEFAULT_T_STOP, tau=0.0):
    """Normalized heralded-mode envelope (f * h)(t - tau), trigger at t = 0."""
    _check_dt(chain.decays + (params.gamma,), dt)
    f = trigger_response(chain, dt, t_start, t_stop)
    n = f.samples.size
    lags = dt * (np.arange(2 * n - 1) - (n - 1))
    h = np.exp(-params.gamma * np.abs(lags))
    full = fftconvolve(f.samples, h) * dt
    env = full[n - 1: 2 * n - 1]
    mode = TemporalMode(env, t_start, dt)
    if tau:
        mode = TemporalMode(mode.resample(mode.times - tau), t_start, dt)
    return mode.normalize()


def mode_overlap(a, b):
    """|<a, b>|^2 / (|a|^2 |b|^2).

    Modes on different grids are compared on a's grid, with b linearly
    interpolated and taken as zero outside its extent.
    """
    if a.same_grid(b):
        bs = b.samples
    else:
        lo = max(a.times[0], b.times[0])
        hi = min(a.times[-1], b.times[-1])
        if hi <= lo:
            raise GridMismatch("modes have disjoint time extents")
        bs = b.resample(a.times)
    num = np.sum(a.samples * bs) ** 2
    den = np.sum(a.samples ** 2) * np.sum(bs ** 2)
    return float(num / den) if den > 0 else 0.0


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

def write_spectrum_csv(path, spectrum, freqs_hz):
    """Spectrum table: sideband frequency (Hz), r, squeezed and anti-squeezed dB.

    Trailing ``r_single`` and ``r_lorentzian`` columns carry the
    single-resonance and weak-pump forms for comparison with the full comb.
    """
    freqs_hz = np.asarray(freqs_hz, dtype=float)
    omega = 2 * np.pi * freqs_hz
    r = spectrum.r(omega)
    sq = 10 * np.log10(noise_power(r, spectrum.eta, -1))
    asq = 10 * np.log10(noise_power(r, spectrum.eta, +1))
    r1 = r_single_resonance(spectrum.opo, omega)
    rl = r_lorentzian(spectrum.opo, omega)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega_hz", "r", "sq_db", "antisq_db", "r_single", "r_lorentzian"])
        for row in zip(freqs_hz, r, sq, asq, r1, rl):
            w.writerow([repr(float(v)) for v in row])


def write_mode_csv(path, mode):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "amplitude"])
        for t, a in zip(mode.times, mode.samples):
            w.writerow([repr(float(t * 1e9)), repr(float(a))])


def read_mode_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0] * 1e-9
    return TemporalMode(data[:, 1], t[0], float(np.mean(np.diff(t))) if t.size > 1 else 1.0)
