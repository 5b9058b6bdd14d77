"""Synthetic homodyne data.

Two levels are provided.  ``sample_wavepacket_quadratures`` draws quadrature
values of a single mode directly from a density matrix.  ``synthesize_traces``
produces demodulated I/Q time traces: stationary Gaussian squeezed
backgrounds for both sideband quadratures, with the heralded cat injected
into the cat wavepacket of the I (cos-sideband) channel, all seen through
the single-pole detector response.

The trace generator is a test scaffold, not an exact model of the
conditional field: outside the cat wavepacket the background is exactly
Gaussian and stationary.  Inside it, the quadrature is replaced by a sample
from the model state while the rest of the record is shifted along the
Gaussian regression direction, so that the background keeps its
covariance and the cat wavepacket carries the model marginal exactly.

Time-domain samples are in mode units: the vacuum field has independent
samples of variance 1/2, and a unit-norm weight vector g extracts a
quadrature sum(g * x) with vacuum variance 1/2.
"""

import csv
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from . import fock
from .errors import ConfigError, GridError
from .sideband import HeraldedStateModel, build_model_state
from .spectral import REFERENCE_FILTERS, TemporalMode, cat_envelope, noise_power


def default_phases(n):
    """n equally partitioned LO phases over the full circle."""
    return tuple(2 * np.pi * k / n for k in range(n))


@dataclass
class HomodyneConfig:
    sample_rate: float = 0.5e9
    window: tuple = (-100e-9, 300e-9)
    f_c: float = 14e6
    lo_phases: tuple = field(default_factory=lambda: default_phases(12))
    n_traces_per_phase: int = 2000
    seed: int = 0
    trigger_offset: float = 0.0        # shift of the cat envelope relative to the record
    n_calibration_traces: int = 0      # 0 means the same count as the data set
    pre_roll: float = 200e-9           # simulated history before the window

    def __post_init__(self):
        self.window = tuple(float(w) for w in self.window)
        self.lo_phases = tuple(float(p) for p in self.lo_phases)
        if not self.lo_phases:
            raise ConfigError("lo_phases must not be empty")
        if self.window[1] <= self.window[0]:
            raise ConfigError("window end must follow window start")
        if self.sample_rate <= 0 or self.f_c <= 0:
            raise ConfigError("sample_rate and f_c must be positive")
        if self.n_traces_per_phase < 1:
            raise ConfigError("n_traces_per_phase must be >= 1")

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    @property
    def n_samples(self):
        return int(round((self.window[1] - self.window[0]) * self.sample_rate))

    @property
    def times(self):
        return self.window[0] + self.dt * np.arange(self.n_samples)

    @property
    def n_traces(self):
        return self.n_traces_per_phase * len(self.lo_phases)


@dataclass
class HomodyneTraceSet:
    """Demodulated I/Q records, one row per trace, trigger at t = 0."""

    i_traces: np.ndarray
    q_traces: np.ndarray
    t0: float
    dt: float
    phases: np.ndarray

    def __post_init__(self):
        self.i_traces = np.atleast_2d(np.asarray(self.i_traces, dtype=float))
        self.q_traces = np.atleast_2d(np.asarray(self.q_traces, dtype=float))
        self.phases = np.asarray(self.phases, dtype=float)
        if self.i_traces.shape != self.q_traces.shape:
            raise ValueError("I and Q blocks differ in shape")
        if self.phases.shape != (self.i_traces.shape[0],):
            raise ValueError("need one phase per trace")
        if not (np.all(np.isfinite(self.i_traces)) and np.all(np.isfinite(self.q_traces))):
            raise ValueError("traces contain non-finite values")

    @property
    def n_traces(self):
        return self.i_traces.shape[0]

    @property
    def n_samples(self):
        return self.i_traces.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_samples)

    @property
    def sample_rate(self):
        return 1.0 / self.dt

    def channel(self, name):
        if name.upper() == "I":
            return self.i_traces
        if name.upper() == "Q":
            return self.q_traces
        raise ValueError(f"unknown channel {name!r}")


@dataclass
class QuadratureDataset:
    """(phase, quadrature) records in shot-noise units (vacuum variance 1/2)."""

    phases: np.ndarray
    values: np.ndarray
    shot_noise_variance: float = 0.5

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.phases.shape != self.values.shape:
            raise ValueError("phases and values differ in length")

    def __len__(self):
        return self.values.size

    def unique_phases(self):
        return np.unique(self.phases)

    def groups(self):
        """Indices of the records at each distinct phase."""
        return [np.flatnonzero(self.phases == p) for p in self.unique_phases()]

    def subset(self, idx):
        return QuadratureDataset(self.phases[idx], self.values[idx], self.shot_noise_variance)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phase_rad", "quadrature"])
            for p, x in zip(self.phases, self.values):
                w.writerow([repr(float(p)), repr(float(x))])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


# --------------------------------------------------------------------------
# wavepacket-level sampling
# --------------------------------------------------------------------------

class MarginalSampler:
    """Inverse-CDF sampler of x(phi) marginals of a density matrix."""

    def __init__(self, rho, x_max=None, n_grid=8001):
        self.rho = rho
        if x_max is None:
            x_max = max(8.0, np.sqrt(2 * fock.cutoff_of(rho) + 1) + 6)
        self.grid = np.linspace(-x_max, x_max, n_grid)
        self._cdfs = {}

    def cdf(self, phi):
        key = float(phi)
        if key not in self._cdfs:
            pdf = np.clip(fock.quadrature_marginal(self.rho, phi, self.grid), 0, None)
            # trapezoid cumulative integral
            c = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(self.grid))])
            self._cdfs[key] = c / c[-1]
        return self._cdfs[key]

    def __call__(self, phi, u):
        return np.interp(u, self.cdf(phi), self.grid)


def sample_wavepacket_quadratures(rho, phases, n_per_phase, seed=0):
    """Draw n_per_phase samples of x(phi) for each phase from rho."""
    fock.check_density_matrix(rho)
    sampler = MarginalSampler(rho)
    rng = np.random.default_rng(seed)
    ph, vals = [], []
    for phi in phases:
        vals.append(sampler(phi, rng.random(n_per_phase)))
        ph.append(np.full(n_per_phase, float(phi)))
    return QuadratureDataset(np.concatenate(ph), np.concatenate(vals))


# --------------------------------------------------------------------------
# detector
# --------------------------------------------------------------------------

def detector_response(f_c, dt=0.4e-9, n_decay=12.0):
    """Normalized causal kernel d(t) = exp(-2 pi f_c t) on the grid 0, dt, 2dt, ..."""
    if f_c <= 0:
        raise GridError("f_c must be positive")
    tau = 1.0 / (2 * np.pi * f_c)
    n = max(1, int(np.ceil(n_decay * tau / dt)) + 1)
    if n * dt < min(n_decay, 5.0) * tau:
        raise GridError("kernel extent too short")
    t = dt * np.arange(n)
    return TemporalMode(np.exp(-t / tau), 0.0, dt).normalize()


def apply_detector(traces, kernel):
    """Causal convolution along the last axis with unit DC gain.

    With the kernel sampled at 0, dt, ... this is the exact zero-order-hold
    response of the single-pole filter: a unit step reaches
    1 - exp(-2 pi f_c (k + 1) dt) at sample k.
    """
    traces = np.asarray(traces, dtype=float)
    k = kernel.samples / kernel.samples.sum()
    n = traces.shape[-1]
    m = sfft.next_fast_len(n + k.size - 1, real=True)
    out = sfft.irfft(sfft.rfft(traces, m, axis=-1) * sfft.rfft(k, m), m, axis=-1)
    return out[..., :n]


def detector_matrix(kernel, n):
    """Dense matrix D with (D x)_k = sum_j d_j x_{k-j} (unit DC gain)."""
    k = kernel.samples / kernel.samples.sum()
    d = np.zeros((n, n))
    for j, v in enumerate(k[:n]):
        d += v * np.eye(n, k=-j)
    return d


# --------------------------------------------------------------------------
# trace-level synthesis
# --------------------------------------------------------------------------

def _sqrt_spectra(spectrum, eta, m, dt):
    nu = 2 * np.pi * sfft.rfftfreq(m, dt)
    r = spectrum.r_baseband(nu)
    return np.sqrt(noise_power(r, eta, +1)), np.sqrt(noise_power(r, eta, -1))


def _check_bandwidth(spectrum, cfg):
    widest = max(spectrum.opo.gamma / (2 * np.pi), cfg.f_c)
    if cfg.sample_rate < 10 * widest:
        raise ConfigError(f"sample rate {cfg.sample_rate:.3g} below 10x the widest bandwidth {widest:.3g} Hz")


def _cat_weights(envelope, cfg, n_pre):
    times = cfg.window[0] - n_pre * cfg.dt + cfg.dt * np.arange(n_pre + cfg.n_samples)
    g = envelope.resample(times - cfg.trigger_offset)
    inside = envelope.resample(cfg.times - cfg.trigger_offset)
    total = np.sum(g ** 2)
    if total == 0 or np.sum(inside ** 2) < (1 - 1e-3) * total:
        raise ConfigError("record window is shorter than the cat envelope support")
    return g / np.sqrt(total)


def synthesize_traces(model, spectrum, cfg, envelope=None, eta_cos=None, return_truth=False):
    """Demodulated I/Q trace set carrying the heralded state in the I channel.

    ``model`` is a HeraldedStateModel or a density matrix; its state is
    injected into the cat wavepacket ``envelope`` (default: the OPO decay
    convolved with the standard trigger filter chain).  The I background
    uses ``eta_cos`` (default: the model's, else the spectrum's efficiency)
    and the Q background the spectrum's efficiency.  Each trace draws from
    its own RNG stream spawned from ``cfg.seed``.  With ``return_truth`` the
    injected quadratures are returned as well.
    """
    if isinstance(model, HeraldedStateModel):
        model_rho = build_model_state(model)
        if eta_cos is None:
            eta_cos = model.eta_cos
    else:
        model_rho = np.asarray(model)
    fock.check_density_matrix(model_rho)
    if envelope is None:
        envelope = cat_envelope(spectrum.opo, REFERENCE_FILTERS)
    _check_bandwidth(spectrum, cfg)
    eta_i = spectrum.eta if eta_cos is None else eta_cos
    dt, n = cfg.dt, cfg.n_samples
    n_pre = int(round(cfg.pre_roll / dt))
    length = n_pre + n
    m = sfft.next_fast_len(2 * length, real=True)
    sp_i, sm_i = _sqrt_spectra(spectrum, eta_i, m, dt)
    sp_q, sm_q = _sqrt_spectra(spectrum, spectrum.eta, m, dt)
    g = _cat_weights(envelope, cfg, n_pre)
    g_hat = sfft.rfft(g, m)
    kernel = detector_response(cfg.f_c, dt)
    sampler = MarginalSampler(model_rho)

    streams = np.random.SeedSequence(cfg.seed).spawn(2)[0].spawn(cfg.n_traces)
    i_out = np.empty((cfg.n_traces, n))
    q_out = np.empty((cfg.n_traces, n))
    phases = np.repeat(np.asarray(cfg.lo_phases), cfg.n_traces_per_phase)
    truth = np.empty(cfg.n_traces)

    for block, phi in enumerate(cfg.lo_phases):
        rows = slice(block * cfg.n_traces_per_phase, (block + 1) * cfg.n_traces_per_phase)
        white = np.empty((cfg.n_traces_per_phase, 4, m))
        u = np.empty(cfg.n_traces_per_phase)
        for k, ss in enumerate(streams[rows]):
            rng = np.random.default_rng(ss)
            white[k] = rng.normal(0.0, np.sqrt(0.5), (4, m))
            u[k] = rng.random()
        w_hat = sfft.rfft(white, axis=-1)
        c, s = np.cos(phi), np.sin(phi)
        x_i = sfft.irfft(w_hat[:, 0] * (c * sp_i) + w_hat[:, 1] * (s * sm_i), m, axis=-1)[:, :length]
        x_q = sfft.irfft(w_hat[:, 2] * (c * sp_q) + w_hat[:, 3] * (s * sm_q), m, axis=-1)[:, :length]

        # regression direction: Cov(x, <g, x>) / Var(<g, x>) at this phase
        s_phi = c ** 2 * sp_i ** 2 + s ** 2 * sm_i ** 2
        cov_g = 0.5 * sfft.irfft(s_phi * g_hat, m)[:length]
        direction = cov_g / np.dot(g, cov_g)
        q = sampler(phi, u)
        x_i += np.outer(q - x_i @ g, direction)
        truth[rows] = q

        i_out[rows] = apply_detector(x_i, kernel)[:, n_pre:]
        q_out[rows] = apply_detector(x_q, kernel)[:, n_pre:]

    traces = HomodyneTraceSet(i_out, q_out, cfg.window[0], dt, phases)
    return (traces, truth) if return_truth else traces


def synthesize_calibration(cfg, n_traces=None):
    """Pump-off (vacuum) traces through the same detector, for shot-noise scaling."""
    n_traces = n_traces or cfg.n_calibration_traces or cfg.n_traces
    dt, n = cfg.dt, cfg.n_samples
    n_pre = int(round(cfg.pre_roll / dt))
    kernel = detector_response(cfg.f_c, dt)
    streams = np.random.SeedSequence(cfg.seed).spawn(2)[1].spawn(n_traces)
    white = np.empty((n_traces, 2, n_pre + n))
    for k, ss in enumerate(streams):
        white[k] = np.random.default_rng(ss).normal(0.0, np.sqrt(0.5), (2, n_pre + n))
    out = apply_detector(white, kernel)[..., n_pre:]
    return HomodyneTraceSet(out[:, 0], out[:, 1], cfg.window[0], dt, np.zeros(n_traces))


# --------------------------------------------------------------------------
# raw RF path
# --------------------------------------------------------------------------

def iq_modulate(i_sig, q_sig, t, omega):
    """RF homodyne signal sqrt(2) (cos(W t) I + sin(W t) Q)."""
    return np.sqrt(2) * (np.cos(omega * t) * i_sig + np.sin(omega * t) * q_sig)


def iq_demodulate(rf, t, omega, bandwidth):
    """Mix with sqrt(2) cos / sin(W t) and keep |f| < bandwidth (Hz)."""
    dt = t[1] - t[0]
    freqs = np.abs(sfft.rfftfreq(rf.shape[-1], dt))
    keep = freqs < bandwidth

    def lowpass(x):
        return sfft.irfft(sfft.rfft(x, axis=-1) * keep, rf.shape[-1], axis=-1)

    return (lowpass(np.sqrt(2) * np.cos(omega * t) * rf),
            lowpass(np.sqrt(2) * np.sin(omega * t) * rf))


# --------------------------------------------------------------------------
# trace file container
# --------------------------------------------------------------------------

def write_traces(path, traces, extra=None):
    """Write a trace set.

    Layout: little-endian uint32 header length, UTF-8 JSON header, then the
    I block and the Q block as little-endian float32, row-major
    [trace x sample].
    """
    header = {
        "sample_rate": traces.sample_rate,
        "t0": traces.t0,
        "dt": traces.dt,
        "n_traces": traces.n_traces,
        "n_samples": traces.n_samples,
        "phase_table": traces.phases.tolist(),
    }
    if extra:
        header.update(extra)
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(traces.i_traces.astype("<f4").tobytes())
        fh.write(traces.q_traces.astype("<f4").tobytes())


def read_traces(path):
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        shape = (header["n_traces"], header["n_samples"])
        count = shape[0] * shape[1]
        i_tr = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(shape)
        q_tr = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(shape)
    traces = HomodyneTraceSet(i_tr.astype(float), q_tr.astype(float), header["t0"],
                              header["dt"], np.asarray(header["phase_table"]))
    return traces, header
