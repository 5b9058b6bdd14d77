"""Envelope estimation, quadrature extraction and maximum-likelihood tomography.

The envelope chi(t) is found by independent component analysis: among all
weightings of the I traces, the one whose projected quadrature is least
Gaussian (most negative excess kurtosis) picks out the heralded wavepacket,
whose bimodal marginals are platykurtic.  Quadratures are then extracted
with chi, scaled with pump-off calibration traces and fed to the iterative
R rho R maximum-likelihood reconstruction.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import fock
from .errors import (CalibrationMissing, ConfigError, NonConvergence, PhaseCoverage,
                     TruncationError)
from .homodyne import QuadratureDataset, detector_matrix, detector_response
from .spectral import TemporalMode

# --------------------------------------------------------------------------
# ICA
# --------------------------------------------------------------------------


@dataclass
class IcaConfig:
    init: str = "theory_envelope"      # or "random"
    seed: int = 0
    max_iters: int = 500
    tol: float = 1e-8
    whiten: bool = True
    n_components: int = 20
    n_restarts: int = 8                # random init only; the lowest kurtosis wins
    support: tuple = (-50e-9, 250e-9)
    channel: str = "I"

    def __post_init__(self):
        if self.init not in ("theory_envelope", "random"):
            raise ConfigError(f"unknown ICA init {self.init!r}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.n_components < 1:
            raise ConfigError("n_components must be >= 1")
        if self.n_restarts < 1:
            raise ConfigError("n_restarts must be >= 1")
        self.support = tuple(float(s) for s in self.support)


@dataclass
class IcaResult:
    chi: TemporalMode
    kurtosis: float
    n_iter: int
    converged: bool
    degenerate: bool
    threshold: float


def excess_kurtosis(u):
    """Unbiased sample excess kurtosis (the G2 estimator)."""
    u = np.asarray(u, dtype=float)
    n = u.size
    if n < 4:
        raise ValueError("need at least 4 samples")
    d = u - u.mean()
    m2 = np.mean(d ** 2)
    m4 = np.mean(d ** 4)
    g2 = m4 / m2 ** 2 - 3
    return ((n + 1) * g2 + 6) * (n - 1) / ((n - 2) * (n - 3))


def _phase_groups(phases):
    return [np.flatnonzero(phases == p) for p in np.unique(phases)]


class _KurtosisObjective:
    """Mean over LO phases of the excess kurtosis of z @ w.

    Pooling all phases would add a spurious heavy tail from the
    phase-dependent variance, so each phase is normalized by its own
    second moment.
    """

    def __init__(self, z, groups):
        self.blocks = [z[g] for g in groups]
        self.covs = [b.T @ b / len(b) for b in self.blocks]

    def __call__(self, w):
        value, grad = 0.0, np.zeros_like(w)
        for b, c in zip(self.blocks, self.covs):
            u = b @ w
            m2 = w @ c @ w
            m4 = np.mean(u ** 4)
            value += m4 / m2 ** 2 - 3
            grad += 4 * (b.T @ u ** 3) / len(u) / m2 ** 2 - 4 * m4 / m2 ** 3 * (c @ w)
        n = len(self.blocks)
        return value / n, grad / n


def _sphere_descent(obj, w, max_iters, tol):
    """Projected gradient descent on the unit sphere with Armijo backtracking."""
    w = w / np.linalg.norm(w)
    f, g = obj(w)
    for it in range(1, max_iters + 1):
        gp = g - (g @ w) * w
        step = 1.0
        while True:
            wn = w - step * gp
            wn /= np.linalg.norm(wn)
            fn, gn = obj(wn)
            if fn <= f - 1e-4 * step * (gp @ gp) or step < 1e-12:
                break
            step *= 0.5
        change = np.linalg.norm(wn - w)
        if fn <= f:
            w, f, g = wn, fn, gn
        if change < tol:
            return w, f, it, True
    return w, f, max_iters, False


def run_ica(traces, cfg=None, theory=None):
    """Kurtosis-minimizing envelope with diagnostics.

    ``theory`` is the predicted physical mode (a TemporalMode), used for the
    theory initialization: the starting chi is the theory mode restricted to
    the support.
    """
    cfg = cfg or IcaConfig()
    y = traces.channel(cfg.channel)
    if y.shape[0] < 1000:
        raise ConfigError("ICA needs at least 1000 traces")
    times = traces.times
    sup = (times >= cfg.support[0]) & (times < cfg.support[1])
    if sup.sum() < 2:
        raise ConfigError("ICA support holds fewer than two samples")
    yc = y[:, sup] - y[:, sup].mean(axis=0)

    if cfg.whiten:
        lam, u = np.linalg.eigh(yc.T @ yc / len(yc))
        k = min(cfg.n_components, lam.size)
        basis = u[:, -k:] / np.sqrt(lam[-k:])
    else:
        basis = np.eye(sup.sum())
    z = yc @ basis
    obj = _KurtosisObjective(z, _phase_groups(traces.phases))

    if cfg.init == "theory_envelope":
        if theory is None:
            raise ConfigError("theory initialization needs a theory envelope")
        target = theory.resample(times[sup])
        starts = [np.linalg.lstsq(basis, target, rcond=None)[0]]
    else:
        rng = np.random.default_rng(cfg.seed)
        starts = [rng.normal(size=basis.shape[1]) for _ in range(cfg.n_restarts)]
    if not np.any(starts[0]):
        raise ConfigError("initial envelope vanishes on the support")

    runs = [_sphere_descent(obj, w0, cfg.max_iters, cfg.tol) for w0 in starts]
    w, f, n_iter, converged = min(runs, key=lambda run: run[1])

    chi = np.zeros(times.size)
    chi[sup] = basis @ w
    if chi[np.argmax(np.abs(chi))] < 0:
        chi = -chi
    mode = TemporalMode(chi, traces.t0, traces.dt).normalize()
    # spread of the minimum over k directions of a Gaussian landscape
    threshold = -3 * np.sqrt(24 * (basis.shape[1] + 1) / y.shape[0])
    return IcaResult(mode, float(f), n_iter, converged, bool(f > threshold), float(threshold))


def estimate_envelope_ica(traces, cfg=None, theory=None):
    """Unit-norm chi(t) with a positive peak.

    Raises NonConvergence, carrying the best iterate as ``.result``, when the
    iteration budget runs out or no non-Gaussian direction stands out.
    """
    res = run_ica(traces, cfg, theory)
    if not res.converged or res.degenerate:
        why = "no non-Gaussian direction" if res.degenerate else "iteration budget exhausted"
        err = NonConvergence(f"ICA: {why} (kurtosis {res.kurtosis:.3g})")
        err.result = res
        raise err
    return res.chi


def physical_mode(chi, f_c):
    """Field mode xi(s) = sum_t chi(t) d(t - s) seen through the detector, unit norm."""
    kernel = detector_response(f_c, chi.dt)
    d = detector_matrix(kernel, chi.samples.size)
    return TemporalMode(d.T @ chi.samples, chi.t0, chi.dt).normalize()


# --------------------------------------------------------------------------
# extraction
# --------------------------------------------------------------------------


def _weighted(traces, chi, channel):
    if not np.allclose([chi.t0, chi.dt], [traces.t0, traces.dt], rtol=0, atol=1e-15) \
            or chi.samples.size != traces.n_samples:
        weights = chi.resample(traces.times)
    else:
        weights = chi.samples
    return traces.channel(channel) @ weights * traces.dt


def extract_quadratures(traces, chi, channel="I", calibration=None):
    """Quadratures in shot-noise units (vacuum variance 1/2).

    The calibration trace set (pump off) fixes the offset and the scale.
    If chi has a negative peak, the phases are relabeled by pi so that the
    dataset is the same as for -chi.
    """
    if calibration is None:
        raise CalibrationMissing("extraction needs pump-off calibration traces")
    cal = _weighted(calibration, chi, channel)
    mean, var = cal.mean(), cal.var(ddof=1)
    values = (_weighted(traces, chi, channel) - mean) * np.sqrt(0.5 / var)
    phases = traces.phases
    if chi.samples[np.argmax(np.abs(chi.samples))] < 0:
        phases = np.mod(phases + np.pi, 2 * np.pi)
    return QuadratureDataset(phases, values)


# --------------------------------------------------------------------------
# maximum likelihood
# --------------------------------------------------------------------------


@dataclass
class MleConfig:
    cutoff: int = fock.DEFAULT_CUTOFF
    max_iters: int = 2000
    likelihood_tol: float = 1e-10
    bin_width: float = None          # None: one projector per sample

    def __post_init__(self):
        if self.cutoff < 1:
            raise ConfigError("cutoff must be >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.bin_width is not None and self.bin_width <= 0:
            raise ConfigError("bin_width must be positive")


@dataclass
class MleResult:
    rho: np.ndarray
    log_likelihood: list
    converged: bool
    n_iter: int
    n_diluted: int = 0


def check_phase_coverage(phases):
    """At least two distinct phases, no circular gap wider than pi."""
    u = np.unique(np.round(np.mod(phases, 2 * np.pi), 12))
    if u.size < 2:
        raise PhaseCoverage("need at least two distinct LO phases")
    gaps = np.diff(np.concatenate([u, [u[0] + 2 * np.pi]]))
    if gaps.max() > np.pi + 1e-9:
        raise PhaseCoverage(f"phases leave a gap of {gaps.max():.3f} rad")


class _ProjectorTable:
    """Quadrature projectors grouped by LO phase.

    Since <n|x, phi> = exp(i n phi) psi_n(x) with real psi_n, each phase
    block is handled in the rotated frame with real arithmetic.  Every raw
    sample maps to one column (its own, or its bin with ``bin_width``), and
    columns carry multiplicities, so a bootstrap resample is only a new set
    of weights.
    """

    def __init__(self, data, cfg):
        self.dim = cfg.cutoff + 1
        self.rot, self.herm, self.weights, self.members = [], [], [], []
        for idx in data.groups():
            x = data.values[idx]
            if cfg.bin_width is None:
                cols, col_of = x, np.arange(x.size)
            else:
                bins, col_of = np.unique(np.floor(x / cfg.bin_width).astype(int), return_inverse=True)
                cols = (bins + 0.5) * cfg.bin_width
            self.rot.append(np.exp(1j * np.arange(self.dim) * data.phases[idx[0]]))
            self.herm.append(fock.hermite_functions(cfg.cutoff, cols))
            self.weights.append(np.bincount(col_of, minlength=cols.size).astype(float))
            self.members.append(col_of)

    def resampled_weights(self, rng):
        out = []
        for col_of, w in zip(self.members, self.weights):
            pick = col_of[rng.integers(0, col_of.size, col_of.size)]
            out.append(np.bincount(pick, minlength=w.size).astype(float))
        return out

    def evaluate(self, rho, weights):
        """(log-likelihood, R operator) at rho."""
        ll, r_op, total = 0.0, np.zeros((self.dim, self.dim), dtype=complex), 0.0
        for u, h, w in zip(self.rot, self.herm, weights):
            a = (u.conj()[:, None] * rho * u[None, :]).real
            p = np.einsum("nj,nj->j", h, a @ h)
            ll += w @ np.log(p)
            r_op += u[:, None] * ((h * (w / p)) @ h.T) * u.conj()[None, :]
            total += w.sum()
        return float(ll), r_op / total


def _rrr(rho, r_op):
    new = r_op @ rho @ r_op
    new = (new + new.conj().T) / 2
    return new / np.trace(new).real


def _iterate(table, weights, cfg, rho0):
    dim = table.dim
    rho = np.eye(dim, dtype=complex) / dim if rho0 is None else np.array(rho0, dtype=complex)
    ll, r_op = table.evaluate(rho, weights)
    trace = [ll]
    converged, n_diluted = False, 0
    eye = np.eye(dim)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        new = _rrr(rho, r_op)
        new_ll, new_r = table.evaluate(new, weights)
        eps = 1.0
        # roundoff-level dips are not real decreases
        while new_ll < ll - 1e-12 * abs(ll) and eps > 1e-8:
            eps /= 2
            n_diluted += 1
            new = _rrr(rho, (eye + eps * r_op) / (1 + eps))
            new_ll, new_r = table.evaluate(new, weights)
        if new_ll < ll - 1e-12 * abs(ll):
            break
        gain = new_ll - ll
        rho, ll, r_op = new, new_ll, new_r
        trace.append(ll)
        if gain <= cfg.likelihood_tol * abs(ll):
            converged = True
            break
    return MleResult(rho, trace, converged, it, n_diluted)


def mle_reconstruct_full(data, cfg=None, rho0=None):
    """Iterative R rho R reconstruction with its likelihood trace.

    Stops when the relative log-likelihood gain drops below
    ``likelihood_tol``.  If a plain step would lower the likelihood, the
    step is diluted, rho <- N[(1 + e R) rho (1 + e R)], halving e until it
    increases; this keeps the likelihood monotone.
    """
    cfg = cfg or MleConfig()
    check_phase_coverage(data.phases)
    table = _ProjectorTable(data, cfg)
    return _iterate(table, table.weights, cfg, rho0)


def mle_reconstruct(data, cfg=None):
    """Maximum-likelihood density matrix at cfg.cutoff."""
    return mle_reconstruct_full(data, cfg).rho


def wigner_origin(rho):
    return fock.wigner_at(rho, 0.0, 0.0)


def bootstrap_wigner(data, cfg=None, n_boot=100, point=(0.0, 0.0), seed=0, threads=1, warm_start=None):
    """Mean and sample std of W(point) over per-phase resampled datasets.

    Each trial has its own RNG stream spawned from ``seed``; the result does
    not depend on ``threads``.  Trials start from ``warm_start`` (default:
    the full-data estimate) to save iterations.
    """
    if n_boot < 10:
        raise ValueError("n_boot must be >= 10")
    cfg = cfg or MleConfig()
    check_phase_coverage(data.phases)
    table = _ProjectorTable(data, cfg)
    if warm_start is None:
        warm_start = _iterate(table, table.weights, cfg, None).rho
    streams = np.random.SeedSequence(seed).spawn(n_boot)

    def trial(ss):
        weights = table.resampled_weights(np.random.default_rng(ss))
        return fock.wigner_at(_iterate(table, weights, cfg, warm_start).rho, *point)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = np.array(list(pool.map(trial, streams)))
    else:
        values = np.array([trial(ss) for ss in streams])
    return float(values.mean()), float(values.std(ddof=1))


def photon_distribution(rho):
    fock.check_density_matrix(rho)
    return np.clip(np.diag(rho).real, 0, None)


def best_fit_lossy_squeezed(rho, pad=30):
    """(r, eta, phase, fidelity) of the closest lossy squeezed vacuum."""
    from .sideband import lossy_squeezed_vacuum

    cutoff = fock.cutoff_of(rho)
    # start from the quadrature covariance: <a^2> - <a>^2 sets the squeezing axis
    a = fock.annihilation_matrix(cutoff + 1)
    m = fock.expect(rho, a @ a) - fock.expect(rho, a) ** 2
    phase0 = np.angle(m) / 2
    v = []
    for s in (0.0, np.pi / 2):
        xq = fock.quadrature_operator(phase0 + s, cutoff)
        v.append(fock.expect(rho, xq @ xq).real - fock.expect(rho, xq).real ** 2)
    vp, vm = max(v), min(v)
    ratio = (2 * vp - 1) / max(1 - 2 * vm, 1e-6)
    r0 = 0.5 * np.log(max(ratio, 1.0 + 1e-6))
    eta0 = np.clip((2 * vp - 1) / np.expm1(2 * r0), 0.05, 1.0)

    def neg_fid(par):
        r, eta, ph = par
        if r < 0 or not 0 <= eta <= 1:
            return 1.0
        try:
            sigma = lossy_squeezed_vacuum(r, eta, cutoff, phase=ph, pad=pad)
        except TruncationError:
            return 1.0
        return -fock.state_fidelity(rho, sigma)

    best = min((minimize(neg_fid, [r0, eta0, ph], method="Nelder-Mead",
                         options=dict(xatol=1e-6, fatol=1e-10, maxiter=2000))
                for ph in (phase0, phase0 + np.pi / 2)), key=lambda res: res.fun)
    r, eta, ph = best.x
    return float(r), float(eta), float(np.mod(ph, np.pi)), float(-best.fun)


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


@dataclass
class TomographyReport:
    channel: str
    rho: np.ndarray
    wigner_origin: float
    wigner_origin_std: float
    best_cat_alpha: complex
    best_cat_fidelity: float
    photon_dist: np.ndarray
    log_likelihood: list
    converged: bool
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        fock.check_density_matrix(self.rho)
        if abs(np.sum(self.photon_dist) - 1) > 1e-8:
            raise ValueError("photon distribution does not sum to 1")

    def to_dict(self):
        d = asdict(self)
        d["rho"] = fock.dm_to_dict(self.rho)
        d["best_cat_alpha"] = [self.best_cat_alpha.real, self.best_cat_alpha.imag]
        d["photon_dist"] = [float(x) for x in self.photon_dist]
        d["log_likelihood"] = [float(x) for x in self.log_likelihood]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["rho"] = fock.dm_from_dict(d["rho"])
        d["best_cat_alpha"] = complex(*d["best_cat_alpha"])
        d["photon_dist"] = np.asarray(d["photon_dist"])
        return cls(**d)


def tomography_report(data, cfg=None, channel="I", n_boot=0, seed=0, threads=1, extra=None):
    """MLE, Wigner origin, best-fit odd cat and optional bootstrap error."""
    cfg = cfg or MleConfig()
    res = mle_reconstruct_full(data, cfg)
    rho = res.rho
    std = float("nan")
    if n_boot:
        _, std = bootstrap_wigner(data, cfg, n_boot, seed=seed, threads=threads, warm_start=rho)
    alpha, fid = fock.best_fit_odd_cat(rho)
    pd = photon_distribution(rho)
    return TomographyReport(channel, rho, float(wigner_origin(rho)), std, complex(alpha), float(fid),
                            pd / pd.sum(), res.log_likelihood, res.converged, dict(extra or {}))
