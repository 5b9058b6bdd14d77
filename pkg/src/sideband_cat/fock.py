"""Single-mode Fock-space numerics.

Kets are 1-D complex arrays indexed by photon number ``0..cutoff`` and
density matrices are square complex arrays of size ``cutoff + 1``.  The
quadrature convention is hbar = 1 with

    x(phi) = (exp(-i phi) a + exp(i phi) a^dag) / sqrt(2),

so the vacuum has quadrature variance 1/2 and W(0, 0) = 1/pi.
"""

import csv
import json

import numpy as np
from scipy.linalg import expm, sqrtm
from scipy.optimize import minimize
from scipy.special import eval_genlaguerre, gammaln

from .errors import CutoffMismatch, TruncationError

DEFAULT_CUTOFF = 13
MAX_CUTOFF = 40
NORM_TOL = 1e-6


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def annihilation_matrix(dim):
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def fock_state(n, cutoff=DEFAULT_CUTOFF):
    if not 0 <= n <= cutoff:
        raise ValueError(f"photon number {n} outside 0..{cutoff}")
    ket = np.zeros(cutoff + 1, dtype=complex)
    ket[n] = 1.0
    return ket


def vacuum(cutoff=DEFAULT_CUTOFF):
    return fock_state(0, cutoff)


def cutoff_of(state):
    return state.shape[0] - 1


def normalize(ket):
    norm = np.linalg.norm(ket)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return ket / norm


def ket_to_dm(ket):
    return np.outer(ket, ket.conj())


def _log_sqrt_factorial(n):
    return 0.5 * gammaln(np.asarray(n, dtype=float) + 1.0)


def coherent(alpha, cutoff=DEFAULT_CUTOFF, tol=NORM_TOL):
    """Truncated coherent state |alpha>, renormalized after checking the tail."""
    if alpha == 0:
        return vacuum(cutoff)
    n = np.arange(cutoff + 1)
    log_mag = n * np.log(abs(alpha)) - _log_sqrt_factorial(n) - abs(alpha) ** 2 / 2
    amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    lost = 1.0 - np.vdot(amps, amps).real
    if lost > tol:
        raise TruncationError(f"coherent state |{alpha}> loses {lost:.2e} of its norm at cutoff {cutoff}")
    return normalize(amps)


def odd_cat(alpha, cutoff=DEFAULT_CUTOFF, tol=NORM_TOL):
    """Normalized minus cat N(|alpha> - |-alpha>).

    The alpha -> 0 limit is the single photon |1>.
    """
    if cutoff < 1:
        raise ValueError("odd cat needs cutoff >= 1")
    amps = _odd_cat_unnormalized(np.array([alpha]), cutoff)[0]
    norm2 = np.vdot(amps, amps).real
    if alpha != 0:
        # weight of the untruncated cat: sum over odd n of |alpha|^2n / n! = sinh|alpha|^2,
        # divided by |alpha|^2 to match the rescaling in _odd_cat_unnormalized
        full = np.sinh(abs(alpha) ** 2) / abs(alpha) ** 2
        lost = 1.0 - norm2 / full
        if lost > tol:
            raise TruncationError(f"odd cat alpha={alpha} loses {lost:.2e} of its norm at cutoff {cutoff}")
    return amps / np.sqrt(norm2)


def _odd_cat_unnormalized(alphas, cutoff):
    # amplitude alpha^n / sqrt(n!) on odd n; the common exp(-|alpha|^2/2) drops out on normalization
    n = np.arange(cutoff + 1)
    alphas = np.asarray(alphas, dtype=complex)
    out = np.zeros((alphas.size, cutoff + 1), dtype=complex)
    odd = n % 2 == 1
    mag = np.abs(alphas)
    small = mag == 0
    safe = np.where(small, 1.0, mag)
    logs = n[odd][None, :] * np.log(safe)[:, None] - _log_sqrt_factorial(n[odd])[None, :]
    # rescale by the leading odd term so small |alpha| stays finite
    logs -= np.log(safe)[:, None]
    out[:, odd] = np.exp(logs) * np.exp(1j * np.outer(np.angle(alphas), n[odd]))
    out[small] = 0.0
    out[small, 1] = 1.0
    return out


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def annihilate(state):
    """Apply a to a ket (unnormalized): amps'[n] = sqrt(n + 1) amps[n + 1]."""
    if cutoff_of(state) < 1:
        raise ValueError("annihilate needs cutoff >= 1")
    out = np.zeros_like(state, dtype=complex)
    out[:-1] = np.sqrt(np.arange(1, state.shape[0])) * state[1:]
    return out


def squeeze(r, state, tol=NORM_TOL, pad=None):
    """Apply S(r) = exp[(r/2)(a^dag^2 - a^2)] to a ket.

    The exponential is taken in a padded space and truncated back; a
    TruncationError is raised when the truncation drops more than ``tol``
    of the norm.  Positive r anti-squeezes x(0) to variance exp(2r)/2.
    """
    if abs(r) > 3:
        raise ValueError("|r| > 3 is outside the supported range")
    dim = state.shape[0]
    if r == 0:
        return state.astype(complex)
    if pad is None:
        pad = 40 + int(40 * abs(r))

    a = annihilation_matrix(dim + pad)
    u = expm(0.5 * r * (a.T @ a.T - a @ a))
    padded = np.zeros(dim + pad, dtype=complex)
    padded[:dim] = state
    out = u @ padded
    lost = np.vdot(out[dim:], out[dim:]).real / max(np.vdot(state, state).real, 1e-300)
    if lost > tol:
        raise TruncationError(f"squeeze r={r} loses {lost:.2e} of the norm at cutoff {dim - 1}")
    return out[:dim]


def squeezed_vacuum(r, cutoff=DEFAULT_CUTOFF, tol=NORM_TOL):
    return normalize(squeeze(r, vacuum(cutoff), tol=tol))


def apply_loss(rho, eta):
    """Pure-loss channel of transmissivity eta (beamsplitter to vacuum).

    Uses the Kraus sum in closed form,
    rho'_{mn} = sum_k sqrt(C(m+k,k) C(n+k,k)) eta^{(m+n)/2} (1-eta)^k rho_{m+k,n+k}.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    dim = rho.shape[0]
    if eta == 1.0:
        return rho.copy()
    out = np.zeros_like(rho, dtype=complex)
    idx = np.arange(dim)
    for k in range(dim):
        m = idx[: dim - k]
        # log sqrt C(m+k, k)
        lc = 0.5 * (gammaln(m + k + 1) - gammaln(m + 1) - gammaln(k + 1))
        if eta == 0.0:
            amp = np.where(m == 0, np.exp(lc), 0.0)
        else:
            amp = np.exp(lc + 0.5 * m * np.log(eta))
        amp = amp * (1.0 - eta) ** (k / 2)
        out[: dim - k, : dim - k] += np.outer(amp, amp) * rho[k:, k:]
    return out


def displacement(alpha, cutoff, tol=NORM_TOL):
    """Columns 0..cutoff of D(alpha), with rows extended beyond the cutoff.

    Built as a matrix exponential in a padded space; the padding grows until
    every returned column keeps its norm to within ``tol``.
    """
    dim = cutoff + 1
    pad = 30 + int(4 * abs(alpha) ** 2)
    while True:
        big = dim + pad
        a = annihilation_matrix(big)
        d = expm(alpha * a.T - np.conj(alpha) * a)
        cols = d[:, :dim]
        # the tail of the padded exponential is unreliable; keep rows with margin
        keep = dim + pad // 2
        cols = cols[:keep]
        loss = 1.0 - np.sum(np.abs(cols) ** 2, axis=0)
        if np.max(loss) <= tol:
            return cols
        pad *= 2
        if big > 1200:
            raise TruncationError(f"displacement alpha={alpha} not resolved at cutoff {cutoff}")


def parity_expectation(rho):
    n = np.arange(rho.shape[0])
    return float(np.sum((-1.0) ** n * np.real(np.diag(rho))))


def wigner_at(rho, x, p):
    """Wigner function at (x, p) via the displaced parity.

    W(x, p) = (1/pi) sum_n (-1)^n <n| D(-alpha) rho D(alpha) |n>,
    alpha = (x + i p) / sqrt(2).
    """
    if x == 0 and p == 0:
        return parity_expectation(rho) / np.pi
    alpha = (x + 1j * p) / np.sqrt(2)
    d = displacement(-alpha, cutoff_of(rho))
    shifted = d @ rho @ d.conj().T
    n = np.arange(shifted.shape[0])
    return float(np.sum((-1.0) ** n * np.real(np.diag(shifted))) / np.pi)


def wigner_grid(rho, xs, ps):
    """Wigner function on the grid xs x ps, shape (len(ps), len(xs)).

    Sums the closed-form Wigner functions of the Fock operators |m><n|
    (generalized Laguerre polynomials); independent of ``wigner_at``.
    """
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    X, P = np.meshgrid(xs, ps)
    alpha = (X + 1j * P) / np.sqrt(2)
    a2 = 4 * np.abs(alpha) ** 2
    dim = rho.shape[0]
    w = np.zeros(X.shape)
    for n in range(dim):
        w += np.real(rho[n, n]) * (-1) ** n * eval_genlaguerre(n, 0, a2)
        for m in range(n + 1, dim):
            k = m - n
            coef = (-1) ** n * np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            term = coef * (2 * np.conj(alpha)) ** k * eval_genlaguerre(n, k, a2)
            w += 2 * np.real(rho[m, n] * term)
    return w * np.exp(-a2 / 2) / np.pi


def quadrature_operator(phi, cutoff):
    a = annihilation_matrix(cutoff + 1)
    return (np.exp(-1j * phi) * a + np.exp(1j * phi) * a.T) / np.sqrt(2)


def expect(rho, op):
    return np.trace(rho @ op)


def photon_number_mean(rho):
    return float(np.real(np.sum(np.arange(rho.shape[0]) * np.diag(rho))))


# --------------------------------------------------------------------------
# comparisons
# --------------------------------------------------------------------------

def fidelity(rho, psi):
    """<psi| rho |psi> for a normalized ket."""
    if rho.shape[0] != psi.shape[0]:
        raise CutoffMismatch(f"rho cutoff {cutoff_of(rho)} vs ket cutoff {cutoff_of(psi)}")
    return float(np.real(np.vdot(psi, rho @ psi)))


def state_fidelity(rho, sigma):
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.shape != sigma.shape:
        raise CutoffMismatch("density matrices have different cutoffs")
    s = sqrtm(_psd_projection(rho))
    inner = sqrtm(_psd_projection(s @ sigma @ s))
    return float(np.real(np.trace(inner)) ** 2)


def _psd_projection(rho):
    rho = (rho + rho.conj().T) / 2
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0, None)
    return (vecs * vals) @ vecs.conj().T


def best_fit_odd_cat(rho, max_amp=2.5, amp_step=0.05, phase_step=np.pi / 180, refine=True):
    """Odd cat maximizing <cat|rho|cat> over complex alpha.

    Grid over |alpha| in [0, max_amp] and arg(alpha) in [0, pi), then a
    Nelder-Mead refinement from the best grid point.  Grid ties go to the
    smallest |alpha| (then smallest phase).  Cats are renormalized after
    truncation rather than rejected.  Returns (alpha, fidelity) with
    Re(alpha) >= 0, since the cat is invariant under alpha -> -alpha.
    """
    cutoff = cutoff_of(rho)
    n_amp = int(round(max_amp / amp_step)) + 1
    amps = amp_step * np.arange(n_amp)
    phases = phase_step * np.arange(int(np.ceil(np.pi / phase_step - 1e-9)))
    grid = (amps[:, None] * np.exp(1j * phases[None, :])).ravel()
    cats = _odd_cat_unnormalized(grid, cutoff)
    norms = np.einsum("ij,ij->i", cats.conj(), cats).real
    fids = np.einsum("ij,jk,ik->i", cats.conj(), rho, cats).real / norms
    best = int(np.argmax(fids))
    alpha, fbest = grid[best], float(fids[best])

    if refine:
        def neg(v):
            c = _odd_cat_unnormalized(np.array([v[0] + 1j * v[1]]), cutoff)[0]
            return -np.real(np.vdot(c, rho @ c)) / np.vdot(c, c).real

        res = minimize(neg, [alpha.real, alpha.imag], method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 2000})
        if -res.fun > fbest:
            alpha, fbest = res.x[0] + 1j * res.x[1], float(-res.fun)
    if alpha.real < 0 or (alpha.real == 0 and alpha.imag < 0):
        alpha = -alpha
    return complex(alpha), fbest


# --------------------------------------------------------------------------
# validation and I/O
# --------------------------------------------------------------------------

def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8):
    """Raise ValueError unless rho is Hermitian, unit-trace and PSD."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"density matrix trace {tr} != 1")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lo < -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo}")


def dm_to_json(rho):
    return json.dumps(dm_to_dict(rho))


def dm_to_dict(rho):
    return {
        "cutoff": cutoff_of(rho),
        "re": np.real(rho).ravel().tolist(),
        "im": np.imag(rho).ravel().tolist(),
    }


def dm_from_dict(d):
    dim = int(d["cutoff"]) + 1
    re = np.asarray(d["re"], dtype=float).reshape(dim, dim)
    im = np.asarray(d["im"], dtype=float).reshape(dim, dim)
    return re + 1j * im


def dm_from_json(text):
    return dm_from_dict(json.loads(text))


def write_wigner_csv(path, xs, ps, w):
    """Write a Wigner grid (as returned by ``wigner_grid``) with header x,p,w."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "p", "w"])
        for j, p in enumerate(ps):
            for i, x in enumerate(xs):
                writer.writerow([repr(float(x)), repr(float(p)), repr(float(w[j, i]))])


def read_wigner_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


# --------------------------------------------------------------------------
# quadrature wavefunctions
# --------------------------------------------------------------------------

def hermite_functions(cutoff, x):
    """Oscillator eigenfunctions psi_0..psi_cutoff at x, shape (cutoff + 1, len(x)).

    Upward three-term recurrence on the polynomial part, with the Gaussian
    factor applied in log space so large |x| underflows cleanly to zero
    instead of overflowing first.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((cutoff + 1, x.size))
    out[0] = np.pi ** -0.25
    if cutoff >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, cutoff):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(out)) - x ** 2 / 2
    return np.sign(out) * np.exp(logs)


def quadrature_kets(cutoff, x, phi):
    """Columns <n|x, phi> = exp(i n phi) psi_n(x); phi broadcasts against x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), x.shape)
    n = np.arange(cutoff + 1)[:, None]
    return np.exp(1j * n * phi[None, :]) * hermite_functions(cutoff, x)


def quadrature_marginal(rho, phi, x):
    """Probability density of x(phi) for state rho."""
    v = quadrature_kets(cutoff_of(rho), x, phi)
    return np.einsum("nx,nm,mx->x", v.conj(), rho, v).real
