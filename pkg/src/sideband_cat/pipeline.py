"""Config-driven commands: spectrum, envelope, simulate, tomo, budget.

Each command takes an ExperimentConfig and an output directory, writes its
tables and a JSON report, and returns the report as a dict.  Reports embed
the resolved config text and a sha256 over the inputs (the config text,
plus the data files for ``tomo``).
"""

import hashlib
import json
import os

import numpy as np

from . import fock, homodyne, sideband, spectral, tomography
from .config import ExperimentConfig, to_ini
from .errors import CalibrationMissing, NonConvergence

TRACES_FILE = "traces.bin"
CALIBRATION_FILE = "calibration.bin"
TRUTH_FILE = "truth.json"


def _sha256(*chunks):
    h = hashlib.sha256()
    for c in chunks:
        h.update(c if isinstance(c, bytes) else c.encode())
    return h.hexdigest()


def _file_sha(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _provenance(cfg, *extra_hashes):
    text = to_ini(cfg)
    return {"config": text, "input_sha256": _sha256(text, *extra_hashes)}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def theory_envelope(cfg, dt=spectral.DEFAULT_DT):
    return spectral.cat_envelope(cfg.opo, cfg.filters, dt=dt)


def resolved_model(cfg):
    """Heralded-state model from the config: r_eff from the envelope, eta and p_bg from the budget."""
    spectrum = cfg.spectrum()
    return sideband.model_from_config(spectrum, theory_envelope(cfg), cfg.budget, cfg.mle.cutoff)


# --------------------------------------------------------------------------


def cmd_spectrum(cfg: ExperimentConfig, out_dir, f_min=400e6, f_max=600e6, n_points=2001):
    """Squeezing spectrum table over [f_min, f_max] Hz."""
    os.makedirs(out_dir, exist_ok=True)
    spectrum = cfg.spectrum()
    freqs = np.linspace(f_min, f_max, n_points)
    path = os.path.join(out_dir, "spectrum.csv")
    spectral.write_spectrum_csv(path, spectrum, freqs)
    omega = cfg.opo.omega_sideband
    report = {
        "eta": spectrum.eta,
        "r_at_sideband": float(spectrum.r(omega)),
        "squeezing_db": float(spectrum.level_db(omega, -1)),
        "antisqueezing_db": float(spectrum.level_db(omega, +1)),
        "table": "spectrum.csv",
        **_provenance(cfg),
    }
    _write_json(os.path.join(out_dir, "spectrum.json"), report)
    return report


def cmd_envelope(cfg, out_dir):
    """Cat envelope (f*h), trigger response f and detector kernel d."""
    os.makedirs(out_dir, exist_ok=True)
    env = theory_envelope(cfg)
    f = spectral.trigger_response(cfg.filters).normalize()
    d = homodyne.detector_response(cfg.homodyne.f_c, spectral.DEFAULT_DT)
    spectral.write_mode_csv(os.path.join(out_dir, "envelope.csv"), env)
    spectral.write_mode_csv(os.path.join(out_dir, "trigger_response.csv"), f)
    spectral.write_mode_csv(os.path.join(out_dir, "detector.csv"), d)
    report = {
        "envelope_peak_ns": env.peak_time() * 1e9,
        "envelope_norm": env.norm,
        "r_eff": sideband.effective_squeezing(cfg.spectrum(), env),
        "tables": ["envelope.csv", "trigger_response.csv", "detector.csv"],
        **_provenance(cfg),
    }
    _write_json(os.path.join(out_dir, "envelope.json"), report)
    return report


def cmd_simulate(cfg, out_dir):
    """Synthetic trace set, pump-off calibration set and the ground-truth state."""
    os.makedirs(out_dir, exist_ok=True)
    spectrum = cfg.spectrum()
    env = theory_envelope(cfg)
    model = resolved_model(cfg)
    rho = sideband.build_model_state(model)
    traces, truth_q = homodyne.synthesize_traces(rho, spectrum, cfg.homodyne, env,
                                                 eta_cos=model.eta_cos, return_truth=True)
    calibration = homodyne.synthesize_calibration(cfg.homodyne)
    homodyne.write_traces(os.path.join(out_dir, TRACES_FILE), traces)
    homodyne.write_traces(os.path.join(out_dir, CALIBRATION_FILE), calibration)
    homodyne.QuadratureDataset(traces.phases, truth_q).to_csv(os.path.join(out_dir, "truth_quadratures.csv"))
    report = {
        "model": {"r_eff": model.r_eff, "eta_cos": model.eta_cos,
                  "p_background": model.p_background, "cutoff": model.cutoff},
        "wigner_origin": fock.wigner_at(rho, 0.0, 0.0),
        "rho": fock.dm_to_dict(rho),
        "n_traces": traces.n_traces,
        "n_samples": traces.n_samples,
        **_provenance(cfg),
    }
    _write_json(os.path.join(out_dir, TRUTH_FILE), report)
    return report


def cmd_tomo(cfg, data_dir, out_dir, threads=1):
    """ICA, extraction, MLE, Wigner and bootstrap for both channels.

    On ICA non-convergence a partial report is written and NonConvergence
    is re-raised.
    """
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(data_dir, TRACES_FILE)
    cal_path = os.path.join(data_dir, CALIBRATION_FILE)
    if not os.path.exists(cal_path):
        raise CalibrationMissing(f"no {CALIBRATION_FILE} in {data_dir}")
    traces, _ = homodyne.read_traces(trace_path)
    calibration, _ = homodyne.read_traces(cal_path)
    prov = _provenance(cfg, _file_sha(trace_path), _file_sha(cal_path))

    theory = theory_envelope(cfg)
    ica = tomography.run_ica(traces, cfg.ica, theory=theory)
    xi = tomography.physical_mode(ica.chi, cfg.homodyne.f_c)
    overlap = spectral.mode_overlap(
        xi, spectral.TemporalMode(theory.resample(traces.times), traces.t0, traces.dt))
    spectral.write_mode_csv(os.path.join(out_dir, "chi.csv"), ica.chi)
    spectral.write_mode_csv(os.path.join(out_dir, "chi_detector.csv"), xi)
    report = {
        "ica": {"kurtosis": ica.kurtosis, "n_iter": ica.n_iter, "converged": ica.converged,
                "degenerate": ica.degenerate, "threshold": ica.threshold,
                "overlap_with_theory": overlap},
        **prov,
    }
    report_path = os.path.join(out_dir, "tomography.json")
    if not ica.converged or ica.degenerate:
        report["status"] = "ica_failed"
        _write_json(report_path, report)
        raise NonConvergence("ICA did not find the cat mode; partial report written")

    grid = np.round(np.arange(-100, 101) * 0.05, 10)
    for channel in ("I", "Q"):
        data = tomography.extract_quadratures(traces, ica.chi, channel, calibration)
        data.to_csv(os.path.join(out_dir, f"quadratures_{channel}.csv"))
        rep = tomography.tomography_report(data, cfg.mle, channel, n_boot=cfg.n_boot,
                                           seed=cfg.bootstrap_seed, threads=threads)
        d = rep.to_dict()
        if channel == "Q":
            r, eta, phase, fid = tomography.best_fit_lossy_squeezed(rep.rho)
            d["best_lossy_squeezed"] = {"r": r, "eta": eta, "phase": phase, "fidelity": fid}
        report[channel] = d
        fock.write_wigner_csv(os.path.join(out_dir, f"wigner_{channel}.csv"), grid, grid,
                              fock.wigner_grid(rep.rho, grid, grid))

    truth_path = os.path.join(data_dir, TRUTH_FILE)
    if os.path.exists(truth_path):
        with open(truth_path) as fh:
            report["truth_wigner_origin"] = json.load(fh)["wigner_origin"]
    converged = report["I"]["converged"] and report["Q"]["converged"]
    report["status"] = "ok" if converged else "mle_not_converged"
    _write_json(report_path, report)
    if not converged:
        raise NonConvergence("MLE hit its iteration cap; report written")
    return report


def cmd_budget(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    rep = sideband.efficiency_budget(cfg.budget)
    report = {**json.loads(rep.to_json()), **_provenance(cfg)}
    _write_json(os.path.join(out_dir, "budget.json"), report)
    return report
