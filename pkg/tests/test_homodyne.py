import numpy as np
import pytest

from sideband_cat import fock
from sideband_cat import homodyne as hd
from sideband_cat import sideband as sb
from sideband_cat import spectral as sp
from sideband_cat import tomography as tm
from sideband_cat.errors import ConfigError, GridError

NO_PUMP = sp.OpoParams(gamma=sp.REFERENCE_OPO.gamma, epsilon=0.0, fsr=sp.REFERENCE_OPO.fsr)


def exact_chi(cfg, envelope):
    """Weights whose detector-seen mode is exactly the envelope on the record."""
    d = hd.detector_matrix(hd.detector_response(cfg.f_c, cfg.dt), cfg.n_samples)
    g = envelope.resample(cfg.times)
    g /= np.linalg.norm(g)
    return sp.TemporalMode(np.linalg.solve(d.T, g), cfg.window[0], cfg.dt)


# ---------------------------------------------------------------- wavepacket level


def test_vacuum_sample_variance():
    data = hd.sample_wavepacket_quadratures(fock.ket_to_dm(fock.vacuum(5)), [0.0], 100000, seed=1)
    sigma = 0.5 * np.sqrt(2 / len(data))
    assert abs(data.values.var() - 0.5) < 3 * sigma


def test_squeezed_sample_levels():
    rho = sb.lossy_squeezed_vacuum(0.426, 0.70, 20)
    data = hd.sample_wavepacket_quadratures(rho, [0.0, np.pi / 2], 50000, seed=2)
    v = [data.values[data.phases == p].var() for p in (0.0, np.pi / 2)]
    db = 10 * np.log10(np.array(v) / 0.5)
    assert db[1] == pytest.approx(-2.2, abs=0.15)
    assert db[0] == pytest.approx(2.9, abs=0.2)


def test_cat_marginals(model_rho):
    data = hd.sample_wavepacket_quadratures(model_rho, [0.0, np.pi / 2], 40000, seed=3)
    x0 = data.values[data.phases == 0.0]
    # the anti-squeezed phase is bimodal and platykurtic
    assert tm.excess_kurtosis(x0) < -0.3
    edges = np.linspace(-4, 4, 41)
    hist, _ = np.histogram(x0, edges, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    pdf = fock.quadrature_marginal(model_rho, 0.0, centers)
    assert np.max(np.abs(hist - pdf)) < 0.03
    # two maxima away from the origin, a dip at the origin
    assert pdf[20] < pdf[np.argmax(pdf)]


def test_wavepacket_sampling_deterministic(model_rho):
    a = hd.sample_wavepacket_quadratures(model_rho, hd.default_phases(4), 100, seed=9)
    b = hd.sample_wavepacket_quadratures(model_rho, hd.default_phases(4), 100, seed=9)
    assert np.array_equal(a.values, b.values)


def test_quadrature_csv_roundtrip(tmp_path, model_rho):
    a = hd.sample_wavepacket_quadratures(model_rho, [0.0, 1.0], 50, seed=1)
    a.to_csv(tmp_path / "q.csv")
    assert (tmp_path / "q.csv").read_text().splitlines()[0] == "phase_rad,quadrature"
    b = hd.QuadratureDataset.from_csv(tmp_path / "q.csv")
    assert np.array_equal(a.values, b.values) and np.array_equal(a.phases, b.phases)


# ---------------------------------------------------------------- detector


def test_detector_time_constant():
    k = hd.detector_response(14e6, 0.01e-9)
    t_e = k.times[np.argmin(np.abs(k.samples / k.samples[0] - np.exp(-1)))]
    assert t_e == pytest.approx(11.37e-9, abs=0.02e-9)


def test_detector_step_response():
    dt = 0.4e-9
    k = hd.detector_response(14e6, dt)
    step = np.ones(400)
    out = hd.apply_detector(step[None, :], k)[0]
    expected = 1 - np.exp(-2 * np.pi * 14e6 * (np.arange(400) + 1) * dt)
    assert np.allclose(out, expected, atol=1e-10)


def test_detector_fast_limit_is_delta():
    k = hd.detector_response(1e12, 0.4e-9)
    w = k.samples / k.samples.sum()
    assert w[0] > 1 - 1e-6


def test_detector_grid_error():
    with pytest.raises(GridError):
        hd.detector_response(0.0, 1e-9)


def test_detector_matrix_matches_convolution(rng):
    k = hd.detector_response(14e6, 2e-9)
    x = rng.normal(size=(3, 50))
    d = hd.detector_matrix(k, 50)
    assert np.allclose(hd.apply_detector(x, k), x @ d.T)


# ---------------------------------------------------------------- traces


def test_config_invariants():
    with pytest.raises(ConfigError):
        hd.HomodyneConfig(lo_phases=())
    with pytest.raises(ConfigError):
        hd.HomodyneConfig(window=(1e-7, 0.0))


def test_bandwidth_check(model_rho):
    cfg = hd.HomodyneConfig(sample_rate=50e6, n_traces_per_phase=2)
    with pytest.raises(ConfigError):
        hd.synthesize_traces(model_rho, sp.SpectralModel(sp.REFERENCE_OPO, 0.7), cfg)


def test_window_shorter_than_envelope(model_rho):
    cfg = hd.HomodyneConfig(window=(0.0, 40e-9), n_traces_per_phase=2)
    with pytest.raises(ConfigError):
        hd.synthesize_traces(model_rho, sp.SpectralModel(sp.REFERENCE_OPO, 0.7), cfg)


def test_synthesis_bit_reproducible(model):
    cfg = hd.HomodyneConfig(n_traces_per_phase=20, lo_phases=hd.default_phases(3), seed=5)
    spec = sp.SpectralModel(sp.REFERENCE_OPO, 0.7)
    a = hd.synthesize_traces(model, spec, cfg)
    b = hd.synthesize_traces(model, spec, cfg)
    assert np.array_equal(a.i_traces, b.i_traces) and np.array_equal(a.q_traces, b.q_traces)
    c = hd.synthesize_traces(model, spec, hd.HomodyneConfig(n_traces_per_phase=20,
                                                            lo_phases=hd.default_phases(3), seed=6))
    assert not np.array_equal(a.i_traces, c.i_traces)


def test_vacuum_traces_are_filtered_white_noise():
    cfg = hd.HomodyneConfig(n_traces_per_phase=4000, lo_phases=(0.0,), seed=2)
    vac = fock.ket_to_dm(fock.vacuum(3))
    tr = hd.synthesize_traces(vac, sp.SpectralModel(NO_PUMP, 0.4), cfg)
    k = hd.detector_response(cfg.f_c, cfg.dt)
    w = k.samples / k.samples.sum()
    expected_var = 0.5 * np.sum(w ** 2)
    for y in (tr.i_traces, tr.q_traces):
        assert y[:, 100].var() == pytest.approx(expected_var, rel=0.06)
        # lag-5 autocorrelation of an exponentially filtered white process
        lag = np.mean(y[:, 100] * y[:, 105]) / y[:, 100].var()
        assert lag == pytest.approx(np.sum(w[5:] * w[:-5]) / np.sum(w ** 2), abs=0.05)
    cross = np.mean(tr.i_traces[:, 100] * tr.q_traces[:, 100]) / expected_var
    assert abs(cross) < 0.05


def test_iq_orthogonality_calibration():
    cfg = hd.HomodyneConfig(n_traces_per_phase=1, lo_phases=(0.0,), seed=4)
    cal = hd.synthesize_calibration(cfg, n_traces=20000)
    i, q = cal.i_traces.ravel(), cal.q_traces.ravel()
    assert abs(np.corrcoef(i, q)[0, 1]) < 0.02


def test_shot_noise_calibration():
    cfg = hd.HomodyneConfig(window=(-20e-9, 60e-9), n_traces_per_phase=1, lo_phases=(0.0,), seed=1)
    cal = hd.synthesize_calibration(cfg, n_traces=100000)
    other = hd.synthesize_calibration(hd.HomodyneConfig(window=cfg.window, n_traces_per_phase=1,
                                                        lo_phases=(0.0,), seed=2), n_traces=100000)
    chi = sp.TemporalMode(np.exp(-((cal.times - 20e-9) / 15e-9) ** 2), cal.t0, cal.dt)
    data = tm.extract_quadratures(other, chi, "I", cal)
    assert data.values.var() == pytest.approx(0.5, rel=0.02)


def test_injection_consistency(ci_run):
    cfg, tr, truth = ci_run["cfg"], ci_run["traces"], ci_run["truth"]
    chi = exact_chi(cfg, ci_run["envelope"])
    data = tm.extract_quadratures(tr, chi, "I", ci_run["calibration"])
    # exact weights recover the injected values up to the calibration scale
    assert np.corrcoef(data.values, truth)[0, 1] > 0.999
    for phi in cfg.lo_phases[:3]:
        sel = tr.phases == phi
        x, q = data.values[sel], truth[sel]
        n = sel.sum()
        assert abs(x.mean() - q.mean()) < 3 * np.sqrt(q.var() / n)
        assert abs(x.var() - q.var()) < 3 * q.var() * np.sqrt(2 / n)


def test_injected_values_follow_model(ci_run):
    tr, truth, rho = ci_run["traces"], ci_run["truth"], ci_run["rho"]
    for phi in (0.0, np.pi / 2):
        sel = np.isclose(tr.phases, phi)
        xq = fock.quadrature_operator(phi, 14)
        big = np.zeros((15, 15), dtype=complex)
        big[:14, :14] = rho
        var = fock.expect(big, xq @ xq).real
        assert truth[sel].var() == pytest.approx(var, rel=4 * np.sqrt(2 / sel.sum()))


def test_channel_noise_levels(ci_run):
    cfg = ci_run["cfg"]
    chi = exact_chi(cfg, ci_run["envelope"])
    i_data = tm.extract_quadratures(ci_run["traces"], chi, "I", ci_run["calibration"])
    q_data = tm.extract_quadratures(ci_run["traces"], chi, "Q", ci_run["calibration"])
    at = np.isclose(ci_run["traces"].phases, np.pi / 2)
    at0 = np.isclose(ci_run["traces"].phases, 0.0)
    # the cat quadrature at pi/2 is above shot noise; the Q channel stays squeezed there
    assert i_data.values[at].var() > 0.5
    assert q_data.values[at].var() < 0.45
    assert q_data.values[at0].var() > 0.6
    for phi in cfg.lo_phases:
        assert abs(tm.excess_kurtosis(q_data.values[ci_run["traces"].phases == phi])) < 0.25


def test_trace_file_roundtrip(tmp_path, model):
    cfg = hd.HomodyneConfig(n_traces_per_phase=3, lo_phases=hd.default_phases(2))
    tr = hd.synthesize_traces(model, sp.SpectralModel(sp.REFERENCE_OPO, 0.7), cfg)
    hd.write_traces(tmp_path / "t.bin", tr)
    back, header = hd.read_traces(tmp_path / "t.bin")
    assert set(header) >= {"sample_rate", "t0", "dt", "n_traces", "phase_table"}
    assert np.allclose(back.i_traces, tr.i_traces, rtol=1e-6, atol=1e-9)
    assert np.allclose(back.q_traces, tr.q_traces, rtol=1e-6, atol=1e-9)
    assert np.array_equal(back.phases, tr.phases)
    raw = (tmp_path / "t.bin").read_bytes()
    hlen = int.from_bytes(raw[:4], "little")
    assert len(raw) == 4 + hlen + 2 * 4 * tr.i_traces.size


def test_raw_rf_roundtrip(rng):
    dt = 0.1e-9
    t = dt * np.arange(4000)
    # an integer number of carrier cycles keeps the 2W mixing product out of the pass band
    omega = 2 * np.pi * 500e6
    # band-limited baseband signals
    spec_i = np.zeros(2001, dtype=complex)
    spec_q = np.zeros(2001, dtype=complex)
    spec_i[1:40] = rng.normal(size=39) + 1j * rng.normal(size=39)
    spec_q[1:40] = rng.normal(size=39) + 1j * rng.normal(size=39)
    i_sig, q_sig = np.fft.irfft(spec_i, 4000), np.fft.irfft(spec_q, 4000)
    rf = hd.iq_modulate(i_sig, q_sig, t, omega)
    i2, q2 = hd.iq_demodulate(rf, t, omega, bandwidth=100e6)
    assert np.allclose(i2, i_sig, atol=1e-3 * np.abs(i_sig).max())
    assert np.allclose(q2, q_sig, atol=1e-3 * np.abs(q_sig).max())
