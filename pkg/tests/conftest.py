import numpy as np
import pytest

from sideband_cat import homodyne as hd
from sideband_cat import sideband as sb
from sideband_cat import spectral as sp
from sideband_cat import tomography as tm


@pytest.fixture(scope="session")
def envelope():
    return sp.cat_envelope(sp.REFERENCE_OPO, sp.REFERENCE_FILTERS)


@pytest.fixture(scope="session")
def r_eff(envelope):
    return sb.effective_squeezing(sp.SpectralModel(sp.REFERENCE_OPO), envelope)


@pytest.fixture(scope="session")
def model(r_eff):
    return sb.HeraldedStateModel(r_eff=r_eff, eta_cos=0.68, p_background=0.04)


@pytest.fixture(scope="session")
def model_rho(model):
    return sb.build_model_state(model)


@pytest.fixture(scope="session")
def ci_run(model, envelope):
    """CI-scale closed loop: 2000 traces x 12 phases, with calibration and truth."""
    spectrum = sp.SpectralModel(sp.REFERENCE_OPO, eta=0.70)
    cfg = hd.HomodyneConfig(n_traces_per_phase=2000, seed=11)
    traces, truth = hd.synthesize_traces(model, spectrum, cfg, envelope, return_truth=True)
    calibration = hd.synthesize_calibration(cfg)
    return dict(cfg=cfg, traces=traces, truth=truth, calibration=calibration,
                rho=sb.build_model_state(model), envelope=envelope)


@pytest.fixture(scope="session")
def ci_ica(ci_run):
    return tm.run_ica(ci_run["traces"], tm.IcaConfig(), theory=ci_run["envelope"])


@pytest.fixture(scope="session")
def ci_data(ci_run, ci_ica):
    return {ch: tm.extract_quadratures(ci_run["traces"], ci_ica.chi, ch, ci_run["calibration"])
            for ch in ("I", "Q")}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
