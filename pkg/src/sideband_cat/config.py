"""Experiment configuration as an INI document with units in the key names.

Numbers are written to 12 significant digits, so serializing a parsed
document reproduces it byte for byte, and any parsed config c satisfies
parse(serialize(c)) == c.
Randomness flows from the single ``run.seed``: the homodyne, ICA and
bootstrap streams are children 0, 1 and 2 of ``SeedSequence(seed)``.
"""

import configparser
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .homodyne import HomodyneConfig, default_phases
from .sideband import EfficiencyBudget, ModulationParams, efficiency_budget
from .spectral import FilterChain, OpoParams, Parity, SpectralModel
from .tomography import IcaConfig, MleConfig


def derived_seed(master, stream):
    """64-bit seed of child ``stream`` of the master seed."""
    ss = np.random.SeedSequence(master).spawn(3)[stream]
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ExperimentConfig:
    opo: OpoParams = field(default_factory=lambda: OpoParams(1 / 16e-9, 0.21, 1.0012e9))
    filters: FilterChain = field(default_factory=lambda: FilterChain.from_time_constants((30e-9, 2.2e-9, 3.2e-9)))
    modulation: ModulationParams = field(default_factory=lambda: ModulationParams.from_transfer(0.04))
    budget: EfficiencyBudget = field(default_factory=EfficiencyBudget)
    homodyne: HomodyneConfig = field(default_factory=HomodyneConfig)
    ica: IcaConfig = field(default_factory=IcaConfig)
    mle: MleConfig = field(default_factory=MleConfig)
    seed: int = 0
    n_boot: int = 100
    spectrum_form: str = "exact"

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.n_boot != 0 and self.n_boot < 10:
            raise ConfigError("n_boot must be 0 or >= 10")
        self.homodyne = replace(self.homodyne, seed=derived_seed(self.seed, 0))
        self.ica = replace(self.ica, seed=derived_seed(self.seed, 1))

    @property
    def bootstrap_seed(self):
        return derived_seed(self.seed, 2)

    def spectrum(self, eta=None):
        """Squeezing spectrum; the default efficiency is that of the sin sideband."""
        if eta is None:
            eta = efficiency_budget(self.budget).eta_sin
        return SpectralModel(self.opo, eta, self.spectrum_form)

    def with_seed(self, seed):
        return replace(self, seed=seed)


def _f(x):
    # 12 significant digits absorb the roundoff of the unit conversions
    return repr(float(f"{float(x):.12g}"))


def _floats(xs):
    return ", ".join(_f(x) for x in xs)


def to_ini(cfg):
    """Serialize to the canonical INI text."""
    h, ica, mle, b = cfg.homodyne, cfg.ica, cfg.mle, cfg.budget
    equal = np.allclose(h.lo_phases, default_phases(len(h.lo_phases)), rtol=0, atol=1e-15)
    sections = {
        "run": {
            "seed": str(cfg.seed),
            "n_boot": str(cfg.n_boot),
            "spectrum_form": cfg.spectrum_form,
        },
        "opo": {
            "gamma_per_ns": _f(cfg.opo.gamma * 1e-9),
            "epsilon": _f(cfg.opo.epsilon),
            "fsr_ghz": _f(cfg.opo.fsr * 1e-9),
            "parity": cfg.opo.parity.value,
        },
        "filters": {"tau_ns": _floats(1e9 / np.asarray(cfg.filters.decays))},
        "modulation": {
            "beta_squared": _f(cfg.modulation.beta ** 2),
            "theta_rad": _f(cfg.modulation.theta),
            "freq_mhz": _f(cfg.modulation.omega / (2 * np.pi) * 1e-6),
        },
        "budget": {k: _f(getattr(b, k)) for k in b.__dataclass_fields__},
        "homodyne": {
            "sample_rate_gsps": _f(h.sample_rate * 1e-9),
            "window_start_ns": _f(h.window[0] * 1e9),
            "window_stop_ns": _f(h.window[1] * 1e9),
            "f_c_mhz": _f(h.f_c * 1e-6),
            # equally partitioned phases are stored as a count
            ("n_phases" if equal else "phases_rad"): (str(len(h.lo_phases)) if equal else _floats(h.lo_phases)),
            "n_traces_per_phase": str(h.n_traces_per_phase),
            "n_calibration_traces": str(h.n_calibration_traces),
            "trigger_offset_ns": _f(h.trigger_offset * 1e9),
            "pre_roll_ns": _f(h.pre_roll * 1e9),
        },
        "ica": {
            "init": ica.init,
            "max_iters": str(ica.max_iters),
            "tol": _f(ica.tol),
            "whiten": str(ica.whiten).lower(),
            "n_components": str(ica.n_components),
            "n_restarts": str(ica.n_restarts),
            "support_start_ns": _f(ica.support[0] * 1e9),
            "support_stop_ns": _f(ica.support[1] * 1e9),
            "channel": ica.channel,
        },
        "mle": {
            "cutoff": str(mle.cutoff),
            "max_iters": str(mle.max_iters),
            "likelihood_tol": _f(mle.likelihood_tol),
            "bin_width": "none" if mle.bin_width is None else _f(mle.bin_width),
        },
    }
    parser = configparser.ConfigParser()
    parser.read_dict(sections)
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


class _Reader:
    def __init__(self, parser):
        self.parser = parser

    def get(self, section, key, conv=str, default=None):
        try:
            raw = self.parser.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            if default is None:
                raise ConfigError(f"missing {section}.{key}") from None
            return default
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc


def _bool(s):
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ValueError(s)


def _float_list(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def from_ini(text):
    """Parse INI text.  Missing keys fall back to the defaults."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    known = {"run", "opo", "filters", "modulation", "budget", "homodyne", "ica", "mle"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    for sec in parser.sections():
        allowed = set(to_ini_keys[sec])
        unknown = set(parser[sec]) - allowed
        if unknown:
            raise ConfigError(f"unknown keys in [{sec}]: {sorted(unknown)}")

    d = ExperimentConfig()
    rd = _Reader(parser)
    try:
        opo = OpoParams(
            gamma=rd.get("opo", "gamma_per_ns", float, d.opo.gamma * 1e-9) * 1e9,
            epsilon=rd.get("opo", "epsilon", float, d.opo.epsilon),
            fsr=rd.get("opo", "fsr_ghz", float, d.opo.fsr * 1e-9) * 1e9,
            parity=Parity(rd.get("opo", "parity", str, d.opo.parity.value)),
        )
        taus = rd.get("filters", "tau_ns", _float_list, tuple(1e9 / np.asarray(d.filters.decays)))
        filters = FilterChain.from_time_constants(tuple(t * 1e-9 for t in taus))
        modulation = ModulationParams.from_transfer(
            rd.get("modulation", "beta_squared", float, d.modulation.beta ** 2),
            rd.get("modulation", "theta_rad", float, d.modulation.theta),
            2 * np.pi * 1e6 * rd.get("modulation", "freq_mhz", float, d.modulation.omega / (2e6 * np.pi)),
        )
        budget = EfficiencyBudget(**{k: rd.get("budget", k, float, getattr(d.budget, k))
                                     for k in d.budget.__dataclass_fields__})
        h = d.homodyne
        if parser.has_option("homodyne", "phases_rad"):
            phases = rd.get("homodyne", "phases_rad", _float_list)
        else:
            phases = default_phases(rd.get("homodyne", "n_phases", int, len(h.lo_phases)))
        homodyne = HomodyneConfig(
            sample_rate=rd.get("homodyne", "sample_rate_gsps", float, h.sample_rate * 1e-9) * 1e9,
            window=(rd.get("homodyne", "window_start_ns", float, h.window[0] * 1e9) * 1e-9,
                    rd.get("homodyne", "window_stop_ns", float, h.window[1] * 1e9) * 1e-9),
            f_c=rd.get("homodyne", "f_c_mhz", float, h.f_c * 1e-6) * 1e6,
            lo_phases=phases,
            n_traces_per_phase=rd.get("homodyne", "n_traces_per_phase", int, h.n_traces_per_phase),
            n_calibration_traces=rd.get("homodyne", "n_calibration_traces", int, h.n_calibration_traces),
            trigger_offset=rd.get("homodyne", "trigger_offset_ns", float, h.trigger_offset * 1e9) * 1e-9,
            pre_roll=rd.get("homodyne", "pre_roll_ns", float, h.pre_roll * 1e9) * 1e-9,
        )
        i = d.ica
        ica = IcaConfig(
            init=rd.get("ica", "init", str, i.init),
            max_iters=rd.get("ica", "max_iters", int, i.max_iters),
            tol=rd.get("ica", "tol", float, i.tol),
            whiten=rd.get("ica", "whiten", _bool, i.whiten),
            n_components=rd.get("ica", "n_components", int, i.n_components),
            n_restarts=rd.get("ica", "n_restarts", int, i.n_restarts),
            support=(rd.get("ica", "support_start_ns", float, i.support[0] * 1e9) * 1e-9,
                     rd.get("ica", "support_stop_ns", float, i.support[1] * 1e9) * 1e-9),
            channel=rd.get("ica", "channel", str, i.channel),
        )
        bw = rd.get("mle", "bin_width", str, "none")
        mle = MleConfig(
            cutoff=rd.get("mle", "cutoff", int, d.mle.cutoff),
            max_iters=rd.get("mle", "max_iters", int, d.mle.max_iters),
            likelihood_tol=rd.get("mle", "likelihood_tol", float, d.mle.likelihood_tol),
            bin_width=None if bw.lower() == "none" else float(bw),
        )
        return ExperimentConfig(
            opo=opo, filters=filters, modulation=modulation, budget=budget,
            homodyne=homodyne, ica=ica, mle=mle,
            seed=rd.get("run", "seed", int, 0),
            n_boot=rd.get("run", "n_boot", int, d.n_boot),
            spectrum_form=rd.get("run", "spectrum_form", str, d.spectrum_form),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _section_keys():
    parser = configparser.ConfigParser()
    parser.read_string(to_ini(ExperimentConfig()))
    keys = {s: list(parser[s]) for s in parser.sections()}
    keys["homodyne"] += ["phases_rad"]
    return keys


to_ini_keys = _section_keys()


def load(path):
    with open(path) as fh:
        return from_ini(fh.read())


def save(cfg, path):
    with open(path, "w") as fh:
        fh.write(to_ini(cfg))
