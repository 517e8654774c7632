"""Experiment configuration: dataclass sections and a ``section.key = value`` text format.

Unknown sections or keys are errors, so a typo in a power constant cannot
silently fall back to its default.
"""

from dataclasses import dataclass, field, fields, replace
import math

from .channel import dbm_to_watt, noise_variance_from
from .dinkelbach import DEFAULT_WEIGHTS, SolverConfig
from .errors import ConfigError, ContractViolation, ParseError
from .hardware import PowerModel

CHANNEL_MODELS = ("rayleigh", "geometric", "file")


@dataclass(frozen=True)
class SystemSection:
    n_antennas: int = 64
    n_users: int = 4
    n_rf_chains: int = 4
    pmax_dbm: float = 30.0
    bandwidth_hz: float = 1e8
    noise_figure_db: float = 5.0
    dac_bits: int = 4


@dataclass(frozen=True)
class PowerSection:
    p_lp_mw: float = 14.0
    p_m_mw: float = 0.3
    p_h_mw: float = 3.0
    p_lo_mw: float = 22.5
    p_ps_mw: float = 21.6
    p_adm_uw: float = 8.75
    pa_efficiency: float = 0.27
    z0_ohm: float = 50.0


@dataclass(frozen=True)
class ChannelSection:
    model: str = "rayleigh"
    seed: int = 0
    paths: int = 4
    path: str = ""
    scale: float = 1.0


@dataclass(frozen=True)
class SolverSection:
    eps_in: float = 1e-6
    eps_out: float = 1e-6
    max_outer: int = 100
    max_inner: int = 500
    max_pgd: int = 2000
    frontier_weights: tuple = DEFAULT_WEIGHTS
    recal_passes: int = 3
    max_sca: int = 200


_COUNTS = {
    "system": ("n_antennas", "n_users", "n_rf_chains", "dac_bits"),
    "channel": ("paths",),
    "solver": ("max_outer", "max_inner", "max_pgd", "recal_passes", "max_sca"),
}
_NONNEGATIVE = {
    "power": ("p_lp_mw", "p_m_mw", "p_h_mw", "p_lo_mw", "p_ps_mw", "p_adm_uw"),
}
_POSITIVE = {
    "system": ("bandwidth_hz",),
    "power": ("z0_ohm",),
    "channel": ("scale",),
    "solver": ("eps_in", "eps_out"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of a run. Defaults reproduce the reference system parameters."""

    system: SystemSection = field(default_factory=SystemSection)
    power: PowerSection = field(default_factory=PowerSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    solver: SolverSection = field(default_factory=SolverSection)
    runs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        for section, names in _COUNTS.items():
            for name in names:
                v = getattr(getattr(self, section), name)
                if not isinstance(v, int) or v < 1:
                    raise ConfigError("must be an integer >= 1", f"{section}.{name}")
        for section, names in _NONNEGATIVE.items():
            for name in names:
                v = getattr(getattr(self, section), name)
                if not (math.isfinite(v) and v >= 0):
                    raise ConfigError("must be finite and nonnegative", f"{section}.{name}")
        for section, names in _POSITIVE.items():
            for name in names:
                v = getattr(getattr(self, section), name)
                if not (math.isfinite(v) and v > 0):
                    raise ConfigError("must be finite and positive", f"{section}.{name}")
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("must be an integer >= 1", "runs")
        if not math.isfinite(self.system.pmax_dbm):
            raise ConfigError("must be finite", "system.pmax_dbm")
        if not math.isfinite(self.system.noise_figure_db):
            raise ConfigError("must be finite", "system.noise_figure_db")
        if not 0.0 < self.power.pa_efficiency <= 1.0:
            raise ConfigError("must lie in (0, 1]", "power.pa_efficiency")
        if self.channel.model not in CHANNEL_MODELS:
            raise ConfigError(f"must be one of {', '.join(CHANNEL_MODELS)}", "channel.model")
        if self.channel.model == "file" and not self.channel.path:
            raise ConfigError("required when channel.model = file", "channel.path")
        try:
            self.solver_config()
        except ContractViolation as exc:
            raise ConfigError(str(exc), "solver.frontier_weights") from None

    # -- derived objects --------------------------------------------------------
    @property
    def p_max_w(self):
        return dbm_to_watt(self.system.pmax_dbm)

    @property
    def noise_variance(self):
        return noise_variance_from(self.system.noise_figure_db, self.system.bandwidth_hz)

    def power_model(self):
        p = self.power
        return PowerModel(
            p_lp=p.p_lp_mw * 1e-3,
            p_m=p.p_m_mw * 1e-3,
            p_h=p.p_h_mw * 1e-3,
            p_lo=p.p_lo_mw * 1e-3,
            p_ps=p.p_ps_mw * 1e-3,
            p_adm_eff=p.p_adm_uw * 1e-6,
            pa_efficiency=p.pa_efficiency,
            sampling_rate_hz=self.system.bandwidth_hz,
            dac_bits=self.system.dac_bits,
        )

    def solver_config(self):
        s = self.solver
        return SolverConfig(
            p_max=self.p_max_w,
            bandwidth_hz=self.system.bandwidth_hz,
            eps_in=s.eps_in,
            eps_out=s.eps_out,
            max_outer=s.max_outer,
            max_inner=s.max_inner,
            max_pgd=s.max_pgd,
            frontier_weights=s.frontier_weights,
            recal_passes=s.recal_passes,
            max_sca=s.max_sca,
        )

    def with_values(self, **changes):
        """Copy with dotted-key overrides, e.g. ``with_values(**{"system.n_users": 8})``."""
        return _apply(changes, self)


_SECTIONS = {
    "system": SystemSection,
    "power": PowerSection,
    "channel": ChannelSection,
    "solver": SolverSection,
}


def _convert(key, kind, value):
    if not isinstance(value, str):
        if kind is tuple:
            return tuple(float(v) for v in value)
        if kind is float and isinstance(value, int):
            return float(value)
        return value
    try:
        if kind is tuple:
            parts = [t for t in value.replace(" ", "").split(",") if t]
            if not parts:
                raise ValueError("empty list")
            return tuple(float(t) for t in parts)
        if kind is int:
            v = float(value)
            if not v.is_integer():
                raise ValueError("not an integer")
            return int(v)
        if kind is float:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"cannot parse {value!r} ({exc})", key) from None


def _apply(changes, base):
    """Apply dotted-key changes to ``base`` and validate the result once."""
    per_section = {name: {} for name in _SECTIONS}
    runs = base.runs
    for key, value in changes.items():
        if key == "runs":
            runs = _convert(key, int, value)
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS:
            raise ConfigError("unknown section", key)
        types = {f.name: type(f.default) for f in fields(_SECTIONS[section])}
        if name not in types:
            raise ConfigError("unknown key", key)
        per_section[section][name] = _convert(key, types[name], value)
    parts = {sec: replace(getattr(base, sec), **kw) for sec, kw in per_section.items()}
    return ExperimentConfig(runs=runs, **parts)


def parse_config(text, base=None):
    """Parse ``section.key = value`` lines (``#`` starts a comment)."""
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = (s.strip() for s in line.partition("="))
        if not eq or not key:
            raise ParseError("expected 'key = value'", lineno)
        if key in changes:
            raise ConfigError(f"duplicate key on line {lineno}", key)
        changes[key] = value
    return _apply(changes, ExperimentConfig() if base is None else base)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file ({exc.strerror})", str(path)) from None
    return parse_config(text)


def dump_config(cfg):
    """Inverse of ``parse_config``: every key on its own line."""
    lines = []
    for section in _SECTIONS:
        sec = getattr(cfg, section)
        for f in fields(sec):
            v = getattr(sec, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{section}.{f.name} = {v}")
    lines.append(f"runs = {cfg.runs}")
    return "\n".join(lines) + "\n"
