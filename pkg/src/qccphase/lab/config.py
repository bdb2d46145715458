"""Run configuration: dataclasses, INI parsing, presets and config echo.

A configuration file is INI text with the sections ``[run]``, ``[model]``,
``[state]``, ``[grid]`` and ``[ensemble]``. Every key is optional (defaults
come from the experiment and the preset), but unknown sections or keys are
errors so that a misspelled parameter never silently falls back to a default.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field, replace

from ..classical import GaussianSpec
from ..hamiltonian import QUADRATIC, QUARTIC, ModelParams
from ..quantum import GridSpec

EXPERIMENTS = ("structure-compare", "break-analysis", "moments", "initial-slope",
               "integrable-contrast")
REF_HBARS = (0.5, 0.05, 0.005)
REF_RS = (0.0, 0.6, -0.6)
#: grid per hbar: (points per axis, half width)
REF_GRIDS = {0.5: (256, 6.0), 0.05: (512, 6.0), 0.005: (512, 3.2)}
#: (t_max, output stride in steps) per experiment
EXPERIMENT_TIMES = {
    "structure-compare": (4.0, 50),
    "break-analysis": (6.0, 50),
    "moments": (8.0, 100),
    "initial-slope": (0.1, 1),
    "integrable-contrast": (10.0, 100),
}
#: integrable partner of the chaotic preset (alpha = beta)
INTEGRABLE_ALPHA = 1.0


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass(frozen=True)
class EnsembleRunConfig:
    n_samples: int = 100_000
    seed: int = 0
    dt: float = 1e-3
    t_max: float = 4.0
    output_stride: int = 50

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("ensemble.n_samples must be >= 1")
        if not self.dt > 0:
            raise ConfigError("ensemble.dt must be positive")
        if not self.t_max >= 0:
            raise ConfigError("ensemble.t_max must be >= 0")
        if self.output_stride < 1:
            raise ConfigError("ensemble.output_stride must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("ensemble.seed must be an unsigned 64-bit integer")

    @property
    def n_records(self) -> int:
        """Number of output strides after ``t = 0``."""
        return int(round(self.t_max / (self.dt * self.output_stride)))


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    model: ModelParams = field(default_factory=ModelParams.quartic)
    spec: GaussianSpec = field(default_factory=lambda: GaussianSpec.coherent(0.05))
    grid: GridSpec = field(default_factory=GridSpec)
    ensemble: EnsembleRunConfig = field(default_factory=EnsembleRunConfig)
    out_dir: str = "."

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.grid.hbar != self.spec.hbar:
            raise ConfigError(f"grid.hbar {self.grid.hbar} differs from state.hbar {self.spec.hbar}")
        if self.experiment == "break-analysis" and (self.spec.r1 or self.spec.r2):
            raise ConfigError("break-analysis needs an uncorrelated state (r1 = r2 = 0)")

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, ensemble=replace(self.ensemble, seed=int(seed)))

    def with_out_dir(self, out_dir: str) -> "RunConfig":
        return replace(self, out_dir=str(out_dir))


# --- INI representation -----------------------------------------------------

def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def to_sections(cfg: RunConfig) -> dict[str, dict[str, str]]:
    m, s, g, e = cfg.model, cfg.spec, cfg.grid, cfg.ensemble
    return {
        "run": {"experiment": cfg.experiment, "out": cfg.out_dir},
        "model": {"kind": m.kind, "alpha": _fmt(m.alpha), "beta": _fmt(m.beta),
                  "omega1": _fmt(m.omega[0]), "omega2": _fmt(m.omega[1]),
                  "coupling": _fmt(m.coupling)},
        "state": {"hbar": _fmt(s.hbar), "r1": _fmt(s.r1), "r2": _fmt(s.r2),
                  "eta1": _fmt(s.eta1), "eta2": _fmt(s.eta2),
                  "q1": _fmt(s.qbar[0]), "q2": _fmt(s.qbar[1]),
                  "p1": _fmt(s.pbar[0]), "p2": _fmt(s.pbar[1])},
        "grid": {"n": str(g.n), "half_width": _fmt(g.half_width)},
        "ensemble": {"n_samples": str(e.n_samples), "seed": str(e.seed), "dt": _fmt(e.dt),
                     "t_max": _fmt(e.t_max), "output_stride": str(e.output_stride)},
    }


def to_ini(cfg: RunConfig) -> str:
    lines = []
    for section, items in to_sections(cfg).items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """Digest of the physics configuration (output directory excluded)."""
    sections = to_sections(cfg)
    del sections["run"]["out"]
    text = "\n".join(f"{s}.{k}={v}" for s, items in sections.items() for k, v in items.items())
    return hashlib.sha256(text.encode()).hexdigest()[:16]


_KNOWN = {name: set(items) for name, items in to_sections(RunConfig("moments")).items()}


def _number(section, key, text, kind):
    try:
        value = kind(text)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {text!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{section}.{key} must be finite")
    return value


def apply_ini(base: RunConfig, text: str) -> RunConfig:
    """Override fields of ``base`` with the entries of an INI document."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser[section]) - _KNOWN[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")

    def get(section, key, kind, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key).strip()
            return raw if kind is str else _number(section, key, raw, kind)
        return default

    run = {"experiment": get("run", "experiment", str, base.experiment),
           "out_dir": get("run", "out", str, base.out_dir)}
    m = base.model
    kind = get("model", "kind", str, m.kind)
    alpha = get("model", "alpha", float, m.alpha)
    beta = get("model", "beta", float, m.beta)
    omega = (get("model", "omega1", float, m.omega[0]), get("model", "omega2", float, m.omega[1]))
    coupling = get("model", "coupling", float, m.coupling)
    try:
        if kind == QUARTIC:
            model = ModelParams.quartic(alpha, beta)
        elif kind == QUADRATIC:
            model = ModelParams.quadratic(omega, coupling)
        else:
            raise ConfigError(f"model.kind must be {QUARTIC!r} or {QUADRATIC!r}, got {kind!r}")
        s = base.spec
        hbar = get("state", "hbar", float, s.hbar)
        hbar_changed = hbar != s.hbar
        # widths follow hbar unless given explicitly
        default_eta = math.sqrt(hbar / 2.0) if hbar_changed else None
        spec = GaussianSpec(
            r1=get("state", "r1", float, s.r1), r2=get("state", "r2", float, s.r2),
            eta1=get("state", "eta1", float, default_eta or s.eta1),
            eta2=get("state", "eta2", float, default_eta or s.eta2),
            qbar=(get("state", "q1", float, s.qbar[0]), get("state", "q2", float, s.qbar[1])),
            pbar=(get("state", "p1", float, s.pbar[0]), get("state", "p2", float, s.pbar[1])),
            hbar=hbar)
        g = base.grid
        grid = GridSpec(get("grid", "n", int, g.n), get("grid", "half_width", float, g.half_width), hbar)
        e = base.ensemble
        ensemble = EnsembleRunConfig(
            n_samples=get("ensemble", "n_samples", int, e.n_samples),
            seed=get("ensemble", "seed", int, e.seed), dt=get("ensemble", "dt", float, e.dt),
            t_max=get("ensemble", "t_max", float, e.t_max),
            output_stride=get("ensemble", "output_stride", int, e.output_stride))
        return RunConfig(model=model, spec=spec, grid=grid, ensemble=ensemble, **run)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_ini(text: str, experiment: str | None = None) -> RunConfig:
    """Full configuration from INI text on top of the experiment defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    exp = parser.get("run", "experiment", fallback=experiment)
    if exp is None:
        raise ConfigError("configuration names no experiment ([run] experiment = ...)")
    return apply_ini(experiment_defaults(exp), text)


# --- presets ----------------------------------------------------------------

def experiment_defaults(experiment: str, hbar: float = 0.05) -> RunConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    t_max, stride = EXPERIMENT_TIMES[experiment]
    n, L = REF_GRIDS.get(hbar, (512, 6.0))
    return RunConfig(experiment, ModelParams.quartic(), GaussianSpec.coherent(hbar),
                     GridSpec(n, L, hbar), EnsembleRunConfig(t_max=t_max, output_stride=stride))


def _r_label(r: float) -> str:
    return "r0" if r == 0 else f"r{'p' if r > 0 else 'm'}{abs(r):g}"


def preset_names() -> list[str]:
    names = [f"ref-h{h:g}-{_r_label(r)}" for h in REF_HBARS for r in REF_RS]
    return names + ["quadratic-test", "integrable"]


def preset(name: str, experiment: str) -> RunConfig:
    """Built-in configuration ``name`` for ``experiment``.

    ``ref-h<hbar>-r<0|p0.6|m0.6>`` encode the reference quartic parameter set;
    ``quadratic-test`` is a coupled harmonic model; ``integrable`` sets
    ``alpha = beta``.
    """
    if name == "quadratic-test":
        cfg = experiment_defaults(experiment, 0.05)
        return replace(cfg, model=ModelParams.quadratic((1.0, 1.3), 0.2))
    if name == "integrable":
        cfg = experiment_defaults(experiment, 0.005)
        return replace(cfg, model=ModelParams.quartic(INTEGRABLE_ALPHA, INTEGRABLE_ALPHA))
    for h in REF_HBARS:
        for r in REF_RS:
            if name == f"ref-h{h:g}-{_r_label(r)}":
                cfg = experiment_defaults(experiment, h)
                return replace(cfg, spec=GaussianSpec.coherent(h, r=(r, r)))
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}")


DEFAULT_PRESET = {
    "structure-compare": "ref-h0.05-r0",
    "break-analysis": "ref-h0.05-r0",
    "moments": "ref-h0.005-r0",
    "initial-slope": "ref-h0.5-rp0.6",
    "integrable-contrast": "integrable",
}


def resolve(experiment: str, preset_name: str | None = None, config_text: str | None = None,
            seed: int | None = None, out_dir: str | None = None) -> RunConfig:
    """Layer preset, configuration file and command-line overrides."""
    cfg = preset(preset_name or DEFAULT_PRESET[experiment], experiment)
    if config_text is not None:
        cfg = apply_ini(cfg, config_text)
        if cfg.experiment != experiment:
            raise ConfigError(f"configuration is for {cfg.experiment!r}, not {experiment!r}")
    if seed is not None:
        cfg = cfg.with_seed(seed)
    if out_dir is not None:
        cfg = cfg.with_out_dir(out_dir)
    return cfg
