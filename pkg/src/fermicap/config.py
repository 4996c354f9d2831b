"""Plain-text experiment configuration.

The format is lines of ``key = value`` grouped under ``[section]`` headers.
``#`` starts a comment anywhere on a line, blank lines are ignored.  Floats
are written back with ``repr``, so a parse/serialize round trip reproduces
every value bit for bit.

Sections and keys are validated against a fixed schema; unknown names,
duplicate keys and malformed values are reported with their line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from .caps import CapSpec
from .potentials import InteractionSpec, PotentialSpec, PulseSpec


class ConfigError(ValueError):
    """Malformed or inconsistent configuration text."""


_REQUIRED = object()


@dataclass(frozen=True)
class GridSpec:
    x_max: float
    n_points: int
    x_offset: float = 0.0


@dataclass(frozen=True)
class PulseConfig:
    e0: float
    omega: float
    n_cycles: float

    def to_spec(self) -> PulseSpec:
        return PulseSpec.from_cycles(self.e0, self.omega, self.n_cycles)


@dataclass(frozen=True)
class OrbitalSpec:
    """One orbital of a two-orbital product initial state.

    ``well_modes`` takes equal-weight superpositions of bound modes of the
    static potential (``phase`` multiplies the last listed mode as
    exp(i*phase)); ``gaussian`` is a moving Gaussian packet.
    """

    kind: str = "well_modes"
    modes: tuple[int, ...] = (0,)
    phase: float = 0.0
    x_c: float = 0.0
    k0: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("well_modes", "gaussian"):
            raise ValueError(f"unknown orbital kind {self.kind!r}")


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    exchange_sign: int
    m_s: int = 0
    a: OrbitalSpec = field(default_factory=OrbitalSpec)
    b: OrbitalSpec = field(default_factory=OrbitalSpec)

    def __post_init__(self):
        if self.kind not in ("slater", "ground_state"):
            raise ValueError(f"unknown initial state kind {self.kind!r}")
        if self.exchange_sign not in (-1, 1):
            raise ValueError("exchange_sign must be +1 or -1")


@dataclass(frozen=True)
class PropagationSpec:
    dt: float
    t_end: float
    itp_dt: float = 0.02
    itp_tol: float = 1e-11
    itp_max_iter: int = 200_000

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")


@dataclass(frozen=True)
class OutputSpec:
    output_dt: float = 0.25
    snapshot_every: int = 20
    snapshot_matrices: bool = False
    eigen_check: bool = True
    hard_bound: float = 1e-4


@dataclass(frozen=True)
class ReferenceSpec:
    enlarge: int = 2
    t_end: float = 0.0  # 0 means: use propagation.t_end


@dataclass(frozen=True)
class SweepSpec:
    key: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    potential: PotentialSpec
    interaction: InteractionSpec
    cap: CapSpec
    initial: InitialSpec
    propagation: PropagationSpec
    output: OutputSpec = field(default_factory=OutputSpec)
    pulse: PulseConfig | None = None
    reference: ReferenceSpec | None = None
    sweep: SweepSpec | None = None


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(","))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(","))


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONVERT = {"float": float, "int": int, "str": str, "bool": _bool,
            "ints": _ints, "floats": _floats}

# section -> key -> (type name, default or _REQUIRED)
_SCHEMA = {
    "grid": {
        "x_max": ("float", _REQUIRED),
        "n_points": ("int", _REQUIRED),
        "x_offset": ("float", 0.0),
    },
    "potential": {
        "kind": ("str", _REQUIRED),
        "v0": ("float", 0.0),
        "x0": ("float", 0.0),
        "sigma": ("float", 1.0),
        "z": ("float", 0.0),
        "delta_n_sq": ("float", 1.0),
    },
    "interaction": {
        "lambda": ("float", 0.0),
        "delta_c": ("float", 1.0),
    },
    "cap": {
        "kind": ("str", _REQUIRED),
        "strength": ("float", 0.0),
        "order": ("int", 3),
        "x_t": ("float", None),
        "delta": ("float", None),
        "k_min": ("float", None),
    },
    "pulse": {
        "e0": ("float", _REQUIRED),
        "omega": ("float", _REQUIRED),
        "n_cycles": ("float", _REQUIRED),
    },
    "initial": {
        "kind": ("str", _REQUIRED),
        "exchange_sign": ("int", _REQUIRED),
        "m_s": ("int", 0),
        "a_kind": ("str", "well_modes"),
        "a_modes": ("ints", (0,)),
        "a_phase": ("float", 0.0),
        "a_x_c": ("float", 0.0),
        "a_k0": ("float", 0.0),
        "a_width": ("float", 1.0),
        "b_kind": ("str", "well_modes"),
        "b_modes": ("ints", (0,)),
        "b_phase": ("float", 0.0),
        "b_x_c": ("float", 0.0),
        "b_k0": ("float", 0.0),
        "b_width": ("float", 1.0),
    },
    "propagation": {
        "dt": ("float", _REQUIRED),
        "t_end": ("float", _REQUIRED),
        "itp_dt": ("float", 0.02),
        "itp_tol": ("float", 1e-11),
        "itp_max_iter": ("int", 200_000),
    },
    "output": {
        "output_dt": ("float", 0.25),
        "snapshot_every": ("int", 20),
        "snapshot_matrices": ("bool", False),
        "eigen_check": ("bool", True),
        "hard_bound": ("float", 1e-4),
    },
    "reference": {
        "enlarge": ("int", 2),
        "t_end": ("float", 0.0),
    },
    "sweep": {
        "key": ("str", _REQUIRED),
        "values": ("floats", _REQUIRED),
    },
}

_REQUIRED_SECTIONS = ("grid", "potential", "cap", "initial", "propagation")
_OPTIONAL_SECTIONS = ("interaction", "output", "pulse", "reference", "sweep")


def parse_raw(text: str) -> dict[str, dict[str, str]]:
    """Split config text into {section: {key: value-string}}; syntax only."""
    sections: dict[str, dict[str, str]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"line {lineno}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA[current]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{current}]")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current}]")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        sections[current][key] = value
        _LINE_INFO[(current, key)] = lineno
    return sections


# populated during parse_raw for error messages in the typing pass
_LINE_INFO: dict[tuple[str, str], int] = {}


def _typed_section(name: str, raw: dict[str, dict[str, str]]) -> dict | None:
    if name not in raw:
        if name in _REQUIRED_SECTIONS:
            raise ConfigError(f"missing required section [{name}]")
        return None
    out = {}
    for key, (type_name, default) in _SCHEMA[name].items():
        if key in raw[name]:
            text = raw[name][key]
            try:
                out[key] = _CONVERT[type_name](text)
            except ValueError as exc:
                lineno = _LINE_INFO.get((name, key), "?")
                raise ConfigError(
                    f"line {lineno}: bad {type_name} for [{name}] {key}: "
                    f"{text!r}") from exc
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r} in [{name}]")
        else:
            out[key] = default
    return out


def _orbital(sec: dict, prefix: str) -> OrbitalSpec:
    return OrbitalSpec(kind=sec[f"{prefix}_kind"],
                       modes=sec[f"{prefix}_modes"],
                       phase=sec[f"{prefix}_phase"],
                       x_c=sec[f"{prefix}_x_c"],
                       k0=sec[f"{prefix}_k0"],
                       width=sec[f"{prefix}_width"])


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text into a typed tree."""
    _LINE_INFO.clear()
    raw = parse_raw(text)
    missing = [name for name in _REQUIRED_SECTIONS if name not in raw]
    if missing:
        details = "; ".join(
            f"[{name}] needs " + ", ".join(
                key for key, (_, default) in _SCHEMA[name].items()
                if default is _REQUIRED)
            for name in missing)
        raise ConfigError(f"missing required sections: {details}")
    sec = {name: _typed_section(name, raw)
           for name in (*_REQUIRED_SECTIONS, *_OPTIONAL_SECTIONS)}
    try:
        grid = GridSpec(**sec["grid"])
        potential = PotentialSpec(**sec["potential"])
        inter = (InteractionSpec(lam=sec["interaction"]["lambda"],
                                 delta_c=sec["interaction"]["delta_c"])
                 if sec["interaction"] else InteractionSpec())
        cap = CapSpec(**sec["cap"])
        init = InitialSpec(kind=sec["initial"]["kind"],
                           exchange_sign=sec["initial"]["exchange_sign"],
                           m_s=sec["initial"]["m_s"],
                           a=_orbital(sec["initial"], "a"),
                           b=_orbital(sec["initial"], "b"))
        prop = PropagationSpec(**sec["propagation"])
        output = OutputSpec(**sec["output"]) if sec["output"] else OutputSpec()
        pulse = PulseConfig(**sec["pulse"]) if sec["pulse"] else None
        ref = ReferenceSpec(**sec["reference"]) if sec["reference"] else None
        sweep = SweepSpec(key=sec["sweep"]["key"],
                          values=sec["sweep"]["values"]) if sec["sweep"] else None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(grid, potential, inter, cap, init, prop,
                            output, pulse, ref, sweep)


def _format_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, tuple):
        return ",".join(_format_value(v) for v in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def _emit(lines: list[str], name: str, values: dict) -> None:
    lines.append(f"[{name}]")
    for key, val in values.items():
        if val is None:
            continue
        lines.append(f"{key} = {_format_value(val)}")
    lines.append("")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; floats keep full precision via repr."""
    def plain(obj, rename=()):
        d = {}
        for f in dc_fields(obj):
            name = dict(rename).get(f.name, f.name)
            d[name] = getattr(obj, f.name)
        return d

    lines: list[str] = []
    _emit(lines, "grid", plain(cfg.grid))
    _emit(lines, "potential", plain(cfg.potential))
    _emit(lines, "interaction", plain(cfg.interaction, rename=(("lam", "lambda"),)))
    _emit(lines, "cap", plain(cfg.cap))
    if cfg.pulse is not None:
        _emit(lines, "pulse", plain(cfg.pulse))
    init = {"kind": cfg.initial.kind, "exchange_sign": cfg.initial.exchange_sign,
            "m_s": cfg.initial.m_s}
    for prefix, orb in (("a", cfg.initial.a), ("b", cfg.initial.b)):
        for f in dc_fields(orb):
            init[f"{prefix}_{f.name}"] = getattr(orb, f.name)
    _emit(lines, "initial", init)
    _emit(lines, "propagation", plain(cfg.propagation))
    _emit(lines, "output", plain(cfg.output))
    if cfg.reference is not None:
        _emit(lines, "reference", plain(cfg.reference))
    if cfg.sweep is not None:
        _emit(lines, "sweep", plain(cfg.sweep))
    return "\n".join(lines)


def apply_overrides(text: str, overrides) -> str:
    """Apply ``section.key=value`` overrides to config text.

    The text is reduced to its key-value content, the overrides are merged
    in, and the result is regenerated (comments are dropped), so overridden
    configs pass through exactly the same validation as files do.
    """
    raw = parse_raw(text)
    for item in overrides:
        path, eq, value = item.partition("=")
        section, dot, key = path.strip().partition(".")
        if not eq or not dot or not key or not value.strip():
            raise ConfigError(
                f"override must look like section.key=value: {item!r}")
        if section not in _SCHEMA:
            raise ConfigError(f"override names unknown section [{section}]")
        if key not in _SCHEMA[section]:
            raise ConfigError(f"override names unknown key {key!r} in [{section}]")
        raw.setdefault(section, {})[key] = value.strip()
    lines: list[str] = []
    for name in (*_REQUIRED_SECTIONS, *_OPTIONAL_SECTIONS):
        if name in raw:
            _emit(lines, name, raw[name])
    return "\n".join(lines)


def load_config(path, overrides=()) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if overrides:
        text = apply_overrides(text, overrides)
    return parse_config(text)


def grid_from_config(cfg: ExperimentConfig):
    from .grid import make_grid
    return make_grid(cfg.grid.x_max, cfg.grid.n_points, cfg.grid.x_offset)


def bundled_config_path(name: str):
    """Path of a config shipped with the package (name without .cfg)."""
    from importlib.resources import files
    path = files("fermicap") / "configs" / f"{name}.cfg"
    if not path.is_file():
        have = sorted(p.name for p in (files("fermicap") / "configs").iterdir())
        raise FileNotFoundError(f"no bundled config {name!r}; have {have}")
    return path


def pulse_duration(cfg: ExperimentConfig) -> float:
    if cfg.pulse is None:
        return 0.0
    return cfg.pulse.n_cycles * 2.0 * np.pi / cfg.pulse.omega
