"""Line-oriented experiment configuration.

One setting per line, ``section.key = value``; ``#`` starts a comment. Every
experiment kind has its own schema of allowed keys with documented defaults.
Unknown sections or keys, type mismatches and missing required keys raise
:class:`ConfigError` carrying the offending line number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["ConfigError", "ExperimentConfig", "Field", "KINDS", "SCHEMAS", "parse_config",
           "render", "quick_overrides"]

REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration text; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class Field:
    type: type
    default: object = None
    doc: str = ""


def _common():
    return {
        "experiment.kind": Field(str, REQUIRED, "experiment kind"),
        "experiment.seed": Field(int, REQUIRED, "seed of every random stream"),
        "experiment.label": Field(str, None, "free-form label echoed in the report"),
        "output.dir": Field(str, ".", "directory for CSV and report files"),
        "output.prefix": Field(str, None, "file name prefix; defaults to the kind"),
    }


_SQRT2PI = math.sqrt(2 * math.pi)


def _spin_model(theta0, zeta):
    return {
        "model.theta0": Field(float, theta0, "half of the total rotation angle"),
        "model.d": Field(float, 1.0, "width of the rotation region"),
        "model.zeta": Field(float, zeta, "non-adiabaticity; exclusive with model.B"),
        "model.B": Field(float, None, "field magnitude; exclusive with model.zeta"),
        "model.M": Field(float, 1.0, "particle mass"),
        "model.mu": Field(float, 1.0, "magnetic moment"),
    }


SCHEMAS: dict[str, dict[str, Field]] = {
    "spin_reflection": {
        **_spin_model(20 * _SQRT2PI, 2.0),
        "packet.x0": Field(float, -3.5),
        "packet.p0": Field(float, 20.0),
        "packet.sigma_x": Field(float, 0.25),
        "numerics.grid_n": Field(int, 4096, "grid points, power of two"),
        "numerics.grid_min": Field(float, -8.0),
        "numerics.grid_max": Field(float, 8.0),
        "numerics.dt_exact": Field(float, 2e-5, "split-operator step"),
        "numerics.dt": Field(float, None, "trajectory step; default from the length and momentum scales"),
        "numerics.T": Field(float, 0.5, "long enough for the packet to return past x0"),
        "numerics.samples": Field(int, 1000),
        "numerics.record_dt": Field(float, 0.005),
        "tolerance.traversal_fraction": Field(float, 0.02, "max |<x>_exact - <x>_mboa| over the path length"),
        "tolerance.reflection_margin": Field(float, 0.5, "final <x> must stay below x0 + margin*d"),
    },
    "spin_trapping": {
        **_spin_model(20 * _SQRT2PI, 2.0),
        "packet.x0": Field(float, 0.0),
        "packet.p0": Field(float, 0.0),
        "packet.sigma_x": Field(float, 0.1),
        "numerics.grid_n": Field(int, 4096),
        "numerics.grid_min": Field(float, -16.0),
        "numerics.grid_max": Field(float, 16.0),
        "numerics.dt_exact": Field(float, 2e-5),
        "numerics.T": Field(float, 1.0),
        "numerics.record_dt": Field(float, 0.01),
        "numerics.mask_width": Field(float, 4.0, "absorbing layer width at each edge"),
        "numerics.mask_rate": Field(float, 200.0, "absorption rate at the edge"),
        "numerics.quadrature_nodes": Field(int, 96),
        "numerics.samples": Field(int, 100000, "Monte-Carlo cross-check of the quadrature"),
        "tolerance.plateau_abs": Field(float, 0.05, "|plateau - semiclassical estimate|"),
        "tolerance.plateau_fraction": Field(float, 0.2, "trailing fraction of the run averaged as plateau"),
        "tolerance.quadrature_vs_montecarlo": Field(float, 1e-3),
    },
    "spin_interference": {
        "model.dtheta": Field(float, 1.0, "constant rotation rate"),
        "model.tan_phi": Field(float, 1.0, "tilt at p0; exclusive with model.B"),
        "model.B": Field(float, None, "field magnitude; exclusive with model.tan_phi"),
        "model.M": Field(float, 1.0),
        "model.mu": Field(float, 1.0),
        "packet.x0": Field(float, -50.0),
        "packet.p0": Field(float, 2.0 / 3.0),
        "packet.sigma_x": Field(float, 7.5),
        "numerics.grid_n": Field(int, 8192),
        "numerics.grid_turns": Field(int, 48, "box length in units of 2 pi / dtheta, keeps the field periodic"),
        "numerics.dt_exact": Field(float, 0.01),
        "numerics.dt": Field(float, 0.05),
        "numerics.T": Field(float, 80.0),
        "numerics.samples": Field(int, 4000),
        "numerics.record_dt": Field(float, 0.1),
        "tolerance.frequency_rel": Field(float, 0.02, "fitted frequency against the gap at p0"),
        "tolerance.rms_fraction": Field(float, 0.05, "RMS(mboa - exact) over the oscillation amplitude"),
        "tolerance.long_time_rel": Field(float, 0.02, "tail mean against p0 - dtheta sin(2 phi)/4"),
        "tolerance.overlap_T": Field(float, None, "overlap window; default 4 sigma_x M / (dtheta sin phi)"),
        "tolerance.tail_fraction": Field(float, 0.2),
    },
    "spin_twa_fluctuations": {
        **_spin_model(50.5, 2.5),
        "packet.x0": Field(float, -3.25),
        "packet.p0": Field(float, 50.5 / _SQRT2PI),
        "packet.sigma_x": Field(float, 0.25),
        "numerics.grid_n": Field(int, 4096),
        "numerics.grid_min": Field(float, -8.0),
        "numerics.grid_max": Field(float, 8.0),
        "numerics.dt_exact": Field(float, 2e-5),
        "numerics.dt": Field(float, 2e-5),
        "numerics.T": Field(float, 0.35),
        "numerics.samples": Field(int, 500),
        "numerics.record_dt": Field(float, 0.005),
        "numerics.lab_frame": Field(bool, True, "also run the lab-frame TWA"),
        "tolerance.margin": Field(float, 0.0, "required RMS advantage of the spin-1/2 moving TWA"),
    },
    "bell_protocol": {
        "model.B0": Field(float, 10.0),
        "model.dtheta0": Field(float, 1.0),
        "model.dB_width": Field(float, 1.0),
        "model.dtheta_width": Field(float, 1.0),
        "model.xB0": Field(float, 1.0),
        "model.xtheta0": Field(float, -1.0),
        "model.M": Field(float, 1.0),
        "model.mu": Field(float, 1.0),
        "packet.x0": Field(float, -6.0),
        "packet.p0": Field(float, 0.25),
        "numerics.dt": Field(float, 0.01),
        "numerics.T": Field(float, 48.0),
        "numerics.record_every": Field(int, 10),
        "tolerance.fidelity": Field(float, 0.99),
        "tolerance.entropy": Field(float, 0.99, "bits"),
        "tolerance.ratio_min": Field(float, 2.0, "outgoing dtheta/p"),
    },
    "squeezing_ground_state": {
        "model.N": Field(int, 20),
        "model.chi": Field(float, 40.0),
        "model.dtheta": Field(float, 1.0),
        "model.M": Field(float, 1.0),
        "model.mu": Field(float, 1.0),
        "packet.p0": Field(float, 0.0),
        "numerics.N_max": Field(int, 80),
        "numerics.N_step": Field(int, 10),
        "tolerance.ratio_rel": Field(float, 0.10, "dSx/dSy against 1/sqrt(1+chi)"),
    },
    "entanglement_diagram": {
        "numerics.phi_points": Field(int, 21),
        "numerics.ratio_max": Field(float, 4.0),
        "numerics.ratio_points": Field(int, 21),
        "tolerance.lower_left_max": Field(float, 0.05),
        "tolerance.upper_right_min": Field(float, 0.95),
    },
    "piston_oscillation": {
        "model.N": Field(int, 2000),
        "model.kappa_ratio": Field(float, 2.0 / 15.0, "kappa/M with kappa = m N / 3; exclusive with model.M"),
        "model.M": Field(float, None),
        "model.m": Field(float, 1.0),
        "model.k": Field(float, 1.0),
        "model.beta0": Field(float, 1.0),
        "model.displacement": Field(float, 1.75, "x(0) in units of x*(beta0)"),
        "numerics.periods": Field(float, 5.0, "run length in predicted dressed periods"),
        "numerics.record_every": Field(int, 1, "record every n-th collision"),
        "numerics.period_check": Field(bool, True, "hold the period ratio to tolerance.period_rel; else report only"),
        "numerics.entropy": Field(bool, True),
        "numerics.fluctuations": Field(bool, False),
        "numerics.window_start": Field(float, 1.0, "fluctuation window start, in periods"),
        "numerics.batches": Field(int, 20),
        "numerics.speed_fraction": Field(float, 0.9),
        "tolerance.period_rel": Field(float, 0.01, "T/T_BO against sqrt(1+kappa/M)"),
        "tolerance.conservation": Field(float, 1e-9, "per-event energy and canonical momentum"),
        "tolerance.entropy_ratio": Field(float, 10.0, "S_lab swing over S_moving drift per period"),
        "tolerance.q_mean_se": Field(float, 3.0, "standard errors"),
        "tolerance.var_rel": Field(float, 0.2),
    },
    "piston_snapshot": {
        "model.N": Field(int, 4000),
        "model.mass_ratio": Field(float, 5.0, "M/(m N); exclusive with model.M"),
        "model.M": Field(float, None),
        "model.m": Field(float, 1.0),
        "model.k": Field(float, 1.0),
        "model.beta0": Field(float, 1.0),
        "model.displacement": Field(float, 1.75),
        "numerics.snapshots": Field(int, 8, "instants of maximal piston speed"),
        "tolerance.slope_rel": Field(float, 0.15),
    },
    "dressing_identities": {
        **_spin_model(20 * _SQRT2PI, 2.0),
        "model.N": Field(int, 1, "1 for a single spin-1/2, otherwise collective"),
        "numerics.samples": Field(int, 1000),
        "numerics.eigen_samples": Field(int, 10000),
        "numerics.x_range": Field(float, 3.0),
        "numerics.p_range": Field(float, 30.0),
        "tolerance.identity": Field(float, 1e-12, "relative to the symbol magnitude"),
        "tolerance.eigen": Field(float, 1e-12),
    },
}

SCHEMAS = {_k: {**_common(), **_v} for _k, _v in SCHEMAS.items()}

KINDS = tuple(SCHEMAS)

EXCLUSIVE = [("model.zeta", "model.B"), ("model.tan_phi", "model.B"),
             ("model.kappa_ratio", "model.M"), ("model.mass_ratio", "model.M")]

_QUICK = {
    "spin_reflection": {"numerics.samples": 200},
    "spin_trapping": {"numerics.T": 0.4, "numerics.samples": 10000},
    "spin_interference": {"numerics.samples": 400},
    "spin_twa_fluctuations": {"numerics.samples": 50, "numerics.lab_frame": False},
    "bell_protocol": {},
    "squeezing_ground_state": {"numerics.N_max": 40},
    "entanglement_diagram": {"numerics.phi_points": 11, "numerics.ratio_points": 11},
    "piston_oscillation": {"numerics.periods": 4.0},
    "piston_snapshot": {"model.N": 1000, "numerics.snapshots": 4},
    "dressing_identities": {"numerics.samples": 100, "numerics.eigen_samples": 1000},
}


def quick_overrides(kind: str) -> dict:
    """Reduced-cost settings used by ``--quick``."""
    return dict(_QUICK[kind])


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration.

    ``values`` maps every schema key to its value (``None`` when unset and
    optional); ``defaulted`` lists keys filled from the schema.
    """

    kind: str
    seed: int
    values: dict
    defaulted: tuple = field(default=(), compare=False)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}

    def with_overrides(self, **updates) -> "ExperimentConfig":
        """Copy with ``section.key`` values replaced (keys written with ``__`` for the dot)."""
        vals = dict(self.values)
        for k, v in updates.items():
            key = k.replace("__", ".")
            if key not in SCHEMAS[self.kind]:
                raise ConfigError(f"unknown key {key!r} for kind {self.kind!r}")
            vals[key] = _coerce(SCHEMAS[self.kind][key], v, key, 0)
            for a, b in EXCLUSIVE:
                partner = b if key == a else a
                if key in (a, b) and partner in SCHEMAS[self.kind]:
                    vals[partner] = None
        return ExperimentConfig(self.kind, int(vals["experiment.seed"]), vals, self.defaulted)


def _coerce(f: Field, raw, key, line):
    if not isinstance(raw, str):
        if f.type is float and isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return float(raw)
        if isinstance(raw, f.type):
            return raw
        raise ConfigError(f"{key}: expected {f.type.__name__}, got {raw!r}", line)
    text = raw.strip()
    try:
        if f.type is bool:
            low = text.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError
        if f.type is int:
            return int(text)
        if f.type is float:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError
            return v
        if not text:
            raise ValueError
        return text
    except ValueError:
        raise ConfigError(f"{key}: expected {f.type.__name__}, got {text!r}", line) from None


def _lex(text: str):
    entries = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", no)
        key, value = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1 or not all(key.split(".")):
            raise ConfigError(f"key {key!r} must have the form section.key", no)
        entries.append((no, key, value))
    return entries


def _check_consistency(vals, lines, explicit):
    for a, b in EXCLUSIVE:
        if a in vals and b in vals and a in explicit and b in explicit \
                and vals[a] is not None and vals[b] is not None:
            raise ConfigError(f"{a} and {b} over-determine the model; set only one",
                              max(lines.get(a, 0), lines.get(b, 0)))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text."""
    entries = _lex(text)
    last = max((no for no, _, _ in entries), default=0)
    seen: dict[str, int] = {}
    for no, key, _ in entries:
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", no)
        seen[key] = no
    raw = {key: (no, value) for no, key, value in entries}
    if "experiment.kind" not in raw:
        raise ConfigError("missing key 'experiment.kind'", last)
    kno, kind = raw["experiment.kind"]
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}", kno)
    schema = SCHEMAS[kind]
    sections = {k.split(".")[0] for k in schema}
    vals = {}
    for key, (no, value) in raw.items():
        sec = key.split(".")[0]
        if sec not in sections:
            raise ConfigError(f"unknown section {sec!r}", no)
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for kind {kind!r}", no)
        vals[key] = _coerce(schema[key], value, key, no)
    _check_consistency(vals, {k: raw[k][0] for k in raw}, explicit=set(raw))
    defaulted = []
    for key, f in schema.items():
        if key in vals:
            continue
        if f.default is REQUIRED:
            raise ConfigError(f"missing key {key!r}", last)
        # an explicit partner of an exclusive pair suppresses the other default
        partner = [b if a == key else a for a, b in EXCLUSIVE if key in (a, b)]
        if any(p in raw for p in partner if p in schema):
            vals[key] = None
            continue
        vals[key] = f.default
        if f.default is not None:
            defaulted.append(key)
    if vals.get("output.prefix") is None:
        vals["output.prefix"] = kind
    ordered = {k: vals[k] for k in schema}
    return ExperimentConfig(kind, int(ordered["experiment.seed"]), ordered, tuple(defaulted))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(config: ExperimentConfig, docs: bool = True) -> str:
    """Configuration text that parses back to ``config``; unset optional keys are omitted."""
    schema = SCHEMAS[config.kind]
    out = []
    current = None
    for key, f in schema.items():
        v = config.values.get(key)
        if v is None:
            continue
        sec = key.split(".")[0]
        if sec != current:
            if out:
                out.append("")
            current = sec
        line = f"{key} = {_fmt(v)}"
        if docs and f.doc:
            line += f"  # {f.doc}"
        out.append(line)
    return "\n".join(out) + "\n"
