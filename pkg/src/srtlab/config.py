"""Strict experiment configuration: INI text, validated and fully defaulted.

Example::

    [law]
    family = pareto
    alpha = 0.7

    [grid]
    x_list = 2^12..2^22

Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import copy
import math
import re
from dataclasses import dataclass, field

from .errors import ConfigError

FAMILIES = ("pareto", "uao", "twosided", "half", "finite", "smooth")
L_KINDS = ("constant", "log-power", "reciprocal-log")
CRITERIA_NAMES = ("doney", "chi", "ns-density", "ns-interval", "ns-twosided", "half", "smoothness")
PROBE_NAMES = ("lemma41", "lemma42", "lemma51", "necessity", "bigjump", "llt", "small-n")
MC_TARGETS = ("renewal", "event", "tail")

# section -> key -> (kind, default)
SCHEMA = {
    "law": {
        "family": ("str", "pareto"),
        "alpha": ("float", 0.5),
        "h": ("float", 1.0),
        "L": ("str", "constant"),
        "L_beta": ("float", 1.0),
        "K_table": ("int", 1 << 16),
        "n_max": ("int", None),
        "masses": ("floats", None),
        "k_min": ("int", 0),
        "eps": ("float", 0.1),
        "z_seq": ("floats", None),
        "eps_seq": ("floats", None),
        "tail_window": ("floats", None),
    },
    "grid": {
        "eta_list": ("floats", [0.4, 0.2, 0.1, 0.05]),
        "x_list": ("floats", [2.0 ** j for j in range(12, 23)]),
        "delta_list": ("floats", [0.4, 0.2, 0.1, 0.05]),
    },
    "renewal": {
        "K": ("int", 100_000),
        "method": ("str", "fast"),
        "N_max": ("int", 4096),
        "ratio_points": ("int", 400),
    },
    "criteria": {
        "select": ("names", ["ns-density", "ns-interval", "doney"]),
        "T": ("float", 0.0),
        "x_max": ("float", 2.0 ** 22),
        "eps": ("float", 0.1),
    },
    "probe": {
        "select": ("names", ["necessity"]),
        "x": ("float", 2.0 ** 14),
        "ell": ("int", 0),
        "m": ("int", 2),
        "w": ("float", 1.0),
        "n_list": ("floats", [64.0, 256.0, 1024.0]),
        "z": ("float", 1024.0),
    },
    "mc": {
        "target": ("str", "renewal"),
        "x": ("float", 1024.0),
        "w": ("float", 1.0),
        "n": ("int", 2),
        "k": ("int", None),
        "xi": ("float", None),
        "n_walks": ("int", 20_000),
        "batches": ("int", 16),
    },
    "run": {
        "seed": ("int", 0),
        "threads": ("int", 1),
        "out": ("str", "out"),
        "cache": ("str", None),
    },
}

_POW = re.compile(r"^\s*([0-9.eE+-]+)\s*\^\s*([0-9.eE+-]+)\s*$")


def parse_number(text: str) -> float:
    """Float with optional 'b^e' power notation."""
    m = _POW.match(text)
    try:
        if m:
            return float(m.group(1)) ** float(m.group(2))
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_list(text: str) -> list[float]:
    """Comma list of numbers, or 'b^i..b^j' for the powers b^i, ..., b^j."""
    text = text.strip()
    if ".." in text and "," not in text:
        lo, hi = (t.strip() for t in text.split("..", 1))
        a, b = _POW.match(lo), _POW.match(hi)
        if not a or not b or a.group(1) != b.group(1):
            raise ConfigError(f"range {text!r} must look like 2^12..2^22")
        base = float(a.group(1))
        i, j = int(float(a.group(2))), int(float(b.group(2)))
        if j < i:
            raise ConfigError(f"empty range {text!r}")
        return [base ** e for e in range(i, j + 1)]
    return [parse_number(t) for t in text.split(",") if t.strip()]


def _convert(section: str, key: str, kind: str, raw: str):
    try:
        if kind == "str":
            return raw.strip()
        if kind == "int":
            v = parse_number(raw)
            if v != int(v):
                raise ConfigError(f"[{section}] {key} must be an integer")
            return int(v)
        if kind == "float":
            return parse_number(raw)
        if kind == "floats":
            return parse_list(raw)
        if kind == "names":
            return [t.strip() for t in raw.split(",") if t.strip()]
    except ConfigError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None
    raise AssertionError(kind)


@dataclass
class ExperimentConfig:
    law: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    renewal: dict = field(default_factory=dict)
    criteria: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return getattr(self, name)

    def to_text(self) -> str:
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for key in keys:
                v = self.section(sec).get(key)
                if v is None:
                    continue
                if isinstance(v, list):
                    v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
                lines.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
            lines.append("")
        return "\n".join(lines)


def defaults() -> ExperimentConfig:
    return ExperimentConfig(**{sec: {k: copy.deepcopy(d) for k, (_, d) in keys.items()}
                               for sec, keys in SCHEMA.items()})


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    law = cfg.law
    if law["family"] not in FAMILIES:
        raise ConfigError(f"[law] family must be one of {FAMILIES}, got {law['family']!r}")
    if not 0 < law["alpha"] < 1:
        raise ConfigError(f"[law] alpha must lie in (0,1), got {law['alpha']!r}")
    if law["L"] not in L_KINDS:
        raise ConfigError(f"[law] L must be one of {L_KINDS}")
    if not law["h"] > 0:
        raise ConfigError("[law] h must be positive")
    if law["family"] == "finite" and not law["masses"]:
        raise ConfigError("[law] finite family needs masses")
    if law["family"] == "twosided" and not law["alpha"] < 0.5:
        raise ConfigError("[law] twosided family needs alpha < 1/2")
    if law["family"] == "half" and law["alpha"] != 0.5:
        raise ConfigError("[law] half family has alpha = 0.5")
    etas = cfg.grid["eta_list"]
    if any(not 0 < e < 1 for e in etas) or any(b >= a for a, b in zip(etas, etas[1:])):
        raise ConfigError("[grid] eta_list must be strictly decreasing inside (0,1)")
    if len(cfg.grid["x_list"]) < 3 or any(x < 1 for x in cfg.grid["x_list"]):
        raise ConfigError("[grid] x_list needs at least 3 points >= 1")
    if any(not 0 < d <= 1 for d in cfg.grid["delta_list"]):
        raise ConfigError("[grid] delta_list entries must lie in (0,1]")
    if cfg.renewal["method"] not in ("fast", "recursion"):
        raise ConfigError("[renewal] method must be fast or recursion")
    if cfg.renewal["K"] < 1:
        raise ConfigError("[renewal] K must be positive")
    for name in cfg.criteria["select"]:
        if name not in CRITERIA_NAMES:
            raise ConfigError(f"[criteria] unknown criterion {name!r}; choose from {CRITERIA_NAMES}")
    for name in cfg.probe["select"]:
        if name not in PROBE_NAMES:
            raise ConfigError(f"[probe] unknown probe {name!r}; choose from {PROBE_NAMES}")
    if cfg.mc["target"] not in MC_TARGETS:
        raise ConfigError(f"[mc] target must be one of {MC_TARGETS}")
    if cfg.mc["n_walks"] < 16 or cfg.mc["batches"] < 16:
        raise ConfigError("[mc] needs n_walks >= 16 and batches >= 16")
    if cfg.run["threads"] < 1:
        raise ConfigError("[run] threads must be >= 1")
    return cfg


def apply_text(cfg: ExperimentConfig, text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"),
                                       strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            cfg.section(sec)[key] = _convert(sec, key, SCHEMA[sec][key][0], raw)
    return cfg


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate(apply_text(base or defaults(), text, str(path)))


# -- presets ------------------------------------------------------------------------------


def _uao_sequences(n_top: int = 50):
    z = [2.0 ** n - 1.0 for n in range(1, n_top + 1)]
    eps = [math.log(2.0) / math.log1p(2.0 ** n) for n in range(1, n_top + 1)]
    return z, eps


def _preset_text(name: str, opts: dict) -> str:
    a = opts.get("alpha")
    if name == "pareto":
        alpha = float(a) if a is not None else 0.5
        sel = "ns-density,ns-interval,doney" + (",chi,smoothness" if alpha <= 0.5 else "")
        return (f"[law]\nfamily = pareto\nalpha = {alpha!r}\nh = {opts.get('h', '1')}\n"
                f"[criteria]\nselect = {sel}\nT = 1\n"
                f"[probe]\nselect = necessity,small-n\nx = 2^16\n")
    if name == "uao":
        return ("[law]\nfamily = uao\nalpha = 0.5\nL = reciprocal-log\n"
                "tail_window = 1099511627776,4503599627370496\n"
                "[grid]\nx_list = 2^12..2^25\n"
                "[criteria]\nselect = doney,ns-density,half\nx_max = 2^30\n"
                "[probe]\nselect = necessity\n")
    if name == "twosided":
        alpha = float(a) if a is not None else 0.25
        return (f"[law]\nfamily = twosided\nalpha = {alpha!r}\nn_max = {opts.get('n_max', '30')}\n"
                "[grid]\nx_list = 2^12..2^20\n"
                "[criteria]\nselect = ns-density,ns-twosided\n")
    if name == "half":
        return ("[law]\nfamily = half\nalpha = 0.5\nL = reciprocal-log\n"
                f"n_max = {opts.get('n_max', '40')}\n"
                "[grid]\nx_list = 2^12..2^22\n"
                "[criteria]\nselect = half,ns-density\nx_max = 2^40\n")
    raise ConfigError(f"unknown preset {name!r}; try pareto-0.7, uao, twosided, half")


_ALIASES = {"a": "alpha", "alpha": "alpha", "h": "h", "n_max": "n_max"}


def parse_preset(spec: str) -> tuple[str, dict]:
    """'pareto-0.7', 'pareto a=0.7 h=1', 'twosided-counterexample a=0.25', 'uao', 'half'."""
    tokens = spec.split()
    if not tokens:
        raise ConfigError("empty preset name")
    head, opts = tokens[0], {}
    for tok in tokens[1:]:
        key, eq, val = tok.partition("=")
        if not eq or key not in _ALIASES:
            raise ConfigError(f"bad preset option {tok!r}")
        opts[_ALIASES[key]] = val
    m = re.match(r"^(pareto|twosided)-([0-9.]+)$", head)
    if m:
        head, opts["alpha"] = m.group(1), m.group(2)
    head = {"twosided-counterexample": "twosided", "half-counterexample": "half"}.get(head, head)
    return head, opts


def preset_config(spec: str) -> ExperimentConfig:
    name, opts = parse_preset(spec)
    cfg = apply_text(defaults(), _preset_text(name, opts), f"preset {spec!r}")
    if name == "uao":
        cfg.law["z_seq"], cfg.law["eps_seq"] = _uao_sequences()
    return validate(cfg)


PRESETS = ("pareto-0.3", "pareto-0.4", "pareto-0.5", "pareto-0.7", "uao", "twosided", "half")
