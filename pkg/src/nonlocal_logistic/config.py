"""INI-style run configuration: parse, validate, serialise.

Every key has a default, so an empty file is a valid config.  Growth rates may be
written relative to the discrete principal eigenvalue, e.g. ``2*lambda1`` or
``lambda1 - 0.5``; ``mid`` (sweep-p only) is the midpoint of lambda1 and
lambda1[L_alpha].
"""

from __future__ import annotations

import re
from dataclasses import dataclass

N_CAP = {1: 513, 2: 65}

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_LAMBDA_RE = re.compile(
    rf"^(?:(?P<scale>{_NUM})\s*\*\s*)?lambda1(?:\s*(?P<sign>[-+])\s*(?P<offset>{_NUM}))?$"
)


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class LambdaExpr:
    """``scale * lambda1 + offset``, a plain number (scale 0), or the ``mid`` marker."""

    scale: float = 0.0
    offset: float = 0.0
    mid: bool = False

    @classmethod
    def parse(cls, text: str) -> LambdaExpr:
        s = text.strip()
        if s == "mid":
            return cls(mid=True)
        if re.fullmatch(_NUM, s):
            return cls(0.0, float(s))
        m = _LAMBDA_RE.match(s.replace(" ", ""))
        if not m:
            raise ValueError(f"cannot read {text!r} as a number or 'k*lambda1 +- c'")
        scale = float(m["scale"]) if m["scale"] else 1.0
        offset = float(m["offset"]) if m["offset"] else 0.0
        if m["sign"] == "-":
            offset = -offset
        return cls(scale, offset)

    def resolve(self, lambda1: float, lambda1_adv: float | None = None) -> float:
        if self.mid:
            if lambda1_adv is None:
                raise ValueError("'mid' needs lambda1[L_alpha]")
            return 0.5 * (lambda1 + lambda1_adv)
        return self.scale * lambda1 + self.offset

    def __str__(self) -> str:
        if self.mid:
            return "mid"
        if self.scale == 0:
            return _fmt(self.offset)
        head = "lambda1" if self.scale == 1 else f"{_fmt(self.scale)}*lambda1"
        if self.offset == 0:
            return head
        sign = "+" if self.offset > 0 else "-"
        return f"{head} {sign} {_fmt(abs(self.offset))}"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


# (type, default, constraint or None, message)
def _positive(x):
    return x > 0


SCHEMA: dict[str, dict[str, tuple]] = {
    "domain": {
        "kind": ("choice:interval,rectangle", "interval"),
        "x0": ("float", 0.0),
        "x1": ("float", 1.0),
        "y0": ("float", 0.0),
        "y1": ("float", 1.0),
    },
    "problem": {
        "lambda": ("lambda", LambdaExpr(2.0, 0.0)),
        "gamma": ("float", 1.0, _positive, "gamma must be > 0 (crowding exponent hypothesis gamma > 0)"),
        "p": ("float", 2.0, lambda x: x >= 1, "p must be >= 1 (advection exponent hypothesis p >= 1)"),
        "n": ("int", 255, lambda x: x >= 3, "n must be >= 3"),
    },
    "flow": {
        "kind": ("choice:constant,rotational,file", "constant"),
        "alpha": ("floats", (0.0,)),
        "c": ("float", 4.0),
        "file": ("str", ""),
    },
    "kernel": {
        "kind": ("choice:constant,gaussian,ball,table", "constant"),
        "c": ("float", 1.0, lambda x: x >= 0, "constant kernel must be nonnegative"),
        "amplitude": ("float", 1.0, lambda x: x >= 0, "kernel amplitude must be nonnegative"),
        "width": ("float", 0.1, _positive, "kernel width must be > 0"),
        "b": ("float", 1.0, lambda x: x >= 0, "ball coefficient must be nonnegative"),
        "r": ("float", 0.25, _positive, "ball radius must be > 0"),
        "file": ("str", ""),
    },
    "run": {
        "seed": ("int", 0),
        "output": ("str", "run"),
        "scheme": ("choice:auto,central,upwind", "auto"),
        "starts": ("int", 3, lambda x: x >= 3, "starts must be >= 3"),
        "residual_tol": ("float", 1e-8, _positive, "residual_tol must be > 0"),
        "solution": ("str", ""),
    },
    "threshold": {
        "lo": ("lambda", LambdaExpr(0.5, 0.0)),
        "hi": ("lambda", LambdaExpr(2.0, 0.0)),
        "width": ("float", 0.01, _positive, "width must be > 0"),
        "rel_tol": ("float", 0.05, _positive, "rel_tol must be > 0"),
    },
    "nonexistence": {
        "lambda": ("lambda", LambdaExpr(1.0, -0.5)),
        "starts": ("int", 5, lambda x: x >= 3, "starts must be >= 3"),
    },
    "sweep-alpha0": {
        "lambda": ("lambda", LambdaExpr(2.0, 0.0)),
        "values": ("floats", (1.0, 0.5, 0.25, 0.125, 0.0625)),
        "p": ("floats", (1.0, 2.0)),
        "decay": ("float", 0.1, _positive, "decay must be > 0"),
    },
    "sweep-alphainf": {
        "lambda": ("lambda", LambdaExpr(2.0, 0.0)),
        "values": ("floats", (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)),
        "p": ("float", 2.0, lambda x: x > 1, "decay as |alpha| grows needs p > 1"),
        "decay": ("float", 0.2, _positive, "decay must be > 0"),
    },
    "alpha-scan": {
        "lambda": ("lambda", LambdaExpr(2.0, 0.0)),
        "values": ("floats", (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)),
    },
    "sweep-p": {
        "lambda": ("lambda", LambdaExpr(mid=True)),
        "alpha": ("float", 1.0),
        "values": ("floats", (1.5, 1.25, 1.125, 1.0625)),
        "decay": ("float", 0.1, _positive, "decay must be > 0"),
    },
    "divfree": {
        "n": ("int", 31, lambda x: x >= 3, "n must be >= 3"),
        "c": ("float", 4.0),
        "lambda": ("lambda", LambdaExpr(1.0, 1.0)),
        "p": ("float", 2.0, lambda x: x >= 1, "p must be >= 1"),
    },
    "branch": {
        "n": ("int", 31, lambda x: x >= 3, "n must be >= 3"),
        "c": ("float", 4.0),
        "p": ("float", 2.0, lambda x: x >= 1, "p must be >= 1"),
        "offsets": ("floats", tuple(round(0.1 * k, 10) for k in range(1, 21))),
    },
}


class RunConfig:
    """Section -> key -> value mapping with schema defaults filled in."""

    def __init__(self, values: dict[str, dict]):
        self._values = values

    @classmethod
    def defaults(cls) -> RunConfig:
        return cls({sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()})

    def __getitem__(self, section: str) -> dict:
        return self._values[section]

    def get(self, dotted: str):
        sec, key = dotted.split(".", 1)
        return self._values[sec][key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self._values == other._values

    def as_dict(self) -> dict:
        return {
            sec: {k: (_fmt(v) if isinstance(v, LambdaExpr) else v) for k, v in keys.items()}
            for sec, keys in self._values.items()
        }

    def serialize(self) -> str:
        out = []
        for sec, keys in self._values.items():
            out.append(f"[{sec}]")
            for k, v in keys.items():
                out.append(f"{k} = {_fmt(v)}")
            out.append("")
        return "\n".join(out)


def _convert(kind: str, raw: str):
    if kind == "float":
        return float(raw)
    if kind == "int":
        if not re.fullmatch(r"[-+]?\d+", raw):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(raw)
    if kind == "floats":
        parts = [x for x in re.split(r"[,\s]+", raw) if x]
        if not parts:
            raise ValueError("expected a comma separated list of numbers")
        return tuple(float(x) for x in parts)
    if kind == "lambda":
        return LambdaExpr.parse(raw)
    if kind == "str":
        return raw
    if kind.startswith("choice:"):
        options = kind[len("choice:"):].split(",")
        if raw not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {raw!r}")
        return raw
    raise AssertionError(kind)


def _assign(cfg: RunConfig, section: str, key: str, raw: str, where: str, errors: list):
    if section not in SCHEMA:
        errors.append(f"{where}: unknown section [{section}]")
        return
    spec = SCHEMA[section].get(key)
    if spec is None:
        errors.append(f"{where}: unknown key '{key}' in [{section}]")
        return
    try:
        value = _convert(spec[0], raw.strip())
    except ValueError as exc:
        errors.append(f"{where}: {section}.{key}: {exc}")
        return
    if len(spec) > 2 and not spec[2](value):
        errors.append(f"{where}: {section}.{key} = {raw.strip()}: {spec[3]}")
        return
    cfg[section][key] = value


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse ``key = value`` lines under ``[section]`` headers; collects every error.

    Comments are whole lines starting with ``#`` or ``;`` so values may contain both.

    ``overrides`` are ``section.key=value`` strings applied after the file.
    """
    cfg = RunConfig.defaults()
    errors: list[str] = []
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        m = re.fullmatch(r"\[([\w-]+)\]", stripped)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                errors.append(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if section is None:
            errors.append(f"line {lineno}: key '{key}' outside any section")
            continue
        if section not in SCHEMA:
            continue
        _assign(cfg, section, key, raw, f"line {lineno}", errors)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            errors.append(f"--set {item!r}: expected section.key=value")
            continue
        dotted, raw = item.split("=", 1)
        sec, key = dotted.strip().split(".", 1)
        _assign(cfg, sec, key, raw, f"--set {dotted.strip()}", errors)
    _cross_checks(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def _cross_checks(cfg: RunConfig, errors: list) -> None:
    dom = cfg["domain"]
    if not dom["x1"] > dom["x0"]:
        errors.append("domain: x1 must exceed x0")
    dim = 1
    if dom["kind"] == "rectangle":
        dim = 2
        if not dom["y1"] > dom["y0"]:
            errors.append("domain: y1 must exceed y0")
    n = cfg["problem"]["n"]
    if n > N_CAP[dim]:
        errors.append(f"problem.n = {n}: dense kernels cap n at {N_CAP[dim]} in {dim}D")
    flow = cfg["flow"]
    if flow["kind"] == "constant" and len(flow["alpha"]) != dim:
        errors.append(f"flow.alpha needs {dim} component(s), got {len(flow['alpha'])}")
    if flow["kind"] == "rotational" and dim != 2:
        errors.append("flow.kind = rotational needs a rectangle domain")
    if flow["kind"] == "file" and not flow["file"]:
        errors.append("flow.kind = file needs flow.file")
    if cfg["kernel"]["kind"] == "table" and not cfg["kernel"]["file"]:
        errors.append("kernel.kind = table needs kernel.file")
    for sec in ("divfree", "branch"):
        if cfg[sec]["n"] > N_CAP[2]:
            errors.append(f"{sec}.n = {cfg[sec]['n']}: cap is {N_CAP[2]} in 2D")
    if cfg["problem"]["lambda"].mid:
        errors.append("problem.lambda: 'mid' is only meaningful in [sweep-p]")
    th = cfg["threshold"]
    if th["lo"].mid or th["hi"].mid:
        errors.append("threshold: 'mid' is not a valid bound")
