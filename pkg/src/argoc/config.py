"""Run configuration: a sectioned ``key = value`` file plus flag overrides.

Reading goes through :mod:`configparser`; writing is canonical (fixed section
and key order, ``repr`` floats), so ``dumps(loads(text)) == text`` for any
file produced by :func:`dumps`.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import SchemaError
from .nowcast import KINDS

SECTIONS = {
    "data": ("target", "predictors", "availability", "partitions", "external", "eps"),
    "cluster": ("k", "k_min", "k_max", "cluster_end", "cluster_log", "recluster_every"),
    "method": ("methods", "N", "m", "alpha", "folds", "n_lambda", "ratio", "tol",
               "max_iter", "cv_every", "standardize"),
    "span": ("start", "end"),
    "intervals": ("level", "reps", "q", "seed"),
    "output": ("out",),
}


@dataclass(frozen=True)
class RunConfig:
    # data
    target: str = ""
    predictors: str = ""
    availability: str = ""
    partitions: tuple[str, ...] = ()
    external: tuple[str, ...] = ()      # "label=path" entries
    eps: float = 0.5
    # cluster
    k: int = 10
    k_min: int = 2
    k_max: int = 0                      # 0: up to n - 1
    cluster_end: str = ""               # last clustering week; "" = before each vintage's first prediction
    cluster_log: bool = True            # cluster ln(v + eps) rather than raw volumes
    recluster_every: int = 0            # extra vintages every n weeks; 0 = vocabulary changes only
    # method
    methods: tuple[str, ...] = ("argo_c", "argo_lasso", "naive")
    N: int = 104
    m: int = 52
    alpha: float = 0.95
    folds: int = 10
    n_lambda: int = 50
    ratio: float = 1e-3
    tol: float = 1e-7
    max_iter: int = 10_000
    cv_every: int = 1
    standardize: bool = True
    # span ("" = from the first predictable week / to the last panel week)
    start: str = ""
    end: str = ""
    # intervals
    level: float = 0.95
    reps: int = 2000
    q: float = 8.0
    seed: int = 0
    # output
    out: str = "out"

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        bad = [m for m in self.methods if m not in KINDS or m == "external"]
        if bad:
            out.append(f"unknown methods {bad}")
        if not self.eps > 0:
            out.append("eps must be positive")
        if self.k < 1 or self.k_min < 1 or self.k_max < 0 or self.recluster_every < 0:
            out.append("cluster counts must be positive")
        if self.N < 2 or self.m < 0:
            out.append("need N >= 2 and m >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            out.append("alpha must lie in [0, 1]")
        if self.folds < 2 or self.n_lambda < 1 or not 0 < self.ratio < 1:
            out.append("need folds >= 2, n_lambda >= 1, 0 < ratio < 1")
        if not self.tol > 0 or self.max_iter < 1 or self.cv_every < 1:
            out.append("need tol > 0, max_iter >= 1, cv_every >= 1")
        if not 0 < self.level < 1 or self.reps < 1 or not self.q > 1:
            out.append("need 0 < level < 1, reps >= 1, q > 1")
        for e in self.external:
            if "=" not in e:
                out.append(f"external entry {e!r} must be label=path")
        return out

    def external_map(self) -> dict[str, str]:
        return dict(e.split("=", 1) for e in self.external)

    def input_paths(self) -> list[str]:
        paths = [self.target, self.predictors, self.availability, *self.partitions]
        paths += list(self.external_map().values())
        return [p for p in paths if p]

    def missing_paths(self) -> list[str]:
        return [p for p in self.input_paths() if not Path(p).exists()]

    def override(self, **kw) -> "RunConfig":
        """Replace fields whose new value is not ``None``."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(name: str, text: str):
    kind = _FIELDS[name].type
    text = text.strip()
    if kind == "bool":
        low = text.lower()
        if low not in ("true", "false"):
            raise ValueError(f"{name}: expected true or false, got {text!r}")
        return low == "true"
    if kind == "int":
        return int(text)
    if kind == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"{name}: must be finite")
        return v
    if kind.startswith("tuple"):
        return tuple(p.strip() for p in text.split(",") if p.strip())
    return text


def dumps(cfg: RunConfig) -> str:
    lines = []
    for section, keys in SECTIONS.items():
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        lines += [f"{k} = {_format(getattr(cfg, k))}" for k in keys]
    return "\n".join(lines) + "\n"


def loads(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise SchemaError(source, [(getattr(exc, "lineno", 0) or 0, str(exc).splitlines()[0])])
    kw, problems = {}, []
    for section in parser.sections():
        if section not in SECTIONS:
            problems.append((0, f"unknown section [{section}]"))
            continue
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                problems.append((0, f"unknown key {key!r} in [{section}]"))
                continue
            try:
                kw[key] = _parse(key, raw)
            except ValueError as exc:
                problems.append((0, str(exc)))
    if not problems:
        try:
            return RunConfig(**kw)
        except ValueError as exc:
            problems.append((0, str(exc)))
    raise SchemaError(source, problems)


def load(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise SchemaError(path, [(0, "config file not found")])
    return loads(path.read_text(), str(path))


def save(path, cfg: RunConfig) -> None:
    Path(path).write_text(dumps(cfg))
