"""Patch configuration files and the built-in catalog.

A patch file is TOML::

    name = "rotational"
    dim = 2
    domain = [[-5.0, 5.0], [-5.0, 5.0]]
    a = ["1", "0",
         "0", "1"]
    b = ["-0.1*x2", "0.1*x1"]

``a`` is row-major and must be textually symmetric after whitespace is
removed.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .expr import ExprError, parse_expression
from .metric import ManifoldPatch, riemannian_matrix
from .one_forms import _b_values, grid_points

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "PatchConfig",
    "CATALOG",
    "catalog_names",
    "catalog_patch",
    "catalog_toml",
    "parse_patch_text",
    "load_patch",
]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class PatchConfig:
    name: str
    dim: int
    domain: tuple
    a: tuple
    b: tuple

    def to_patch(self) -> ManifoldPatch:
        return ManifoldPatch.from_strings(self.name, self.domain, self.a, self.b)

    def to_toml(self) -> str:
        def strings(xs):
            return "[" + ", ".join(_quote(s) for s in xs) + "]"

        dom = ", ".join(f"[{lo!r}, {hi!r}]" for lo, hi in self.domain)
        return (
            f"name = {_quote(self.name)}\n"
            f"dim = {self.dim}\n"
            f"domain = [{dom}]\n"
            f"a = {strings(self.a)}\n"
            f"b = {strings(self.b)}\n"
        )


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


_BOX = ((-5.0, 5.0), (-5.0, 5.0))

CATALOG = {
    "riemannian-only": PatchConfig("riemannian-only", 2, _BOX, ("1", "0", "0", "1"), ("0", "0")),
    "euclidean-exact": PatchConfig("euclidean-exact", 2, _BOX, ("1", "0", "0", "1"), ("0.2", "0")),
    # b = d(0.05*x1^2)
    "exact-bump": PatchConfig("exact-bump", 2, _BOX, ("1", "0", "0", "1"), ("0.1*x1", "0")),
    # b = d(0.2*x1*x2)
    "exact-mixed": PatchConfig("exact-mixed", 2, _BOX, ("1", "0", "0", "1"), ("0.2*x2", "0.2*x1")),
    "rotational": PatchConfig("rotational", 2, _BOX, ("1", "0", "0", "1"), ("-0.1*x2", "0.1*x1")),
    "conformal": PatchConfig(
        "conformal", 2, _BOX, ("exp(0.2*x1)", "0", "0", "exp(0.2*x1)"), ("0", "0")
    ),
}


def catalog_names() -> list:
    return list(CATALOG)


def catalog_patch(name: str) -> ManifoldPatch:
    try:
        return CATALOG[name].to_patch()
    except KeyError:
        raise ConfigError(f"unknown catalog patch {name!r}; known: {', '.join(CATALOG)}")


def catalog_toml(name: str) -> str:
    """Text of the shipped catalog file for ``name``."""
    return resources.files(__package__).joinpath("catalog", f"{name}.toml").read_text()


def _key_line(text: str, key: str) -> int | None:
    for k, line in enumerate(text.splitlines(), start=1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line):
            return k
    return None


_TOML_LINE = re.compile(r"line (\d+)")


def parse_patch_text(text: str, *, check_grid: int = 5) -> PatchConfig:
    """Validate patch-file text and return the config.

    Raises
    ------
    ConfigError
        On TOML syntax errors, missing or mistyped keys, arity mismatches,
        asymmetric ``a``, expression errors, or ``a`` failing to be positive
        definite on a ``check_grid``-per-axis sample of the box.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _TOML_LINE.search(str(exc))
        raise ConfigError(f"syntax error: {exc}", int(m.group(1)) if m else None)

    def line(key):
        return _key_line(text, key)

    for key in ("name", "dim", "domain", "a", "b"):
        if key not in data:
            raise ConfigError(f"missing key {key!r}")
    unknown = set(data) - {"name", "dim", "domain", "a", "b"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key!r}", line(key))

    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ConfigError("name must be a nonempty string", line("name"))
    dim = data["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 2:
        raise ConfigError("dim must be an integer >= 2", line("dim"))

    domain = data["domain"]
    ok = isinstance(domain, list) and len(domain) == dim
    ok = ok and all(
        isinstance(iv, list)
        and len(iv) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in iv)
        and np.isfinite(iv).all()
        and iv[0] < iv[1]
        for iv in domain
    )
    if not ok:
        raise ConfigError(f"domain must be {dim} finite [lo, hi] pairs with lo < hi", line("domain"))

    for key, count in (("a", dim * dim), ("b", dim)):
        vals = data[key]
        if not isinstance(vals, list) or not all(isinstance(v, str) for v in vals):
            raise ConfigError(f"{key} must be a list of expression strings", line(key))
        if len(vals) != count:
            raise ConfigError(
                f"{key} needs {count} entries for dim = {dim}, got {len(vals)}", line(key)
            )

    a, b = data["a"], data["b"]
    norm = ["".join(s.split()) for s in a]
    for i in range(dim):
        for j in range(i + 1, dim):
            if norm[i * dim + j] != norm[j * dim + i]:
                raise ConfigError(
                    f"a is not symmetric: a[{i + 1}][{j + 1}] = {a[i * dim + j]!r} "
                    f"but a[{j + 1}][{i + 1}] = {a[j * dim + i]!r}",
                    line("a"),
                )
    for key, vals in (("a", a), ("b", b)):
        for k, src in enumerate(vals):
            try:
                parse_expression(src, dim)
            except ExprError as exc:
                raise ConfigError(f"{key}[{k}]: {exc}", line(key))

    cfg = PatchConfig(name, dim, tuple(tuple(float(v) for v in iv) for iv in domain), tuple(a), tuple(b))
    if check_grid:
        patch = cfg.to_patch()
        pts = grid_points(patch, check_grid)
        try:
            mats = riemannian_matrix(patch, pts)
        except ExprError as exc:
            raise ConfigError(f"a cannot be evaluated on the domain: {exc}", line("a"))
        try:
            np.linalg.cholesky(mats)
        except np.linalg.LinAlgError:
            raise ConfigError("a is not positive definite on the domain", line("a"))
        try:
            bv = _b_values(patch, pts)
        except ExprError as exc:
            raise ConfigError(f"b cannot be evaluated on the domain: {exc}", line("b"))
        if not (np.isfinite(mats).all() and np.isfinite(bv).all()):
            raise ConfigError("fields are not finite on the domain")
    return cfg


def load_patch(path) -> ManifoldPatch:
    """Load a patch from a file path or a catalog name."""
    p = Path(path)
    if not p.exists() and str(path) in CATALOG:
        return catalog_patch(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read patch file {str(path)!r}: {exc.strerror}")
    return parse_patch_text(text).to_patch()
