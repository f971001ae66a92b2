"""Plain-text problem files.

One ``key = value`` per line; ``#`` starts a comment; blank lines are
ignored. Either name a preset::

    preset = example2

or describe a problem with ``kind`` and its expressions:

==============  ==========================================================
kind            ``scalar``, ``system``, ``hamiltonian`` or ``pde``
name            optional label (also overrides a preset's name)
m               component count (hamiltonian, pde); inferred from f1..fm
a               coefficient; ``t`` in 1-D, ``x1, x2`` for pde
f               scalar forcing
f1 .. fm        forcings (hamiltonian, pde)
V               potential in ``z1 .. zm`` (hamiltonian, pde)
f0              lower-bound function (hamiltonian, optional)
a1e a2e h1 h2   coefficients and forcings in ``t`` (system)
fe ge           nonlinearities in ``x, y`` (system)
a0 a1 M alpha   declared bounds; sampled when absent
exact           exact solution (scalar); ``exact1 ..`` for several components
==============  ==========================================================

Errors carry the offending line number.
"""
from __future__ import annotations

import re
from dataclasses import replace
from pathlib import Path

from .expr import ExprError, parse, variables
from .problems import (CoupledSystemProblem, HamiltonianProblem, PdeProblem, ProblemError,
                       ScalarProblem, UnknownPreset, preset)

__all__ = ["ProblemFileError", "parse_problem_text", "load_problem_file"]

_KEY = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
_NUMERIC = {"a0", "a1", "M", "alpha"}
_KINDS = {
    "scalar": {"a", "f", "exact"},
    "system": {"a1e", "a2e", "fe", "ge", "h1", "h2", "exact1", "exact2"},
    "hamiltonian": {"a", "V", "f0"},
    "pde": {"a", "V"},
}


class ProblemFileError(ValueError):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _max_index(prefix: str, entries: dict) -> int:
    """Largest ``k >= 1`` with ``prefix + str(k)`` among the keys (0 if none)."""
    pat = re.compile(rf"^{prefix}([1-9]\d*)$")
    return max((int(m.group(1)) for m in map(pat.match, entries) if m), default=0)


def parse_problem_text(text: str):
    """Build a problem from the text of a problem file."""
    entries: dict[str, tuple[str, int]] = {}
    last = 0
    for no, raw in enumerate(text.splitlines(), 1):
        last = no
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProblemFileError(f"expected 'key = value', got {raw.strip()!r}", no)
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ProblemFileError(f"invalid key {key!r}", no)
        if not value:
            raise ProblemFileError(f"empty value for {key!r}", no)
        if key in entries:
            raise ProblemFileError(f"duplicate key {key!r} (first on line {entries[key][1]})", no)
        entries[key] = (value, no)

    def line_of(key: str) -> int:
        return entries[key][1] if key in entries else last

    name = entries.pop("name", (None, 0))[0]
    if "preset" in entries:
        value, no = entries.pop("preset")
        if entries:
            k = min(entries, key=line_of)
            raise ProblemFileError(f"key {k!r} cannot be combined with a preset", line_of(k))
        try:
            p = preset(value)
        except UnknownPreset as exc:
            raise ProblemFileError(str(exc), no) from None
        if name:
            p = replace(p, name=name)
        return p

    if "kind" not in entries:
        raise ProblemFileError("missing 'kind' (or 'preset')", last)
    kind, kno = entries.pop("kind")
    if kind not in _KINDS:
        raise ProblemFileError(f"unknown kind {kind!r}; expected one of {sorted(_KINDS)}", kno)

    bounds = {}
    for k in _NUMERIC & set(entries):
        value, no = entries.pop(k)
        try:
            bounds[k] = float(value)
        except ValueError:
            raise ProblemFileError(f"{k} must be a number, got {value!r}", no) from None
    if "alpha" in bounds and kind != "system":
        raise ProblemFileError("alpha applies only to kind = system", line_of("alpha"))

    m = None
    if "m" in entries:
        value, no = entries.pop("m")
        if not value.isdigit() or int(value) < 1:
            raise ProblemFileError(f"m must be a positive integer, got {value!r}", no)
        m = int(value)

    exprs = {}
    for k, (value, no) in entries.items():
        try:
            exprs[k] = parse(value)
        except ExprError as exc:
            raise ProblemFileError(f"{k}: {exc}", no) from None

    allowed = set(_KINDS[kind])
    if kind in ("hamiltonian", "pde"):
        if m is None:
            m = _max_index("f", exprs)
        allowed |= {f"f{i + 1}" for i in range(m)} | {f"exact{i + 1}" for i in range(m)}
    extra = sorted(set(exprs) - allowed, key=line_of)
    if extra:
        raise ProblemFileError(f"unexpected key {extra[0]!r} for kind = {kind}", line_of(extra[0]))

    space = ("x1", "x2") if kind == "pde" else ("t",)
    zv = tuple(f"z{i + 1}" for i in range(m or 0))
    for k, e in exprs.items():
        ok = zv if k == "V" else ("x", "y") if k in ("fe", "ge") else space
        bad = sorted(variables(e) - set(ok))
        if bad:
            raise ProblemFileError(
                f"{k} uses {', '.join(bad)}; allowed variables: {', '.join(ok) or 'none'}",
                line_of(k))

    def need(*keys):
        for k in keys:
            if k not in exprs:
                raise ProblemFileError(f"kind = {kind} requires {k!r}", last)
        return [exprs[k] for k in keys]

    label = name or kind
    try:
        if kind == "scalar":
            a, f = need("a", "f")
            exact = (exprs["exact"],) if "exact" in exprs else None
            return ScalarProblem.build(a, f, name=label, exact=exact, **bounds)
        if kind == "system":
            args = need("a1e", "a2e", "fe", "ge", "h1", "h2")
            exact = None
            if "exact1" in exprs or "exact2" in exprs:
                exact = tuple(need("exact1", "exact2"))
            return CoupledSystemProblem.build(*args, name=label, exact=exact, **bounds)
        if m == 0:
            raise ProblemFileError(f"kind = {kind} requires f1 .. fm", last)
        a, V = need("a", "V")
        fs = need(*(f"f{i + 1}" for i in range(m)))
        ek = [f"exact{i + 1}" for i in range(m)]
        exact = tuple(need(*ek)) if any(k in exprs for k in ek) else None
        if kind == "hamiltonian":
            return HamiltonianProblem.build(V, a, fs, exprs.get("f0"), name=label,
                                            exact=exact, **bounds)
        return PdeProblem.build(V, a, fs, name=label, exact=exact, **bounds)
    except ProblemError as exc:
        raise ProblemFileError(str(exc), last) from None


def load_problem_file(path) -> object:
    return parse_problem_text(Path(path).read_text())
