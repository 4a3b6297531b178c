"""Sparse multivariate polynomials and polynomial systems over the reals.

Polynomials are immutable and stored in a canonical form: one term per
exponent tuple, no zero coefficients, terms in graded-lex descending order.
Numerical evaluation goes through the packed kernels in
:mod:`rankcurve.kernels`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatch, PolyParseError

INFINITE = math.inf


class Monomial(NamedTuple):
    coefficient: float
    exponents: tuple[int, ...]


def _term_key(exps):
    return (sum(exps), exps)


@dataclass(frozen=True)
class Polynomial:
    terms: tuple[Monomial, ...]
    n_vars: int

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("n_vars must be positive")

    @classmethod
    def from_dict(cls, coeffs: Mapping[tuple[int, ...], float], n_vars: int) -> "Polynomial":
        terms = []
        for exps, c in coeffs.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n_vars:
                raise DimensionMismatch(f"exponent tuple {exps} has length {len(exps)}, expected {n_vars}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = float(c)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient {c}")
            if c != 0.0:
                terms.append(Monomial(c, exps))
        terms.sort(key=lambda m: _term_key(m.exponents), reverse=True)
        return cls(tuple(terms), n_vars)

    @classmethod
    def constant(cls, value: float, n_vars: int) -> "Polynomial":
        return cls.from_dict({(0,) * n_vars: value}, n_vars)

    @classmethod
    def variable(cls, index: int, n_vars: int) -> "Polynomial":
        exps = [0] * n_vars
        exps[index] = 1
        return cls.from_dict({tuple(exps): 1.0}, n_vars)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {m.exponents: m.coefficient for m in self.terms}

    @property
    def degree(self) -> int:
        return max((sum(m.exponents) for m in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(m.exponents) == 0 for m in self.terms)

    def constant_term(self) -> float:
        return self.as_dict().get((0,) * self.n_vars, 0.0)

    def is_homogeneous(self) -> bool:
        return len({sum(m.exponents) for m in self.terms}) <= 1

    # arithmetic, used by the parser and by homogenize
    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.n_vars != self.n_vars:
                raise DimensionMismatch("polynomials live in different rings")
            return other
        return Polynomial.constant(float(other), self.n_vars)

    def __add__(self, other):
        other = self._coerce(other)
        acc = self.as_dict()
        for m in other.terms:
            acc[m.exponents] = acc.get(m.exponents, 0.0) + m.coefficient
        return Polynomial.from_dict(acc, self.n_vars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(tuple(Monomial(-m.coefficient, m.exponents) for m in self.terms), self.n_vars)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        acc: dict[tuple[int, ...], float] = {}
        for a in self.terms:
            for b in other.terms:
                exps = tuple(x + y for x, y in zip(a.exponents, b.exponents))
                acc[exps] = acc.get(exps, 0.0) + a.coefficient * b.coefficient
        return Polynomial.from_dict(acc, self.n_vars)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if not isinstance(e, int) or e < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(1.0, self.n_vars)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def to_str(self, var_names: Sequence[str] | None = None) -> str:
        names = list(var_names) if var_names is not None else default_var_names(self.n_vars)
        if not self.terms:
            return "0"
        pieces = []
        for idx, (c, exps) in enumerate(self.terms):
            factors = []
            for name, e in zip(names, exps):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            mag = abs(c)
            if factors and mag == 1.0:
                body = "*".join(factors)
            else:
                body = "*".join([_format_coeff(mag)] + factors)
            if idx == 0:
                pieces.append(("-" if c < 0 else "") + body)
            else:
                pieces.append((" - " if c < 0 else " + ") + body)
        return "".join(pieces)

    def __str__(self):
        return self.to_str()

    @cached_property
    def _packed(self):
        return _pack([self])

    def evaluate(self, point) -> float:
        x = _check_point(point, self.n_vars)
        f, _, _ = kernels.eval_system(*self._packed, 1, x, 0)
        return float(f[0])

    def grad(self, point) -> np.ndarray:
        x = _check_point(point, self.n_vars)
        _, J, _ = kernels.eval_system(*self._packed, 1, x, 1)
        return J[0]

    def hessian(self, point) -> np.ndarray:
        x = _check_point(point, self.n_vars)
        _, _, H = kernels.eval_system(*self._packed, 1, x, 2)
        return H[0]


def _format_coeff(c: float) -> str:
    if c.is_integer() and c < 1e16:
        return str(int(c))
    return repr(c)


def default_var_names(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)]


def _pack(polys: Sequence[Polynomial]):
    n = polys[0].n_vars
    T = sum(len(p.terms) for p in polys)
    coeffs = np.empty(T)
    exps = np.zeros((T, n), dtype=np.int64)
    owner = np.empty(T, dtype=np.int64)
    t = 0
    for r, p in enumerate(polys):
        for c, e in p.terms:
            coeffs[t] = c
            exps[t] = e
            owner[t] = r
            t += 1
    return coeffs, exps, owner


def _check_point(point, n):
    x = np.ascontiguousarray(point, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n:
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({n},)")
    return x


@dataclass(frozen=True)
class PolySystem:
    polys: tuple[Polynomial, ...]
    n_vars: int
    var_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.polys:
            raise ValueError("a system needs at least one polynomial")
        for p in self.polys:
            if p.n_vars != self.n_vars:
                raise DimensionMismatch("all polynomials must share n_vars")
        if not self.var_names:
            object.__setattr__(self, "var_names", tuple(default_var_names(self.n_vars)))
        elif len(self.var_names) != self.n_vars:
            raise DimensionMismatch("var_names length differs from n_vars")

    @classmethod
    def from_polys(cls, polys: Iterable[Polynomial], var_names: Sequence[str] | None = None):
        polys = tuple(polys)
        return cls(polys, polys[0].n_vars, tuple(var_names) if var_names else ())

    @property
    def k(self) -> int:
        return len(self.polys)

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    @cached_property
    def _packed(self):
        return _pack(self.polys)

    @cached_property
    def _abs_packed(self):
        coeffs, exps, owner = self._packed
        return np.abs(coeffs), exps, owner

    def eval_all(self, point, order: int = 2):
        """Return ``(f, J, H)`` at ``point``; see :func:`kernels.eval_system`."""
        x = _check_point(point, self.n_vars)
        return kernels.eval_system(*self._packed, self.k, x, order)

    def eval_abs(self, point, order: int = 1):
        """Evaluate with ``|coefficients|`` at ``|point|``: the magnitude
        scale that bounds floating-point cancellation in :meth:`eval_all`."""
        x = np.abs(_check_point(point, self.n_vars))
        return kernels.eval_system(*self._abs_packed, self.k, x, order)

    def evaluate(self, point) -> np.ndarray:
        return self.eval_all(point, 0)[0]

    def jacobian(self, point) -> np.ndarray:
        return self.eval_all(point, 1)[1]

    def residual(self, point) -> float:
        return float(np.linalg.norm(self.evaluate(point)))

    def to_text(self) -> str:
        lines = ["vars: " + " ".join(self.var_names)]
        lines += [p.to_str(self.var_names) for p in self.polys]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text, var_index, line):
        self.text = text
        self.var_index = var_index
        self.n = len(var_index)
        self.line = line
        self.tokens = self._tokenize()
        self.pos = 0

    def _tokenize(self):
        out = []
        i = 0
        text = self.text
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(text, i)
            if not m or m.end() == i:
                raise PolyParseError(f"unexpected character {text[i]!r}", self.line, i + 1)
            kind = m.lastgroup
            start = m.start(kind)
            out.append((kind, m.group(kind), start + 1))
            i = m.end()
        out.append(("end", "", len(text) + 1))
        return out

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return PolyParseError(msg, self.line, tok[2])

    def parse(self):
        if self.peek()[0] == "end":
            raise self.error("empty polynomial")
        p = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            if tok[0] in ("id", "num") or tok[1] == "(":
                raise self.error("implicit multiplication is not allowed; use '*'")
            raise self.error(f"unexpected token {tok[1]!r}")
        return p

    def expr(self):
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op_tok = self.take()
            q = self.unary()
            if op_tok[1] == "*":
                p = p * q
            else:
                if not q.is_constant() or q.is_zero():
                    raise self.error("division is only allowed by a nonzero constant", op_tok)
                p = p * (1.0 / q.constant_term())
        return p

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("+", "-"):
            self.take()
            p = self.unary()
            return -p if tok[1] == "-" else p
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.take()
            if tok[0] != "num" or not tok[1].isdigit():
                raise self.error("exponent must be a nonnegative integer literal", tok)
            base = base ** int(tok[1])
        return base

    def atom(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Polynomial.constant(float(text), self.n)
        if kind == "id":
            if text not in self.var_index:
                raise self.error(f"unknown identifier {text!r}", tok)
            return Polynomial.variable(self.var_index[text], self.n)
        if kind == "op" and text == "(":
            p = self.expr()
            close = self.take()
            if close[1] != ")":
                raise self.error("expected ')'", close)
            return p
        if kind == "end":
            raise self.error("unexpected end of input", tok)
        raise self.error(f"unexpected token {text!r}", tok)


def parse_polynomial(text: str, var_names: Sequence[str], line: int = 1) -> Polynomial:
    var_index = {name: i for i, name in enumerate(var_names)}
    if len(var_index) != len(var_names):
        raise ValueError("duplicate variable names")
    return _Parser(text, var_index, line).parse()


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0]


def parse_system(text: str, var_names: Sequence[str]) -> PolySystem:
    """Parse one polynomial per nonempty line (``#`` starts a comment)."""
    polys = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        polys.append(parse_polynomial(line, var_names, lineno))
    if not polys:
        raise PolyParseError("no polynomials found", 1, 1)
    return PolySystem(tuple(polys), len(var_names), tuple(var_names))


def load_system_text(text: str) -> PolySystem:
    """Parse the system file format: a ``vars:`` header line, then polynomials."""
    lines = text.splitlines()
    for idx, raw in enumerate(lines):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if not line.startswith("vars:"):
            raise PolyParseError("first nonempty line must be 'vars: <names>'", idx + 1, 1)
        names = line[len("vars:"):].split()
        if not names:
            raise PolyParseError("no variables declared", idx + 1, 1)
        for name in names:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
                raise PolyParseError(f"invalid variable name {name!r}", idx + 1, 1)
        body = ["" for _ in range(idx + 1)] + lines[idx + 1:]
        return parse_system("\n".join(body), names)
    raise PolyParseError("empty system file", 1, 1)


def format_system(sys: PolySystem) -> str:
    return sys.to_text()


# ------------------------------------------------------ derived operations

def evaluate(p: Polynomial, point) -> float:
    return p.evaluate(point)


def grad(p: Polynomial, point) -> np.ndarray:
    return p.grad(point)


def hessian(p: Polynomial, point) -> np.ndarray:
    return p.hessian(point)


def jacobian(sys: PolySystem, point) -> np.ndarray:
    return sys.jacobian(point)


def homogenize(sys: PolySystem) -> PolySystem:
    """Degree-homogenize each polynomial with a new trailing variable and
    append the unit-sphere equation in all n+1 variables."""
    n = sys.n_vars
    m = n + 1
    hom = []
    for p in sys.polys:
        d = p.degree
        hom.append(Polynomial.from_dict(
            {e + (d - sum(e),): c for c, e in p.terms}, m))
    sphere = {}
    for i in range(m):
        e = [0] * m
        e[i] = 2
        sphere[tuple(e)] = 1.0
    sphere[(0,) * m] = -1.0
    hom.append(Polynomial.from_dict(sphere, m))
    names = list(sys.var_names)
    new = next(c for c in ("h", "x0", "h_", "hom_") if c not in names)
    return PolySystem(tuple(hom), m, tuple(names + [new]))


def restrict_to_ray(p: Polynomial, base, direction) -> np.ndarray:
    """Coefficients (lowest degree first) of ``t -> p(base + t*direction)``."""
    b = _check_point(base, p.n_vars)
    d = _check_point(direction, p.n_vars)
    if not np.any(d):
        raise ValueError("direction must be nonzero")
    out = np.zeros(p.degree + 1)
    for c, exps in p.terms:
        acc = np.array([c])
        for bi, di, e in zip(b, d, exps):
            if e:
                acc = np.convolve(acc, _linear_power(bi, di, e))
        out[: acc.shape[0]] += acc
    return out


def _linear_power(b, d, e):
    # binomial expansion of (b + d t)^e, lowest degree first
    return np.array([math.comb(e, j) * b ** (e - j) * d ** j for j in range(e + 1)])


def trailing_degree(coeffs, tol: float = 1e-10):
    """Index of the first coefficient with ``|c| > tol * max|c|``.

    Returns :data:`INFINITE` for the zero polynomial.
    """
    c = np.abs(np.asarray(coeffs, dtype=float))
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if c.size == 0:
        return INFINITE
    scale = c.max()
    if scale == 0.0:
        return INFINITE
    idx = np.nonzero(c > tol * scale)[0]
    return int(idx[0]) if idx.size else INFINITE
