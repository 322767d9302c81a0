"""Scalar expression trees over named coordinates and parameters.

Expressions are immutable. Coordinates are the variables forms are
differentiated against; parameters (``lam``, ``K``, ``eps``...) stay symbolic
until evaluation, so one construction serves a whole parameter sweep.

Text grammar accepted by :func:`parse`::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'
    args    := expr (',' expr)*

Function names are ``exp``, ``ln``, ``sin``, ``cos``, ``sqrt`` and
``bump(name [, arg [, order]])``. ``pi`` and ``e`` are constants. A bare
``bump(name)`` uses the variable declared for that bump.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Expr",
    "BumpSpec",
    "DomainError",
    "ParseError",
    "const",
    "coord",
    "param",
    "add",
    "mul",
    "power",
    "exp",
    "ln",
    "sin",
    "cos",
    "bump",
    "differentiate",
    "evaluate",
    "simplify",
    "substitute",
    "is_zero",
    "parse",
    "to_text",
    "ZERO",
    "ONE",
]


class DomainError(ValueError):
    """Evaluation left the real domain (ln of a non-positive value, ...)."""


_UNARY = ("exp", "ln", "sin", "cos")


class Expr:
    """Immutable expression node.

    ``kind`` is one of ``const``, ``coord``, ``param``, ``sum``, ``prod``,
    ``pow``, ``exp``, ``ln``, ``sin``, ``cos``, ``bump``. Build nodes with the
    module-level constructors rather than calling this directly.
    """

    __slots__ = ("kind", "args", "value", "name", "spec", "order", "coords", "params", "_hash")

    def __init__(self, kind, args=(), value=None, name=None, spec=None, order=0):
        if kind == "const" and not math.isfinite(value):
            raise DomainError(f"non-finite constant {value!r}")
        set_ = object.__setattr__
        set_(self, "kind", kind)
        set_(self, "args", tuple(args))
        set_(self, "value", None if value is None else float(value))
        set_(self, "name", name)
        set_(self, "spec", spec)
        set_(self, "order", order)
        if kind == "coord":
            coords, params = frozenset((name,)), frozenset()
        elif kind == "param":
            coords, params = frozenset(), frozenset((name,))
        else:
            coords = frozenset().union(*(a.coords for a in self.args))
            params = frozenset().union(*(a.params for a in self.args))
        set_(self, "coords", coords)
        set_(self, "params", params)
        set_(self, "_hash", hash((kind, self.args, self.value, name, spec, order)))

    def __setattr__(self, key, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return (
            self.kind == other.kind
            and self.value == other.value
            and self.name == other.name
            and self.spec == other.spec
            and self.order == other.order
            and self.args == other.args
        )

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        return to_text(self)

    # arithmetic sugar; foreign operands (forms, fields) get their turn
    def __add__(self, other):
        return add(self, other) if _liftable(other) else NotImplemented

    def __radd__(self, other):
        return add(other, self) if _liftable(other) else NotImplemented

    def __sub__(self, other):
        return add(self, mul(-1.0, other)) if _liftable(other) else NotImplemented

    def __rsub__(self, other):
        return add(other, mul(-1.0, self)) if _liftable(other) else NotImplemented

    def __mul__(self, other):
        return mul(self, other) if _liftable(other) else NotImplemented

    def __rmul__(self, other):
        return mul(other, self) if _liftable(other) else NotImplemented

    def __truediv__(self, other):
        return mul(self, power(other, -1.0)) if _liftable(other) else NotImplemented

    def __rtruediv__(self, other):
        return mul(other, power(self, -1.0)) if _liftable(other) else NotImplemented

    def __neg__(self):
        return mul(-1.0, self)

    def __pow__(self, other):
        return power(self, other) if _liftable(other) else NotImplemented

    def __rpow__(self, other):
        return power(other, self) if _liftable(other) else NotImplemented

    @property
    def is_const(self) -> bool:
        return self.kind == "const"


def _liftable(x) -> bool:
    return isinstance(x, (Expr, int, float, np.floating, np.integer))


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


@dataclass(frozen=True)
class BumpSpec:
    """Smooth step on [0, 1]: zero on [0, eps], one on [1 - eps, 1].

    Outside [0, 1] the step continues flat. ``kind`` is ``"polynomial"``
    (the C2 smoothstep 6u^5 - 15u^4 + 10u^3) or ``"exponential"`` (C-infinity,
    flat to all orders at both ends).
    """

    eps: float = 0.25
    kind: str = "polynomial"
    name: str | None = None
    var: str | None = None

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"bump eps must lie in (0, 1/2), got {self.eps}")
        if self.kind not in ("polynomial", "exponential"):
            raise ValueError(f"unknown bump kind {self.kind!r}")

    @property
    def width(self) -> float:
        return 1.0 - 2.0 * self.eps

    def __call__(self, u, order: int = 0):
        """Numeric value of the ``order``-th derivative at ``u``."""
        return _bump_eval(self, np.asarray(u, dtype=float), order)


@lru_cache(maxsize=None)
def _const_cached(v: float) -> Expr:
    return Expr("const", value=v)


def const(v: float) -> Expr:
    v = float(v)
    if v == 0.0:
        v = 0.0  # fold -0.0
    return _const_cached(v)


ZERO = const(0.0)
ONE = const(1.0)


def coord(name: str) -> Expr:
    return Expr("coord", name=name)


def param(name: str) -> Expr:
    return Expr("param", name=name)


def add(*terms) -> Expr:
    flat: list[Expr] = []
    c = 0.0
    for t in map(_lift, terms):
        parts = t.args if t.kind == "sum" else (t,)
        for p in parts:
            if p.kind == "const":
                c += p.value
            else:
                flat.append(p)
    if c != 0.0:
        flat.append(const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Expr("sum", flat)


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    c = 1.0
    for f in map(_lift, factors):
        parts = f.args if f.kind == "prod" else (f,)
        for p in parts:
            if p.kind == "const":
                c *= p.value
            else:
                flat.append(p)
    if c == 0.0:
        return ZERO
    if not flat:
        return const(c)
    if c != 1.0:
        flat.insert(0, const(c))
    if len(flat) == 1:
        return flat[0]
    return Expr("prod", flat)


def power(base, exponent) -> Expr:
    base, exponent = _lift(base), _lift(exponent)
    if exponent.kind == "const":
        if exponent.value == 0.0:
            return ONE
        if exponent.value == 1.0:
            return base
        if base.kind == "const":
            folded = _try_fold(lambda: base.value ** exponent.value)
            if folded is not None:
                return folded
        if base.kind == "pow" and base.args[1].kind == "const" and float(exponent.value).is_integer():
            return power(base.args[0], const(base.args[1].value * exponent.value))
    if base.kind == "const" and base.value == 1.0:
        return ONE
    return Expr("pow", (base, exponent))


def _try_fold(fn) -> Expr | None:
    try:
        v = fn()
    except (ValueError, OverflowError, ZeroDivisionError):
        return None
    if isinstance(v, complex) or not math.isfinite(v):
        return None
    return const(v)


def _unary(kind: str, fn):
    def build(arg) -> Expr:
        arg = _lift(arg)
        if arg.kind == "const":
            folded = _try_fold(lambda: fn(arg.value))
            if folded is not None:
                return folded
        if kind == "ln" and arg.kind == "exp":
            return arg.args[0]
        return Expr(kind, (arg,))

    build.__name__ = kind
    return build


exp = _unary("exp", math.exp)
ln = _unary("ln", math.log)
sin = _unary("sin", math.sin)
cos = _unary("cos", math.cos)


def bump(spec: BumpSpec, arg, order: int = 0) -> Expr:
    """The ``order``-th derivative of the step ``spec`` composed with ``arg``."""
    arg = _lift(arg)
    if arg.kind == "const":
        return const(float(_bump_eval(spec, np.asarray(arg.value), order)))
    return Expr("bump", (arg,), spec=spec, order=order)


# ---------------------------------------------------------------------------
# bump evaluation

_SMOOTHSTEP = np.polynomial.Polynomial([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])


@lru_cache(maxsize=None)
def _smoothstep_derivative(order: int):
    return _SMOOTHSTEP.deriv(order) if order else _SMOOTHSTEP


@lru_cache(maxsize=None)
def _exp_step_derivative(order: int) -> Expr:
    # 1 / (1 + exp(1/u - 1/(1-u))) on the open interval (0, 1)
    u = coord("_u")
    e = power(add(ONE, exp(add(power(u, -1.0), mul(-1.0, power(add(ONE, mul(-1.0, u)), -1.0))))), -1.0)
    for _ in range(order):
        e = simplify(differentiate(e, "_u"))
    return e


def _bump_eval(spec: BumpSpec, x: np.ndarray, order: int) -> np.ndarray:
    u = (x - spec.eps) / spec.width
    inside = (u > 0.0) & (u < 1.0)
    out = np.zeros_like(u, dtype=float)
    if order == 0:
        out = np.where(u >= 1.0, 1.0, out)
    if np.any(inside):
        ui = u[inside] if u.ndim else u
        if spec.kind == "polynomial":
            vals = _smoothstep_derivative(order)(ui)
        else:
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                vals = np.asarray(_eval(_exp_step_derivative(order), {"_u": ui}, {}), dtype=float)
            vals = np.nan_to_num(vals, nan=0.0, posinf=0.0, neginf=0.0)
        vals = vals / spec.width**order
        if u.ndim:
            out[inside] = vals
        else:
            out = np.asarray(vals, dtype=float)
    return out


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Expr, coord_name: str, coords: Iterable[str] | None = None) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``coord_name``.

    Raises ``KeyError`` if ``coord_name`` is not among ``coords`` (when given)
    or names a parameter of ``e``.
    """
    if coords is not None and coord_name not in set(coords):
        raise KeyError(f"unknown coordinate {coord_name!r}")
    if coord_name in e.params:
        raise KeyError(f"{coord_name!r} is a parameter, not a coordinate")
    return _diff(e, coord_name, {})


def _diff(e: Expr, x: str, memo: dict) -> Expr:
    if x not in e.coords:
        return ZERO
    hit = memo.get(e)
    if hit is not None:
        return hit
    k = e.kind
    if k == "coord":
        out = ONE
    elif k == "sum":
        out = add(*(_diff(a, x, memo) for a in e.args))
    elif k == "prod":
        terms = []
        for i, a in enumerate(e.args):
            da = _diff(a, x, memo)
            if da is ZERO or (da.kind == "const" and da.value == 0.0):
                continue
            terms.append(mul(*e.args[:i], da, *e.args[i + 1:]))
        out = add(*terms)
    elif k == "pow":
        b, p = e.args
        db, dp = _diff(b, x, memo), _diff(p, x, memo)
        if x not in p.coords:
            out = mul(p, power(b, add(p, const(-1.0))), db)
        elif x not in b.coords:
            out = mul(e, ln(b), dp)
        else:
            out = mul(e, add(mul(dp, ln(b)), mul(p, db, power(b, -1.0))))
    elif k == "exp":
        out = mul(e, _diff(e.args[0], x, memo))
    elif k == "ln":
        a = e.args[0]
        out = mul(_diff(a, x, memo), power(a, -1.0))
    elif k == "sin":
        out = mul(cos(e.args[0]), _diff(e.args[0], x, memo))
    elif k == "cos":
        out = mul(const(-1.0), sin(e.args[0]), _diff(e.args[0], x, memo))
    elif k == "bump":
        a = e.args[0]
        out = mul(bump(e.spec, a, e.order + 1), _diff(a, x, memo))
    else:  # const, param
        out = ZERO
    memo[e] = out
    return out


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e: Expr, point: Mapping[str, object], params: Mapping[str, float] | None = None):
    """Numeric value of ``e``.

    ``point`` maps coordinate names to floats or equally shaped arrays;
    ``params`` binds parameter names. Returns a float for scalar input and an
    array otherwise. Raises ``KeyError`` for unbound symbols and
    :class:`DomainError` for non-finite results.
    """
    env = dict(params or {})
    env.update(point)
    missing = [n for n in (e.coords | e.params) if n not in env]
    if missing:
        raise KeyError(f"unassigned symbol(s): {', '.join(sorted(missing))}")
    with np.errstate(all="ignore"):
        val = _eval(e, env, {})
    arr = np.asarray(val, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"non-finite value evaluating {to_text(e)}")
    return float(arr) if arr.ndim == 0 else arr


def _eval(e: Expr, env, memo):
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    k = e.kind
    if k == "const":
        v = e.value
    elif k in ("coord", "param"):
        v = np.asarray(env[e.name], dtype=float)
    elif k == "sum":
        v = _eval(e.args[0], env, memo)
        for a in e.args[1:]:
            v = v + _eval(a, env, memo)
    elif k == "prod":
        v = _eval(e.args[0], env, memo)
        for a in e.args[1:]:
            v = v * _eval(a, env, memo)
    elif k == "pow":
        b = _eval(e.args[0], env, memo)
        p = e.args[1]
        if p.kind == "const" and float(p.value).is_integer():
            v = np.power(np.asarray(b, dtype=float), int(p.value)) if p.value >= 0 else 1.0 / np.power(
                np.asarray(b, dtype=float), int(-p.value)
            )
        else:
            v = np.power(np.asarray(b, dtype=float), _eval(p, env, memo))
    elif k == "exp":
        v = np.exp(_eval(e.args[0], env, memo))
    elif k == "ln":
        a = np.asarray(_eval(e.args[0], env, memo), dtype=float)
        if np.any(a <= 0):
            raise DomainError(f"ln of non-positive value in {to_text(e)}")
        v = np.log(a)
    elif k == "sin":
        v = np.sin(_eval(e.args[0], env, memo))
    elif k == "cos":
        v = np.cos(_eval(e.args[0], env, memo))
    elif k == "bump":
        v = _bump_eval(e.spec, np.asarray(_eval(e.args[0], env, memo), dtype=float), e.order)
    else:
        raise ValueError(f"unknown node kind {k!r}")
    memo[id(e)] = v
    return v


# ---------------------------------------------------------------------------
# simplification


def simplify(e: Expr) -> Expr:
    """Best-effort simplification.

    Guarantees folding of ``0*x``, ``x+0``, ``x^0`` and structural
    cancellation of like terms (so ``a - a`` becomes 0). Constant multiples
    of sums are distributed, and like factors in a product are merged into
    powers.
    """
    return _simp(e, {})


def _split_coef(t: Expr) -> tuple[float, Expr]:
    if t.kind == "const":
        return t.value, ONE
    if t.kind == "prod" and t.args[0].kind == "const":
        rest = t.args[1:]
        return t.args[0].value, rest[0] if len(rest) == 1 else Expr("prod", rest)
    return 1.0, t


def _split_pow(f: Expr) -> tuple[Expr, Expr]:
    if f.kind == "pow":
        return f.args[0], f.args[1]
    return f, ONE


def _simp(e: Expr, memo: dict) -> Expr:
    hit = memo.get(e)
    if hit is not None:
        return hit
    k = e.kind
    if k in ("const", "coord", "param"):
        out = e
    elif k == "sum":
        terms = add(*(_simp(a, memo) for a in e.args))
        parts = terms.args if terms.kind == "sum" else (terms,)
        coefs: dict[Expr, float] = {}
        order: list[Expr] = []
        for p in parts:
            c, rest = _split_coef(p)
            # constant multiples of sums are opened up so their terms can cancel
            inner = rest.args if rest.kind == "sum" else (rest,)
            for q in inner:
                ci, r = _split_coef(q) if rest.kind == "sum" else (1.0, q)
                if r not in coefs:
                    coefs[r] = 0.0
                    order.append(r)
                coefs[r] += c * ci
        out = add(*(mul(const(coefs[r]), r) for r in order if coefs[r] != 0.0))
    elif k == "prod":
        factors = mul(*(_simp(a, memo) for a in e.args))
        parts = factors.args if factors.kind == "prod" else (factors,)
        exps: dict[Expr, list[Expr]] = {}
        order = []
        c = 1.0
        for p in parts:
            if p.kind == "const":
                c *= p.value
                continue
            b, x = _split_pow(p)
            if b not in exps:
                exps[b] = []
                order.append(b)
            exps[b].append(x)
        merged = [power(b, _simp(add(*exps[b]), memo)) for b in order]
        if len(merged) == 1 and merged[0].kind == "sum" and c != 1.0:
            out = _simp(add(*(mul(c, t) for t in merged[0].args)), memo)
        else:
            out = mul(const(c), *merged)
    elif k == "pow":
        out = power(_simp(e.args[0], memo), _simp(e.args[1], memo))
    elif k in _UNARY:
        out = {"exp": exp, "ln": ln, "sin": sin, "cos": cos}[k](_simp(e.args[0], memo))
    elif k == "bump":
        out = bump(e.spec, _simp(e.args[0], memo), e.order)
    else:
        raise ValueError(f"unknown node kind {k!r}")
    memo[e] = out
    return out


def is_zero(e: Expr) -> bool:
    """True if ``e`` simplifies to the constant 0 (a one-sided test)."""
    s = simplify(e)
    return s.kind == "const" and s.value == 0.0


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace coordinates (and parameters) named in ``mapping``."""
    mapping = {k: _lift(v) for k, v in mapping.items()}
    return _subst(e, mapping, {})


def _subst(e: Expr, mapping, memo) -> Expr:
    if not ((e.coords | e.params) & mapping.keys()):
        return e
    hit = memo.get(e)
    if hit is not None:
        return hit
    k = e.kind
    if k in ("coord", "param"):
        out = mapping[e.name]
    else:
        args = [_subst(a, mapping, memo) for a in e.args]
        if k == "sum":
            out = add(*args)
        elif k == "prod":
            out = mul(*args)
        elif k == "pow":
            out = power(*args)
        elif k == "bump":
            out = bump(e.spec, args[0], e.order)
        else:
            out = {"exp": exp, "ln": ln, "sin": sin, "cos": cos}[k](args[0])
    memo[e] = out
    return out


# ---------------------------------------------------------------------------
# text form

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


class ParseError(ValueError):
    def __init__(self, msg: str, text: str, pos: int):
        super().__init__(f"{msg} at column {pos + 1} in {text!r}")
        self.pos = pos


def _tokenize(text: str):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        num, name, op = m.groups()
        start = m.start(m.lastindex) if m.lastindex else pos
        if num is not None:
            toks.append(("num", float(num), start))
        elif name is not None:
            toks.append(("name", name, start))
        elif op is not None:
            toks.append(("op", op, start))
        pos = m.end()
    toks.append(("end", None, len(text)))
    return toks


def parse(
    text: str,
    coords: Iterable[str] = (),
    bumps: Mapping[str, BumpSpec] | None = None,
) -> Expr:
    """Parse ``text`` (see module docstring for the grammar).

    Names listed in ``coords`` become coordinates, other names parameters.
    """
    coords = set(coords)
    bumps = dict(bumps or {})
    toks = _tokenize(text)
    i = 0

    def peek():
        return toks[i]

    def take(kind=None, value=None):
        nonlocal i
        tok = toks[i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value or kind
            raise ParseError(f"expected {want!r}, found {tok[1]!r}", text, tok[2])
        i += 1
        return tok

    def expr_():
        e = term()
        while peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            r = term()
            e = e + r if op == "+" else e - r
        return e

    def term():
        e = unary()
        while peek()[0] == "op" and peek()[1] in "*/":
            op = take()[1]
            r = unary()
            e = e * r if op == "*" else e / r
        return e

    def unary():
        if peek() == ("op", "-", peek()[2]):
            take()
            return -unary()
        if peek() == ("op", "+", peek()[2]):
            take()
            return unary()
        return pow_()

    def pow_():
        base = atom()
        if peek()[0] == "op" and peek()[1] == "^":
            take()
            return power(base, unary())
        return base

    def atom():
        tok = peek()
        if tok[0] == "num":
            take()
            return const(tok[1])
        if tok[0] == "op" and tok[1] == "(":
            take()
            e = expr_()
            take("op", ")")
            return e
        if tok[0] == "name":
            take()
            name = tok[1]
            if peek()[0] == "op" and peek()[1] == "(":
                take()
                if name == "bump":
                    return bump_call(tok)
                args = [expr_()]
                while peek()[0] == "op" and peek()[1] == ",":
                    take()
                    args.append(expr_())
                take("op", ")")
                fn = {"exp": exp, "ln": ln, "sin": sin, "cos": cos,
                      "sqrt": lambda a: power(a, 0.5)}.get(name)
                if fn is None:
                    raise ParseError(f"unknown function {name!r}", text, tok[2])
                if len(args) != 1:
                    raise ParseError(f"{name} takes one argument", text, tok[2])
                return fn(args[0])
            if name == "pi":
                return const(math.pi)
            if name == "e":
                return const(math.e)
            return coord(name) if name in coords else param(name)
        raise ParseError(f"unexpected {tok[1]!r}", text, tok[2])

    def bump_call(tok):
        ntok = take("name")
        spec = bumps.get(ntok[1])
        if spec is None:
            raise ParseError(f"undeclared bump {ntok[1]!r}", text, ntok[2])
        arg, order = None, 0
        if peek()[0] == "op" and peek()[1] == ",":
            take()
            arg = expr_()
            if peek()[0] == "op" and peek()[1] == ",":
                take()
                order = int(take("num")[1])
        take("op", ")")
        if arg is None:
            if spec.var is None:
                raise ParseError(f"bump {ntok[1]!r} has no declared variable", text, tok[2])
            arg = coord(spec.var) if spec.var in coords else param(spec.var)
        return bump(spec, arg, order)

    e = expr_()
    if peek()[0] != "end":
        raise ParseError(f"unexpected {peek()[1]!r}", text, peek()[2])
    return e


_PREC = {"sum": 1, "prod": 2, "pow": 4}


def to_text(e: Expr) -> str:
    """Render ``e`` in the :func:`parse` grammar (round-trips numerically)."""
    k = e.kind
    if k == "const":
        return repr(e.value) if e.value >= 0 else f"({e.value!r})"
    if k in ("coord", "param"):
        return e.name
    if k == "sum":
        return " + ".join(_wrap(a, 1) for a in e.args)
    if k == "prod":
        return "*".join(_wrap(a, 2) for a in e.args)
    if k == "pow":
        return f"{_wrap(e.args[0], 5)}^{_wrap(e.args[1], 5)}"
    if k == "bump":
        name = e.spec.name or "?"
        return f"bump({name}, {to_text(e.args[0])}, {e.order})" if e.order else f"bump({name}, {to_text(e.args[0])})"
    return f"{k}({to_text(e.args[0])})"


def _wrap(e: Expr, prec: int) -> str:
    s = to_text(e)
    return f"({s})" if _PREC.get(e.kind, 9) < prec else s
