"""Boolean formulas over current-step and next-step atoms.

Nodes are immutable and hash-consed lazily (hash and atom set are cached), so
large specifications can be shared and compared cheaply.
"""
from __future__ import annotations

import re
from typing import Callable, Iterable

import numpy as np


class Formula:
    __slots__ = ("_hash", "_atoms")

    def atoms(self) -> frozenset:
        """Set of (name, is_next) pairs."""
        a = getattr(self, "_atoms", None)
        if a is None:
            a = self._compute_atoms()
            object.__setattr__(self, "_atoms", a)
        return a

    def names(self) -> frozenset:
        return frozenset(n for n, _ in self.atoms())

    def __hash__(self):
        h = getattr(self, "_hash", None)
        if h is None:
            h = hash(self._key())
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        return self is other or (type(self) is type(other) and hash(self) == hash(other) and self._key() == other._key())

    def __setattr__(self, k, v):
        raise AttributeError("formulas are immutable")

    def __repr__(self):
        return to_prefix(self)


class Const(Formula):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        object.__setattr__(self, "value", bool(value))

    def _key(self):
        return ("c", self.value)

    def _compute_atoms(self):
        return frozenset()


TRUE = Const(True)
FALSE = Const(False)


class Atom(Formula):
    __slots__ = ("name", "nxt")

    def __init__(self, name: str, nxt: bool = False):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "nxt", bool(nxt))

    def _key(self):
        return ("a", self.name, self.nxt)

    def _compute_atoms(self):
        return frozenset([(self.name, self.nxt)])


class Not(Formula):
    __slots__ = ("arg",)

    def __init__(self, arg: Formula):
        object.__setattr__(self, "arg", arg)

    def _key(self):
        return ("!", self.arg)

    def _compute_atoms(self):
        return self.arg.atoms()


class _NAry(Formula):
    __slots__ = ("args",)
    op = ""

    def __init__(self, args: Iterable[Formula]):
        object.__setattr__(self, "args", tuple(args))

    def _key(self):
        return (self.op, self.args)

    def _compute_atoms(self):
        out = set()
        for a in self.args:
            out |= a.atoms()
        return frozenset(out)


class And(_NAry):
    __slots__ = ()
    op = "&"


class Or(_NAry):
    __slots__ = ()
    op = "|"


class Implies(Formula):
    __slots__ = ("lhs", "rhs")

    def __init__(self, lhs, rhs):
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)

    def _key(self):
        return ("->", self.lhs, self.rhs)

    def _compute_atoms(self):
        return self.lhs.atoms() | self.rhs.atoms()


class Iff(Implies):
    __slots__ = ()

    def _key(self):
        return ("<->", self.lhs, self.rhs)


# -- builders ---------------------------------------------------------------

def cur(name: str) -> Atom:
    return Atom(name, False)


def nxt(name: str) -> Atom:
    return Atom(name, True)


def conj(*fs) -> Formula:
    fs = [f for f in (fs[0] if len(fs) == 1 and not isinstance(fs[0], Formula) else fs)]
    return fs[0] if len(fs) == 1 else And(fs)


def disj(*fs) -> Formula:
    fs = [f for f in (fs[0] if len(fs) == 1 and not isinstance(fs[0], Formula) else fs)]
    return fs[0] if len(fs) == 1 else Or(fs)


def lit(name: str, value: bool, next_step: bool = False) -> Formula:
    a = Atom(name, next_step)
    return a if value else Not(a)


# -- simplification -------------------------------------------------------------

def fold(f: Formula) -> Formula:
    """Constant folding and flattening; leaves constant-free formulas structurally intact."""
    if isinstance(f, (Const, Atom)):
        return f
    if isinstance(f, Not):
        a = fold(f.arg)
        if isinstance(a, Const):
            return FALSE if a.value else TRUE
        if isinstance(a, Not):
            return a.arg
        return f if a is f.arg else Not(a)
    if isinstance(f, _NAry):
        absorbing = isinstance(f, Or)
        out, changed = [], False
        for a in f.args:
            b = fold(a)
            changed |= b is not a
            if isinstance(b, Const):
                if b.value == absorbing:
                    return b
                changed = True
                continue
            if type(b) is type(f):
                out.extend(b.args)
                changed = True
            else:
                out.append(b)
        if not out:
            return Const(not absorbing)
        if len(out) == 1:
            return out[0]
        return type(f)(out) if changed else f
    if isinstance(f, Iff):
        l, r = fold(f.lhs), fold(f.rhs)
        if isinstance(l, Const) and isinstance(r, Const):
            return Const(l.value == r.value)
        for c, o in ((l, r), (r, l)):
            if isinstance(c, Const):
                return o if c.value else fold(Not(o))
        return f if (l is f.lhs and r is f.rhs) else Iff(l, r)
    if isinstance(f, Implies):
        l, r = fold(f.lhs), fold(f.rhs)
        if isinstance(l, Const):
            return r if l.value else TRUE
        if isinstance(r, Const):
            return TRUE if r.value else fold(Not(l))
        return f if (l is f.lhs and r is f.rhs) else Implies(l, r)
    raise TypeError(f)


def substitute(f: Formula, true_names=frozenset(), false_names=frozenset()) -> Formula:
    """Replace atoms (both layers) by constants, then fold.

    Formulas that mention none of the substituted names are returned as-is.
    """
    names = f.names()
    if names.isdisjoint(true_names) and names.isdisjoint(false_names):
        return f
    return fold(_subst(f, true_names, false_names))


def _subst(f, t, fl):
    if isinstance(f, Atom):
        if f.name in t:
            return TRUE
        if f.name in fl:
            return FALSE
        return f
    if isinstance(f, Const):
        return f
    if f.names().isdisjoint(t) and f.names().isdisjoint(fl):
        return f
    if isinstance(f, Not):
        return Not(_subst(f.arg, t, fl))
    if isinstance(f, _NAry):
        return type(f)([_subst(a, t, fl) for a in f.args])
    return type(f)(_subst(f.lhs, t, fl), _subst(f.rhs, t, fl))


# -- evaluation -------------------------------------------------------------------

def evaluate(f: Formula, current, following=()) -> bool:
    """Truth value given the sets of true current-step and next-step atom names."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Atom):
        return f.name in (following if f.nxt else current)
    if isinstance(f, Not):
        return not evaluate(f.arg, current, following)
    if isinstance(f, And):
        return all(evaluate(a, current, following) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, current, following) for a in f.args)
    if isinstance(f, Iff):
        return evaluate(f.lhs, current, following) == evaluate(f.rhs, current, following)
    return (not evaluate(f.lhs, current, following)) or evaluate(f.rhs, current, following)


def evaluate_vec(f: Formula, column: Callable[[str, bool], np.ndarray], n: int) -> np.ndarray:
    """Vectorized evaluation; ``column(name, is_next)`` yields a bool array of length n."""
    if isinstance(f, Const):
        return np.full(n, f.value)
    if isinstance(f, Atom):
        return column(f.name, f.nxt)
    if isinstance(f, Not):
        return ~evaluate_vec(f.arg, column, n)
    if isinstance(f, And):
        out = np.ones(n, dtype=bool)
        for a in f.args:
            out &= evaluate_vec(a, column, n)
        return out
    if isinstance(f, Or):
        out = np.zeros(n, dtype=bool)
        for a in f.args:
            out |= evaluate_vec(a, column, n)
        return out
    l, r = evaluate_vec(f.lhs, column, n), evaluate_vec(f.rhs, column, n)
    if isinstance(f, Iff):
        return l == r
    return ~l | r


# -- prefix notation ------------------------------------------------------------

def to_prefix(f: Formula) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f"(X {f.name})" if f.nxt else f.name
    if isinstance(f, Not):
        return f"(! {to_prefix(f.arg)})"
    if isinstance(f, _NAry):
        return "(" + " ".join([f.op] + [to_prefix(a) for a in f.args]) + ")"
    op = "<->" if isinstance(f, Iff) else "->"
    return f"({op} {to_prefix(f.lhs)} {to_prefix(f.rhs)})"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_prefix(text: str) -> Formula:
    toks = _TOKEN.findall(text)
    pos = 0

    def parse():
        nonlocal pos
        t = toks[pos]
        pos += 1
        if t != "(":
            if t == "true":
                return TRUE
            if t == "false":
                return FALSE
            return Atom(t, False)
        op = toks[pos]
        pos += 1
        if op == "X":
            a = Atom(toks[pos], True)
            pos += 2
            return a
        args = []
        while toks[pos] != ")":
            args.append(parse())
        pos += 1
        if op == "!":
            return Not(args[0])
        if op == "&":
            return And(args)
        if op == "|":
            return Or(args)
        if op == "->":
            return Implies(*args)
        if op == "<->":
            return Iff(*args)
        raise ValueError(f"unknown operator {op}")

    out = parse()
    if pos != len(toks):
        raise ValueError("trailing tokens")
    return out
