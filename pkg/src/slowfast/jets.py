"""Truncated Taylor (jet) arithmetic for forward higher-order differentiation."""

from __future__ import annotations

import math


class Jet:
    """Taylor polynomial of a quantity around a base point, truncated at
    total degree ``order`` in ``nvars`` expansion directions.

    Coefficients are Taylor coefficients (derivative / factorial), keyed by
    exponent tuples.
    """

    __slots__ = ("nvars", "order", "coef")

    def __init__(self, nvars, order, coef=None):
        self.nvars = nvars
        self.order = order
        self.coef = dict(coef) if coef else {}

    @classmethod
    def const(cls, value, nvars, order):
        j = cls(nvars, order)
        if value != 0.0:
            j.coef[(0,) * nvars] = float(value)
        return j

    @classmethod
    def var(cls, value, index, nvars, order):
        """Jet of the coordinate function x_index seeded at ``value``."""
        j = cls.const(value, nvars, order)
        if order >= 1:
            key = tuple(1 if i == index else 0 for i in range(nvars))
            j.coef[key] = j.coef.get(key, 0.0) + 1.0
        return j

    @property
    def value(self):
        return self.coef.get((0,) * self.nvars, 0.0)

    def grad(self, index):
        """First derivative with respect to direction ``index``."""
        key = tuple(1 if i == index else 0 for i in range(self.nvars))
        return self.coef.get(key, 0.0)

    def derivative(self, orders):
        """Mixed derivative value for an exponent tuple (includes factorials)."""
        scale = 1.0
        for e in orders:
            scale *= math.factorial(e)
        return self.coef.get(tuple(orders), 0.0) * scale

    def diff(self, index):
        """Jet of the partial derivative along direction ``index`` (one order lower)."""
        out = Jet(self.nvars, self.order - 1)
        for key, v in self.coef.items():
            if key[index] == 0:
                continue
            newkey = tuple(e - 1 if i == index else e for i, e in enumerate(key))
            out.coef[newkey] = out.coef.get(newkey, 0.0) + v * key[index]
        return out

    def truncated(self, order):
        out = Jet(self.nvars, order)
        out.coef = {k: v for k, v in self.coef.items() if sum(k) <= order}
        return out

    def _blank(self):
        return Jet(self.nvars, self.order)

    def __add__(self, other):
        out = self._blank()
        out.coef = dict(self.coef)
        if isinstance(other, Jet):
            for k, v in other.coef.items():
                out.coef[k] = out.coef.get(k, 0.0) + v
        else:
            z = (0,) * self.nvars
            out.coef[z] = out.coef.get(z, 0.0) + float(other)
        return out

    __radd__ = __add__

    def __neg__(self):
        out = self._blank()
        out.coef = {k: -v for k, v in self.coef.items()}
        return out

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __mul__(self, other):
        out = self._blank()
        if isinstance(other, Jet):
            for k1, v1 in self.coef.items():
                d1 = sum(k1)
                for k2, v2 in other.coef.items():
                    if d1 + sum(k2) > self.order:
                        continue
                    key = tuple(a + b for a, b in zip(k1, k2))
                    out.coef[key] = out.coef.get(key, 0.0) + v1 * v2
        else:
            f = float(other)
            out.coef = {k: v * f for k, v in self.coef.items()}
        return out

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0:
            return (self ** (-n)).reciprocal()
        out = Jet.const(1.0, self.nvars, self.order)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def reciprocal(self):
        a0 = self.value
        if a0 == 0.0:
            raise ZeroDivisionError("jet with zero constant term")
        # 1/a = (1/a0) * sum_i u^i with u = 1 - a/a0 (no constant term)
        u = 1.0 - self * (1.0 / a0)
        out = Jet.const(1.0, self.nvars, self.order)
        term = Jet.const(1.0, self.nvars, self.order)
        for _ in range(self.order):
            term = term * u
            out = out + term
        return out * (1.0 / a0)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / float(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def __repr__(self):
        items = sorted(self.coef.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        body = " + ".join(f"{v:.6g}*t^{k}" for k, v in items) or "0"
        return f"Jet[{self.order}]({body})"


def jet_variables(values, order):
    """Seed one jet variable per entry of ``values`` (joint expansion)."""
    n = len(values)
    return [Jet.var(v, i, n, order) for i, v in enumerate(values)]
