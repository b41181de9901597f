"""Named analytic scalar fields with closed-form gradients and Laplacians.

Fields are referenced from problem files by name plus parameters, e.g.
``{"name": "polar_power", "params": {"exponent": 1.5}}``.  Every field can
also be evaluated in mpmath for high-precision stencil checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numpy.polynomial import polynomial as npoly


class UnknownField(ValueError):
    pass


@dataclass(frozen=True)
class Field:
    name: str
    params: dict = field(default_factory=dict)

    def value(self, x, y):
        raise NotImplementedError

    def grad(self, x, y):
        raise NotImplementedError

    def laplacian(self, x, y):
        raise NotImplementedError

    def mp_value(self, x, y):
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}

    def __hash__(self):
        return hash((self.name, repr(sorted(self.params.items()))))


class ZeroField(Field):
    def __init__(self, name="zero", params=None):
        super().__init__("zero", {})

    def value(self, x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def grad(self, x, y):
        z = self.value(x, y)
        return z, z.copy()

    def laplacian(self, x, y):
        return self.value(x, y)

    def mp_value(self, x, y):
        return mpmath.mpf(0)


class PolynomialField(Field):
    """Bivariate polynomial ``sum_ij c[i][j] x^i y^j``."""

    def __init__(self, name="polynomial", params=None):
        params = dict(params or {})
        coeffs = params.get("coeffs", [[0.0]])
        super().__init__("polynomial", {"coeffs": [list(map(float, r)) for r in coeffs]})
        object.__setattr__(self, "_c", np.array(self.params["coeffs"], dtype=float))

    def value(self, x, y):
        return npoly.polyval2d(np.asarray(x, float), np.asarray(y, float), self._c)

    def grad(self, x, y):
        cx = npoly.polyder(self._c, axis=0)
        cy = npoly.polyder(self._c, axis=1)
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return npoly.polyval2d(x, y, cx), npoly.polyval2d(x, y, cy)

    def laplacian_coeffs(self) -> np.ndarray:
        cxx = npoly.polyder(self._c, 2, axis=0)
        cyy = npoly.polyder(self._c, 2, axis=1)
        n = max(cxx.shape[0], cyy.shape[0]), max(cxx.shape[1], cyy.shape[1])
        out = np.zeros(n)
        out[: cxx.shape[0], : cxx.shape[1]] += cxx
        out[: cyy.shape[0], : cyy.shape[1]] += cyy
        return out

    def laplacian(self, x, y):
        return npoly.polyval2d(np.asarray(x, float), np.asarray(y, float), self.laplacian_coeffs())

    def mp_value(self, x, y):
        total = mpmath.mpf(0)
        for i, row in enumerate(self.params["coeffs"]):
            for j, c in enumerate(row):
                if c:
                    total += mpmath.mpf(c) * x**i * y**j
        return total


class PolarPowerField(Field):
    """Harmonic ``scale * rho^p * cos(p*(theta - phase))`` around ``center``.

    The angle is taken on the branch ``[cut, cut + 2*pi)`` so the branch cut
    can be placed outside the domain.
    """

    def __init__(self, name="polar_power", params=None):
        p = {
            "exponent": 1.0,
            "phase": 0.0,
            "scale": 1.0,
            "center": [0.0, 0.0],
            "cut": -math.pi / 2,
        }
        p.update(params or {})
        p = {
            "exponent": float(p["exponent"]),
            "phase": float(p["phase"]),
            "scale": float(p["scale"]),
            "center": [float(p["center"][0]), float(p["center"][1])],
            "cut": float(p["cut"]),
        }
        super().__init__("polar_power", p)

    def _polar(self, x, y):
        cx, cy = self.params["center"]
        dx = np.asarray(x, float) - cx
        dy = np.asarray(y, float) - cy
        rho = np.hypot(dx, dy)
        cut = self.params["cut"]
        theta = np.mod(np.arctan2(dy, dx) - cut, 2 * math.pi) + cut
        return rho, theta

    def value(self, x, y):
        p, ph, s = self.params["exponent"], self.params["phase"], self.params["scale"]
        rho, theta = self._polar(x, y)
        return s * rho**p * np.cos(p * (theta - ph))

    def grad(self, x, y):
        p, ph, s = self.params["exponent"], self.params["phase"], self.params["scale"]
        rho, theta = self._polar(x, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = s * p * rho ** (p - 1) * np.cos(p * (theta - ph))
            angular = -s * p * rho ** (p - 1) * np.sin(p * (theta - ph))
        c, sn = np.cos(theta), np.sin(theta)
        gx = radial * c - angular * sn
        gy = radial * sn + angular * c
        return gx, gy

    def laplacian(self, x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def mp_value(self, x, y):
        p = mpmath.mpf(self.params["exponent"])
        ph = mpmath.mpf(self.params["phase"])
        s = mpmath.mpf(self.params["scale"])
        cx, cy = (mpmath.mpf(c) for c in self.params["center"])
        cut = mpmath.mpf(self.params["cut"])
        dx, dy = x - cx, y - cy
        rho = mpmath.sqrt(dx * dx + dy * dy)
        theta = mpmath.atan2(dy, dx)
        two_pi = 2 * mpmath.pi
        theta = theta - two_pi * mpmath.floor((theta - cut) / two_pi)
        return s * rho**p * mpmath.cos(p * (theta - ph))


class ConstantField(PolynomialField):
    def __init__(self, name="constant", params=None):
        value = float((params or {}).get("value", 0.0))
        super().__init__("polynomial", {"coeffs": [[value]]})
        object.__setattr__(self, "name", "constant")
        object.__setattr__(self, "params", {"value": value})

    def mp_value(self, x, y):
        return mpmath.mpf(self.params["value"])


class SumField(Field):
    """Pointwise sum of other fields (used for shifted lifting data)."""

    def __init__(self, name="sum", params=None):
        terms = [make_field(t) for t in (params or {}).get("terms", [])]
        weights = [float(w) for w in (params or {}).get("weights", [1.0] * len(terms))]
        super().__init__("sum", {"terms": [t.to_json() for t in terms], "weights": weights})
        object.__setattr__(self, "_terms", terms)

    def _combine(self, fn, x, y):
        out = 0.0
        for w, t in zip(self.params["weights"], self._terms):
            out = out + w * fn(t, x, y)
        return out + np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def value(self, x, y):
        return self._combine(lambda t, a, b: t.value(a, b), x, y)

    def grad(self, x, y):
        gx = self._combine(lambda t, a, b: t.grad(a, b)[0], x, y)
        gy = self._combine(lambda t, a, b: t.grad(a, b)[1], x, y)
        return gx, gy

    def laplacian(self, x, y):
        return self._combine(lambda t, a, b: t.laplacian(a, b), x, y)

    def mp_value(self, x, y):
        return sum(
            (mpmath.mpf(w) * t.mp_value(x, y) for w, t in zip(self.params["weights"], self._terms)),
            mpmath.mpf(0),
        )


_REGISTRY = {
    "zero": ZeroField,
    "constant": ConstantField,
    "polynomial": PolynomialField,
    "polar_power": PolarPowerField,
    "sum": SumField,
}


def field_names() -> list[str]:
    return sorted(_REGISTRY)


def make_field(ref) -> Field:
    """Build a field from a name, a ``{"name", "params"}`` dict or a Field."""
    if isinstance(ref, Field):
        return ref
    if isinstance(ref, str):
        ref = {"name": ref}
    if not isinstance(ref, dict) or "name" not in ref:
        raise UnknownField(f"bad field reference: {ref!r}")
    extra = set(ref) - {"name", "params"}
    if extra:
        raise UnknownField(f"unknown keys in field reference: {sorted(extra)}")
    cls = _REGISTRY.get(ref["name"])
    if cls is None:
        raise UnknownField(f"unknown field {ref['name']!r}; known: {field_names()}")
    return cls(ref["name"], ref.get("params", {}))


def negative_laplacian(f: Field) -> Field:
    """Exact ``-Laplace(f)`` for fields that have a closed-form rule."""
    if isinstance(f, (ZeroField, PolarPowerField)):
        return ZeroField()
    if isinstance(f, PolynomialField):
        return PolynomialField(params={"coeffs": (-f.laplacian_coeffs()).tolist()})
    if isinstance(f, SumField):
        terms = [negative_laplacian(t) for t in f._terms]
        return SumField(params={"terms": [t.to_json() for t in terms], "weights": f.params["weights"]})
    raise UnknownField(f"no symbolic Laplacian for {f.name!r}")


def polynomial_product(*factors) -> np.ndarray:
    """Coefficient array of a product of bivariate coefficient arrays."""
    from scipy.signal import convolve2d

    out = np.array([[1.0]])
    for f in factors:
        out = convolve2d(out, np.atleast_2d(np.asarray(f, float)))
    return out
