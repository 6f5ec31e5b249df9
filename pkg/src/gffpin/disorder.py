"""Disorder laws, their log moment generating function, and tilting.

The disorder is an i.i.d. field of centered unit-variance variables.
All bound formulas go through lambda(beta) = log E[exp(beta * omega)];
the exponential tilt used by the fractional-moment argument shifts the
law so that the tilted mean of exp(beta*omega - lambda(beta) + h)
becomes exactly one at the root alpha(beta, h).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

_STANDARD_TOL = 1e-12


@dataclass(frozen=True)
class DisorderLaw:
    """Centered, unit-variance i.i.d. disorder; kinds: gaussian, rademacher,
    finite-support (values/probs standardized at construction)."""

    kind: str
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher", "finite"):
            raise ValueError(f"unknown disorder kind {self.kind!r}")
        if self.kind == "finite":
            v = np.asarray(self.values, dtype=float)
            p = np.asarray(self.probs, dtype=float)
            if v.size < 2 or v.size != p.size:
                raise ValueError("finite-support law needs matching values/probs")
            if (p <= 0).any():
                raise ValueError("probabilities must be positive")
            p = p / p.sum()
            mean = float(p @ v)
            var = float(p @ (v - mean) ** 2)
            if var <= 0:
                raise ValueError("degenerate finite-support law")
            v = (v - mean) / np.sqrt(var)
            object.__setattr__(self, "values", tuple(v))
            object.__setattr__(self, "probs", tuple(p))
            mean = float(p @ v)
            var = float(p @ np.square(v)) - mean**2
            assert abs(mean) < _STANDARD_TOL and abs(var - 1.0) < _STANDARD_TOL

    # lam is finite for all beta for every supported kind (gaussian or
    # bounded support), so the finiteness window is the whole line.
    def lam(self, beta: float) -> float:
        """log E[exp(beta * omega)]."""
        beta = float(beta)
        if not np.isfinite(beta):
            raise ValueError("beta outside finiteness window")
        if self.kind == "gaussian":
            return 0.5 * beta * beta
        if self.kind == "rademacher":
            # log cosh, stable for large |beta|
            a = abs(beta)
            return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)
        v = np.asarray(self.values)
        p = np.asarray(self.probs)
        return float(logsumexp(beta * v, b=p))

    def lam_prime(self, beta: float) -> float:
        """d/dbeta of lam."""
        beta = float(beta)
        if self.kind == "gaussian":
            return beta
        if self.kind == "rademacher":
            return float(np.tanh(beta))
        v = np.asarray(self.values)
        p = np.asarray(self.probs)
        w = p * np.exp(beta * v - self.lam(beta))
        return float(w @ v)

    def draw(self, size, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=size) * 2.0 - 1.0
        return rng.choice(np.asarray(self.values), size=size, p=np.asarray(self.probs))


def gaussian_law() -> DisorderLaw:
    return DisorderLaw("gaussian")


def rademacher_law() -> DisorderLaw:
    return DisorderLaw("rademacher")


def finite_support_law(values, probs) -> DisorderLaw:
    return DisorderLaw("finite", tuple(values), tuple(probs))


def law_from_spec(spec) -> DisorderLaw:
    """Config-facing constructor: 'gaussian' | 'rademacher' |
    {'kind': 'finite', 'values': [...], 'probs': [...]}."""
    if isinstance(spec, DisorderLaw):
        return spec
    if isinstance(spec, str):
        return DisorderLaw(spec) if spec != "finite" else finite_support_law((1, -1), (0.5, 0.5))
    return finite_support_law(spec["values"], spec["probs"])


@dataclass(frozen=True)
class DisorderSample:
    """One realization of omega on an ordered site list."""

    sites: np.ndarray
    values: np.ndarray
    seed: object = None


def sample(law: DisorderLaw, sites, rng: np.random.Generator, seed=None) -> DisorderSample:
    sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
    values = law.draw(len(sites), rng)
    return DisorderSample(sites=sites, values=values, seed=seed)


def tilt_check(law: DisorderLaw, beta: float, h: float, alpha: float) -> float:
    """Mean of exp(beta*omega - lambda(beta) + h) under the tilt
    dP~/dP = exp(-alpha*omega - lambda(-alpha)).

    Equals exp(lam(beta-alpha) - lam(-alpha) - lam(beta) + h); this is 1
    exactly when alpha solves the fractional-moment root equation.
    """
    return float(np.exp(law.lam(beta - alpha) - law.lam(-alpha) - law.lam(beta) + h))
