"""Perceived marginal price under a weighting kernel F_q on [0, q].

A consumer at consumption q perceives

    P~'(q) = integral over [0, q] of P'(q - eps) dF_q(eps),

so a point mass at eps = 0 gives the true marginal price and the uniform
law on [0, q] gives the average price P(q)/q. Every built-in kernel has a
mean linear in q, E[eps] = a1 * q, which is what the closed-form results
for quadratic tariffs need.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import ClassVar, Optional, Union

import numpy as np

from .errors import AssumptionViolation, ConfigError, DomainError
from .numerics import adaptive_simpson
from .tariffs import PriceScheme

__all__ = [
    "Dirac0",
    "Uniform",
    "MixDirac",
    "BetaMix",
    "Custom",
    "PerceptionKernel",
    "perceived_marginal",
    "perceived_marginal_quadrature",
    "mean_fraction",
    "effective_kinks",
    "kernel_to_config",
    "kernel_from_config",
]

LINEAR_MEAN_TOL = 1e-9


def _unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class Dirac0:
    """All weight at eps = 0: the consumer sees the true marginal price."""

    kind: ClassVar[str] = "dirac0"

    def atoms(self, q):
        return ((0.0, 1.0),)

    continuous_mass = 0.0


@dataclass(frozen=True)
class Uniform:
    """Uniform weight on [0, q]: the consumer sees the average price."""

    kind: ClassVar[str] = "uniform"

    def atoms(self, q):
        return ()

    continuous_mass = 1.0


@dataclass(frozen=True)
class MixDirac:
    """Mass ``lam`` at eps = q (perceives P'(0)) and 1 - lam at eps = 0."""

    lam: float
    kind: ClassVar[str] = "mix_dirac"

    def __post_init__(self):
        object.__setattr__(self, "lam", _unit_interval("lambda", self.lam))

    def atoms(self, q):
        return ((q, self.lam), (0.0, 1.0 - self.lam))

    continuous_mass = 0.0


@dataclass(frozen=True)
class BetaMix:
    """Average price with weight ``beta``, marginal price with weight 1 - beta."""

    beta: float
    kind: ClassVar[str] = "beta_mix"

    def __post_init__(self):
        object.__setattr__(self, "beta", _unit_interval("beta", self.beta))

    def atoms(self, q):
        return ((0.0, 1.0 - self.beta),)

    @property
    def continuous_mass(self) -> float:
        return self.beta


@dataclass(frozen=True)
class Custom:
    """Discrete kernel given by nodes/weights on [0, 1], rescaled by q.

    ``sampler`` optionally replaces the fixed nodes with a q-dependent law:
    it maps q to ``(eps, weights)`` with eps in absolute units on [0, q].
    Such kernels are checked for a linear mean before use.
    """

    nodes: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    sampler: Optional[Callable[[float], tuple]] = None
    kind: ClassVar[str] = "custom"

    def __post_init__(self):
        nodes = tuple(float(x) for x in self.nodes)
        weights = tuple(float(w) for w in self.weights)
        if self.sampler is None:
            if not nodes or len(nodes) != len(weights):
                raise DomainError("custom kernel needs equally many nodes and weights")
            if any(not 0.0 <= x <= 1.0 for x in nodes):
                raise DomainError("custom kernel nodes must lie in [0, 1]")
            if any(w < 0.0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-12:
                raise DomainError("custom kernel weights must be nonnegative and sum to 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def atoms(self, q):
        if self.sampler is None:
            return tuple((x * q, w) for x, w in zip(self.nodes, self.weights))
        eps, w = self.sampler(q)
        eps = np.asarray(eps, dtype=float)
        w = np.asarray(w, dtype=float)
        if np.any(eps < -1e-15) or np.any(eps > q * (1 + 1e-12) + 1e-15) or abs(w.sum() - 1.0) > 1e-12:
            raise AssumptionViolation(f"sampler at q={q} is not a probability law on [0, q]")
        return tuple(zip(eps.tolist(), w.tolist()))

    continuous_mass = 0.0


PerceptionKernel = Union[Dirac0, Uniform, MixDirac, BetaMix, Custom]


def mean_fraction(kernel: PerceptionKernel) -> float:
    """The constant a1 with E[eps] = a1 * q.

    Custom kernels are also checked at q in {0.5, 1, 2}; a mismatch above
    1e-9 raises ``AssumptionViolation``.
    """
    if isinstance(kernel, Dirac0):
        return 0.0
    if isinstance(kernel, Uniform):
        return 0.5
    if isinstance(kernel, MixDirac):
        return kernel.lam
    if isinstance(kernel, BetaMix):
        return 0.5 * kernel.beta
    a1 = math.fsum(e * w for e, w in kernel.atoms(1.0))
    for q in (0.5, 1.0, 2.0):
        m = math.fsum(e * w for e, w in kernel.atoms(q))
        if abs(m - a1 * q) > LINEAR_MEAN_TOL:
            raise AssumptionViolation(f"kernel mean at q={q} is {m:.12g}, not a1*q = {a1 * q:.12g}")
    return a1


def perceived_marginal(kernel: PerceptionKernel, scheme: PriceScheme, q: float, side: str = "right") -> float:
    """P~'(q) from the kernel's closed form (a finite sum for discrete kernels)."""
    if q < 0.0:
        raise DomainError(f"quantity must be nonnegative, got {q}")
    if q == 0.0:
        return scheme.marginal(0.0)
    if isinstance(kernel, Dirac0):
        return scheme.marginal(q, side)
    if isinstance(kernel, Uniform):
        return scheme.price(q) / q
    if isinstance(kernel, MixDirac):
        return kernel.lam * scheme.marginal(0.0) + (1.0 - kernel.lam) * scheme.marginal(q, side)
    if isinstance(kernel, BetaMix):
        return kernel.beta * scheme.price(q) / q + (1.0 - kernel.beta) * scheme.marginal(q, side)
    return math.fsum(w * scheme.marginal(max(q - e, 0.0), side) for e, w in kernel.atoms(q))


def perceived_marginal_quadrature(kernel: PerceptionKernel, scheme: PriceScheme, q: float, tol: float = 1e-12) -> float:
    """P~'(q) by integrating P' against the kernel directly.

    Atoms are summed and the uniform part is integrated with adaptive
    Simpson, using the scheme's kinks (mapped to eps = q - kink) as panel
    boundaries. Independent of the closed forms in ``perceived_marginal``.
    """
    if q < 0.0:
        raise DomainError(f"quantity must be nonnegative, got {q}")
    if q == 0.0:
        return scheme.marginal(0.0)
    total = math.fsum(w * scheme.marginal(max(q - e, 0.0)) for e, w in kernel.atoms(q))
    mass = kernel.continuous_mass
    if mass:
        cuts = [q - k for k in scheme.kinks if 0.0 < k < q]
        integral = adaptive_simpson(lambda e: scheme.marginal(q - e), 0.0, q, tol=tol * q, breakpoints=cuts)
        total += mass * integral / q
    return total


def effective_kinks(kernel: PerceptionKernel, scheme: PriceScheme, q_hi: float) -> list[float]:
    """Quantities in (0, q_hi] where P~' may jump or kink."""
    kinks = [k for k in scheme.kinks if k > 0.0]
    if isinstance(kernel, Custom) and kernel.sampler is None:
        out = {k / (1.0 - x) for k in kinks for x in kernel.nodes if x < 1.0}
    elif isinstance(kernel, Custom):
        out = set(kinks)
    else:
        out = set(kinks)
    return sorted(k for k in out if k <= q_hi)


def kernel_to_config(kernel: PerceptionKernel) -> dict:
    if isinstance(kernel, MixDirac):
        return {"kind": kernel.kind, "lambda": kernel.lam}
    if isinstance(kernel, BetaMix):
        return {"kind": kernel.kind, "beta": kernel.beta}
    if isinstance(kernel, Custom):
        if kernel.sampler is not None:
            raise ConfigError("sampler-based custom kernels cannot be serialized", "kernel")
        return {"kind": kernel.kind, "nodes": list(kernel.nodes), "weights": list(kernel.weights)}
    return {"kind": kernel.kind}


def kernel_from_config(block: dict, where: str = "kernel") -> PerceptionKernel:
    if not isinstance(block, dict):
        raise ConfigError("expected an object", where)
    kind = str(block.get("kind", "")).lower().replace("-", "_")
    try:
        if kind == "dirac0":
            return Dirac0()
        if kind == "uniform":
            return Uniform()
        if kind == "mix_dirac":
            return MixDirac(block["lambda"])
        if kind == "beta_mix":
            return BetaMix(block["beta"])
        if kind == "custom":
            return Custom(tuple(block["nodes"]), tuple(block["weights"]))
    except KeyError as exc:
        raise ConfigError("missing field", f"{where}.{exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where) from exc
    raise ConfigError(
        f"unknown kernel kind {block.get('kind')!r}; expected dirac0, uniform, mix_dirac, beta_mix or custom",
        f"{where}.kind",
    )
