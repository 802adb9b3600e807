"""Compartment models: reaction terms, rates, kernels and artificial diffusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArityMismatch, NegativeRate, NonSmoothReaction
from .kernels import KernelMatrix, KernelSpec


@dataclass(frozen=True)
class SIR:
    arity = 3
    conservative = True


@dataclass(frozen=True)
class SIS:
    arity = 2
    conservative = True


@dataclass(frozen=True, eq=False)
class GenericC1:
    """Arbitrary pointwise reaction ``g(u)``.

    ``g`` takes an array of shape ``(k, ...)`` (one row per compartment) and
    returns the same shape.  It is probed with finite differences at
    construction; that catches blow-ups, not every non-C1 function.
    """

    g: Callable[[np.ndarray], np.ndarray]
    arity: int
    conservative: bool = False
    probe_seed: int = 0

    def __post_init__(self):
        rng = np.random.default_rng(self.probe_seed)
        h = 1e-6
        for point in rng.uniform(0.0, 2.0, size=(8, self.arity)):
            try:
                base = np.asarray(self.g(point), dtype=np.float64)
            except (IndexError, ValueError) as exc:
                raise ArityMismatch(f"reaction failed on a {self.arity}-vector: {exc}") from exc
            if base.shape != (self.arity,):
                raise ArityMismatch(f"reaction returned shape {base.shape} for {self.arity} compartments")
            if not np.all(np.isfinite(base)):
                raise NonSmoothReaction(f"reaction returned {base!r} at {point}")
            for i in range(self.arity):
                step = np.zeros(self.arity)
                step[i] = h
                jac = (np.asarray(self.g(point + step)) - np.asarray(self.g(point - step))) / (2 * h)
                if not np.all(np.isfinite(jac)):
                    raise NonSmoothReaction(f"non-finite Jacobian column {i} at {point}")


ReactionKind = SIR | SIS | GenericC1


def zero_reaction(u: np.ndarray) -> np.ndarray:
    return np.zeros_like(u)


@dataclass(frozen=True)
class ModelSpec:
    compartments: tuple[str, ...]
    kernel_matrix: KernelMatrix
    reaction: ReactionKind
    alpha: float = 0.0
    beta: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "epsilon"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise NegativeRate(f"{name} must be finite and >= 0, got {v}")
        if tuple(self.compartments) != self.kernel_matrix.compartments:
            raise ArityMismatch(
                f"compartments {self.compartments} do not match kernel matrix {self.kernel_matrix.compartments}"
            )
        if len(self.compartments) != self.reaction.arity:
            raise ArityMismatch(
                f"{type(self.reaction).__name__} reaction needs {self.reaction.arity} compartments, "
                f"got {len(self.compartments)}"
            )

    @property
    def arity(self) -> int:
        return len(self.compartments)

    @property
    def conservative(self) -> bool:
        return self.reaction.conservative


def _check_rates(alpha, beta, epsilon):
    for name, v in (("alpha", alpha), ("beta", beta), ("epsilon", epsilon)):
        if not np.isfinite(v) or v < 0:
            raise NegativeRate(f"{name} must be finite and >= 0, got {v}")


def make_sir(alpha: float, beta: float, km: KernelMatrix, epsilon: float = 0.0) -> ModelSpec:
    _check_rates(alpha, beta, epsilon)
    if km.compartments != ("S", "I", "R"):
        raise ArityMismatch(f"SIR needs compartments ('S', 'I', 'R'), got {km.compartments}")
    return ModelSpec(km.compartments, km, SIR(), float(alpha), float(beta), float(epsilon))


def make_sis(alpha: float, beta: float, shared_kernel: KernelSpec, epsilon: float = 0.0) -> ModelSpec:
    _check_rates(alpha, beta, epsilon)
    km = KernelMatrix.shared_kernel(("S", "I"), shared_kernel)
    return ModelSpec(km.compartments, km, SIS(), float(alpha), float(beta), float(epsilon))


def make_generic(
    km: KernelMatrix,
    g: Callable[[np.ndarray], np.ndarray] | None = None,
    epsilon: float = 0.0,
    conservative: bool = False,
) -> ModelSpec:
    """Model with an arbitrary C1 reaction; ``g=None`` means pure transport."""
    _check_rates(0.0, 0.0, epsilon)
    if g is None:
        g, conservative = zero_reaction, True
    reaction = GenericC1(g, len(km.compartments), conservative)
    return ModelSpec(km.compartments, km, reaction, 0.0, 0.0, float(epsilon))


def reaction_rates(model: ModelSpec, u) -> np.ndarray:
    """Pointwise reaction rates. ``u`` has one leading entry per compartment."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[0] != model.arity:
        raise ArityMismatch(f"expected {model.arity} compartment values, got {u.shape[0]}")
    a, b = model.alpha, model.beta
    r = model.reaction
    if isinstance(r, SIR):
        s, i = u[0], u[1]
        infection = b * s * i
        recovery = a * i
        return np.stack([-infection, infection - recovery, recovery])
    if isinstance(r, SIS):
        s, i = u[0], u[1]
        infection = b * s * i
        recovery = a * i
        return np.stack([-infection + recovery, infection - recovery])
    out = np.asarray(r.g(u), dtype=np.float64)
    if out.shape != u.shape:
        raise ArityMismatch(f"reaction returned shape {out.shape} for input {u.shape}")
    return out
