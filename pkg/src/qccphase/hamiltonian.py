"""Two-degree-of-freedom Hamiltonians with closed-form derivatives.

Phase points are ordered ``(q1, q2, p1, p2)``. Every model in this module is
a member of one polynomial family

    V(q) = (a/2) q1^2 q2^2 + (b/4) (q1^4 + q2^4) + (w1 q1^2 + w2 q2^2)/2 + c q1 q2

so the compiled kernels only need the five coefficients ``(a, b, w1, w2, c)``.
The coupled quartic oscillator uses ``a = alpha``, ``b = beta``; the quadratic
test model uses ``w = omega**2`` and an optional bilinear coupling ``c``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

QUARTIC = "quartic"
QUADRATIC = "quadratic-test"

#: Symplectic form ``[[0, I], [-I, 0]]`` in ``(q1, q2, p1, p2)`` ordering.
SYMPLECTIC_J = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
SYMPLECTIC_J.setflags(write=False)


@dataclass(frozen=True)
class ModelParams:
    kind: str = QUARTIC
    alpha: float = 1.0
    beta: float = 0.01
    omega: tuple[float, float] = (1.0, 1.0)
    coupling: float = 0.0

    def __post_init__(self):
        if self.kind == QUARTIC:
            if not self.beta > 0:
                raise ValueError(f"quartic model needs beta > 0, got {self.beta}")
            if not self.alpha >= 0:
                raise ValueError(f"quartic model needs alpha >= 0, got {self.alpha}")
        elif self.kind == QUADRATIC:
            w1, w2 = self.omega
            if not (w1 > 0 and w2 > 0):
                raise ValueError(f"quadratic-test frequencies must be positive, got {self.omega}")
            if self.coupling**2 >= (w1 * w2) ** 2:
                raise ValueError("quadratic-test coupling makes the potential indefinite")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "omega", (float(self.omega[0]), float(self.omega[1])))

    @classmethod
    def quartic(cls, alpha: float = 1.0, beta: float = 0.01) -> "ModelParams":
        return cls(QUARTIC, alpha=float(alpha), beta=float(beta))

    @classmethod
    def quadratic(cls, omega=(1.0, 1.0), coupling: float = 0.0) -> "ModelParams":
        return cls(QUADRATIC, alpha=0.0, beta=0.0, omega=tuple(omega), coupling=float(coupling))

    @property
    def coefficients(self) -> np.ndarray:
        """Polynomial coefficients ``(a, b, w1, w2, c)`` shared with the kernels."""
        if self.kind == QUARTIC:
            return np.array([self.alpha, self.beta, 0.0, 0.0, 0.0])
        w1, w2 = self.omega
        return np.array([0.0, 0.0, w1 * w1, w2 * w2, self.coupling])

    def swapped(self) -> "ModelParams":
        """Same model with the mode labels 1 and 2 exchanged."""
        if self.kind == QUARTIC:
            return self
        return ModelParams.quadratic(self.omega[::-1], self.coupling)


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1], x[..., 2], x[..., 3]


def potential(params: ModelParams, x) -> np.ndarray:
    a, b, w1, w2, c = params.coefficients
    q1, q2, _, _ = _split(x)
    return (0.5 * a * q1**2 * q2**2 + 0.25 * b * (q1**4 + q2**4)
            + 0.5 * (w1 * q1**2 + w2 * q2**2) + c * q1 * q2)


def energy(params: ModelParams, x) -> np.ndarray:
    """Total energy; accepts a single phase point or any ``(..., 4)`` stack."""
    _, _, p1, p2 = _split(x)
    return 0.5 * (p1**2 + p2**2) + potential(params, x)


def potential_gradient(params: ModelParams, x) -> np.ndarray:
    a, b, w1, w2, c = params.coefficients
    q1, q2, _, _ = _split(x)
    d1 = a * q1 * q2**2 + b * q1**3 + w1 * q1 + c * q2
    d2 = a * q1**2 * q2 + b * q2**3 + w2 * q2 + c * q1
    return np.stack([d1, d2], axis=-1)


def potential_hessian(params: ModelParams, x) -> np.ndarray:
    a, b, w1, w2, c = params.coefficients
    q1, q2, _, _ = _split(x)
    v11 = a * q2**2 + 3 * b * q1**2 + w1
    v22 = a * q1**2 + 3 * b * q2**2 + w2
    v12 = 2 * a * q1 * q2 + c
    return np.stack([np.stack([v11, v12], -1), np.stack([v12, v22], -1)], -2)


def flow_field(params: ModelParams, x) -> np.ndarray:
    """Hamilton's equations ``J dH/dgamma`` = ``(p1, p2, -dV/dq1, -dV/dq2)``."""
    x = np.asarray(x, dtype=float)
    return np.concatenate([x[..., 2:], -potential_gradient(params, x)], axis=-1)


def hessian(params: ModelParams, x) -> np.ndarray:
    """Full 4x4 phase-space Hessian of H (identity momentum block)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (4, 4))
    out[..., :2, :2] = potential_hessian(params, x)
    out[..., 2, 2] = 1.0
    out[..., 3, 3] = 1.0
    return out


def higher_derivatives(params: ModelParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Third and fourth phase-space derivative tensors of H at one point.

    Only position-block entries are nonzero and both tensors are fully
    symmetric. The fourth-order tensor is constant for this family.
    """
    a, b, _, _, _ = params.coefficients
    q1, q2 = float(np.asarray(x)[0]), float(np.asarray(x)[1])
    third = np.zeros((4, 4, 4))
    v3 = {(0, 0, 0): 6 * b * q1, (0, 0, 1): 2 * a * q2,
          (0, 1, 1): 2 * a * q1, (1, 1, 1): 6 * b * q2}
    fourth = np.zeros((4, 4, 4, 4))
    v4 = {(0, 0, 0, 0): 6 * b, (0, 0, 1, 1): 2 * a, (1, 1, 1, 1): 6 * b}
    for idx, val in v3.items():
        for perm in set(permutations(idx)):
            third[perm] = val
    for idx, val in v4.items():
        for perm in set(permutations(idx)):
            fourth[perm] = val
    return third, fourth

