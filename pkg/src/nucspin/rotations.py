"""SU(2) rotations of a spin-1/2, stored as unit quaternions.

A quaternion ``q = (w, x, y, z)`` stands for the unitary
``U = w*I - i*(x*sx + y*sy + z*sz)``, so a rotation by ``angle`` about the
unit vector ``n`` is ``(cos(angle/2), sin(angle/2)*n)``.  All array helpers
work on the last axis and broadcast over any leading batch shape.

The representation is faithful to SU(2), not only SO(3): a 2*pi rotation is
``-I``.  The electron coherence ``Tr(U0 U1^dagger) / 2`` depends on that sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def qmul(a, b):
    """Hamilton product ``a*b``: the unitary ``U_a @ U_b`` (b acts first)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def qconj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qexp(vec, t=1.0):
    """Propagator ``exp(-i t vec.sigma/2)``: rotation by ``|vec|*t`` about ``vec``.

    ``vec`` has shape (..., 3); ``t`` broadcasts against the batch shape.
    """
    vec = np.asarray(vec, dtype=float)
    t = np.asarray(t, dtype=float)
    norm = np.linalg.norm(vec, axis=-1)
    half = 0.5 * norm * t
    # sin(half)/norm without dividing by zero
    safe = np.where(norm > 0, norm, 1.0)
    scale = np.where(norm > 0, np.sin(half) / safe, 0.5 * t)
    return np.concatenate(
        [np.cos(half)[..., None], scale[..., None] * vec], axis=-1
    )


def qrot(axis, angle):
    """Quaternion for a rotation by ``angle`` about unit ``axis``."""
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    return np.concatenate(
        [np.cos(angle / 2)[..., None], np.sin(angle / 2)[..., None] * axis], axis=-1
    )


def qz(angle):
    """Rotation about z; ``angle`` may be an array."""
    angle = np.asarray(angle, dtype=float)
    zero = np.zeros_like(angle)
    return np.stack([np.cos(angle / 2), zero, zero, np.sin(angle / 2)], axis=-1)


def qy(angle):
    angle = np.asarray(angle, dtype=float)
    zero = np.zeros_like(angle)
    return np.stack([np.cos(angle / 2), zero, np.sin(angle / 2), zero], axis=-1)


def half_angle(q):
    """``angle/2`` in [0, pi], computed with atan2 for accuracy near identity."""
    q = np.asarray(q, dtype=float)
    return np.arctan2(np.linalg.norm(q[..., 1:], axis=-1), q[..., 0])


def qpow(q, m):
    """``q**m`` for real ``m``: same axis, angle scaled by ``m``."""
    q = np.asarray(q, dtype=float)
    psi = half_angle(q)
    vnorm = np.linalg.norm(q[..., 1:], axis=-1)
    safe = np.where(vnorm > 0, vnorm, 1.0)
    scale = np.where(vnorm > 0, np.sin(m * psi) / safe, 0.0)
    return np.concatenate(
        [np.cos(m * psi)[..., None], scale[..., None] * q[..., 1:]], axis=-1
    )


def chain(qs, axis=0):
    """Ordered product of a sequence of quaternions along ``axis``.

    Element 0 acts first, so the result is ``q[n-1] * ... * q[1] * q[0]``.
    Uses pairwise (tree) reduction, which keeps long products vectorized.
    """
    qs = np.moveaxis(np.asarray(qs, dtype=float), axis, 0)
    if qs.shape[0] == 0:
        return np.broadcast_to(IDENTITY, qs.shape[1:]).copy()
    while qs.shape[0] > 1:
        if qs.shape[0] % 2:
            pad = np.broadcast_to(IDENTITY, (1,) + qs.shape[1:])
            qs = np.concatenate([qs, pad], axis=0)
        qs = qmul(qs[1::2], qs[0::2])
    return qs[0]


def to_unitary(q):
    """2x2 complex unitary of a quaternion (batched)."""
    q = np.asarray(q, dtype=float)
    eye = np.eye(2, dtype=complex)
    return q[..., 0, None, None] * eye - 1j * np.einsum("...k,kij->...ij", q[..., 1:], _PAULI)


def from_unitary(u):
    """Inverse of :func:`to_unitary` for an SU(2) matrix."""
    u = np.asarray(u, dtype=complex)
    w = 0.5 * np.real(u[..., 0, 0] + u[..., 1, 1])
    # U = w - i v.sigma  =>  v_k = i Tr(U sigma_k) / 2
    v = np.real(0.5j * np.einsum("...ij,kji->...k", u, _PAULI))
    return np.concatenate([w[..., None], v], axis=-1)


def to_matrix(q):
    """SO(3) rotation matrix (batched)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


@dataclass(frozen=True)
class AxisAngleRotation:
    """A single SU(2) rotation by ``angle`` about the unit vector ``axis``.

    The angle is kept in [0, 2*pi]; larger rotations are expressed by flipping
    the axis, so that every element of SU(2) has exactly one representation
    (2*pi, with the canonical z axis, is ``-I``).
    """

    axis: tuple[float, float, float]
    angle: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"rotation axis must be normalized, |axis| = {norm!r}")
        if not 0.0 <= self.angle <= 2 * np.pi:
            raise ValueError(f"rotation angle {self.angle!r} outside [0, 2pi]")

    @classmethod
    def from_quaternion(cls, q) -> "AxisAngleRotation":
        q = np.asarray(q, dtype=float)
        q = q / np.linalg.norm(q)
        vnorm = np.linalg.norm(q[1:])
        if vnorm < 1e-15:
            return cls((0.0, 0.0, 1.0), 0.0 if q[0] > 0 else 2 * np.pi)
        axis = q[1:] / vnorm
        # renormalize once more so |axis| = 1 to machine precision
        axis = axis / np.linalg.norm(axis)
        angle = 2.0 * float(np.arctan2(vnorm, q[0]))
        return cls(tuple(float(a) for a in axis), angle)

    @classmethod
    def from_unitary(cls, u) -> "AxisAngleRotation":
        return cls.from_quaternion(from_unitary(u))

    @classmethod
    def about(cls, axis, angle) -> "AxisAngleRotation":
        """Rotation by any real ``angle`` about any non-zero ``axis``."""
        axis = np.asarray(axis, dtype=float)
        return cls.from_quaternion(qrot(axis / np.linalg.norm(axis), angle))

    def quaternion(self) -> np.ndarray:
        return qrot(np.asarray(self.axis), self.angle)

    def unitary(self) -> np.ndarray:
        return to_unitary(self.quaternion())

    def matrix(self) -> np.ndarray:
        return to_matrix(self.quaternion())

    def inverse(self) -> "AxisAngleRotation":
        return AxisAngleRotation.from_quaternion(qconj(self.quaternion()))

    def then(self, other: "AxisAngleRotation") -> "AxisAngleRotation":
        """Apply ``self`` first, then ``other``."""
        return AxisAngleRotation.from_quaternion(qmul(other.quaternion(), self.quaternion()))


def compose_rotations(rotations: Iterable[AxisAngleRotation] | Sequence[AxisAngleRotation]) -> AxisAngleRotation:
    """Net rotation of an ordered list; the first element is applied first."""
    qs = [r.quaternion() for r in rotations]
    if not qs:
        return AxisAngleRotation((0.0, 0.0, 1.0), 0.0)
    return AxisAngleRotation.from_quaternion(chain(np.array(qs)))
