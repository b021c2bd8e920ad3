"""Concrete groups: SO(3) (unit quaternions), SE(2) and the abelian R^2.

Basis orders are fixed once here and everything downstream (structure
constants, gain matrices, CSV columns) depends on them:

* SO(3): (rot-x, rot-y, rot-z)
* SE(2): (rot, trans-x, trans-y)
* R^2:   (trans-x, trans-y)
"""

from __future__ import annotations

import math

import numpy as np

from .lie_core import (
    CUT_LOCUS_MARGIN,
    SMALL_ANGLE,
    AtCutLocus,
    Basis,
    GroupElement,
    LieGroup,
)

__all__ = ["SO3", "SE2", "R2", "so3", "se2", "r2", "rot_x", "rot_y", "rot_z", "so3_rotate", "se2_apply", "wrap_angle"]


def skew(v) -> np.ndarray:
    a, b, c = np.asarray(v, dtype=float).tolist()
    return np.array([[0.0, -c, b], [c, 0.0, -a], [-b, a, 0.0]])


def wrap_angle(theta: float) -> float:
    """Wrap to the half-open interval (-pi, pi]; in-range values pass through untouched."""
    if -math.pi < theta <= math.pi:
        return theta
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


def _quat_rotation_matrix(q) -> np.ndarray:
    w, x, y, z = q.tolist()
    # flat construction is several times cheaper than nested lists
    return np.array([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ]).reshape(3, 3)


class SO3(LieGroup):
    """Rotations stored as Hamilton unit quaternions ``(w, x, y, z)``.

    The double cover is left alone along trajectories; ``_canonical`` picks
    ``w >= 0`` for comparisons only.
    """

    name = "SO3"
    dim = 3
    param_names = ("qw", "qx", "qy", "qz")
    basis = Basis(np.array([skew(e) for e in np.eye(3)]), names=("rot_x", "rot_y", "rot_z"))

    def _identity(self):
        return np.array([1.0, 0.0, 0.0, 0.0])

    def _normalize(self, q):
        nrm = math.sqrt(float(q.dot(q)))
        if nrm == 0.0:
            raise ValueError("zero quaternion")
        return q / nrm

    def _compose(self, a, b):
        aw, ax, ay, az = a.tolist()
        bw, bx, by, bz = b.tolist()
        w = aw * bw - ax * bx - ay * by - az * bz
        x = aw * bx + ax * bw + ay * bz - az * by
        y = aw * by - ax * bz + ay * bw + az * bx
        z = aw * bz + ax * by - ay * bx + az * bw
        n = math.sqrt(w * w + x * x + y * y + z * z)
        return np.array([w / n, x / n, y / n, z / n])

    def _inverse(self, q):
        w, x, y, z = q.tolist()
        return np.array([w, -x, -y, -z])

    def _exp(self, xi):
        a, b, c = xi.tolist()
        theta = math.sqrt(a * a + b * b + c * c)
        if theta < SMALL_ANGLE:
            t2 = theta * theta
            s = 0.5 - t2 / 48.0 + t2 * t2 / 3840.0
        else:
            s = math.sin(0.5 * theta) / theta
        return np.array([math.cos(0.5 * theta), s * a, s * b, s * c])

    def _log(self, q):
        if q[0] < 0.0:
            q = -q
        w = float(q[0])
        v = q[1:]
        s = math.sqrt(float(v @ v))
        angle = 2.0 * math.atan2(s, w)
        if angle > math.pi - CUT_LOCUS_MARGIN:
            raise AtCutLocus(f"rotation angle {angle!r} is within {CUT_LOCUS_MARGIN} of pi")
        if angle < SMALL_ANGLE:
            r2 = (s / w) ** 2
            factor = 2.0 / w * (1.0 - r2 / 3.0 + r2 * r2 / 5.0)
        else:
            factor = angle / s
        return factor * v

    def _matrix(self, q):
        return _quat_rotation_matrix(q)

    def _adjoint(self, q):
        # psi_g = Ad_{g^-1}, i.e. R^T in the standard basis
        return _quat_rotation_matrix(q).T

    def _ad(self, xi):
        return skew(xi)

    def _bracket(self, a, b):
        a1, a2, a3 = a.tolist()
        b1, b2, b3 = b.tolist()
        return np.array([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])

    def _dexpinv(self, theta, v):
        a1, a2, a3 = theta.tolist()
        v1, v2, v3 = v.tolist()
        c1, c2, c3 = a2 * v3 - a3 * v2, a3 * v1 - a1 * v3, a1 * v2 - a2 * v1
        d1, d2, d3 = a2 * c3 - a3 * c2, a3 * c1 - a1 * c3, a1 * c2 - a2 * c1
        return np.array([v1 + 0.5 * c1 + d1 / 12.0, v2 + 0.5 * c2 + d2 / 12.0, v3 + 0.5 * c3 + d3 / 12.0])

    def _to_body(self, q, v):
        # R^T v via the quaternion sandwich q^* v q
        w, x, y, z = q.tolist()
        v1, v2, v3 = v.tolist()
        # t = 2 (r x v) with r = -(x, y, z)
        t1 = 2.0 * (-y * v3 + z * v2)
        t2 = 2.0 * (-z * v1 + x * v3)
        t3 = 2.0 * (-x * v2 + y * v1)
        return np.array([
            v1 + w * t1 + (-y * t3 + z * t2),
            v2 + w * t2 + (-z * t1 + x * t3),
            v3 + w * t3 + (-x * t2 + y * t1),
        ])

    def _canonical(self, q):
        if q[0] < 0.0 or (q[0] == 0.0 and q[np.flatnonzero(q)[0]] < 0.0):
            return -q
        return q

    def _random(self, rng):
        return self._normalize(rng.normal(size=4))

    def rotate(self, g: GroupElement, v) -> np.ndarray:
        return so3_rotate(g, v)


class SE2(LieGroup):
    """Planar rigid motions stored as ``(theta, tx, ty)``, theta in (-pi, pi]."""

    name = "SE2"
    dim = 3
    param_names = ("theta", "tx", "ty")
    basis = Basis(
        np.array([
            [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
            [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
            [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
        ]),
        names=("rot", "trans_x", "trans_y"),
    )

    def _identity(self):
        return np.zeros(3)

    def _normalize(self, a):
        th, x, y = a.tolist()
        return np.array([wrap_angle(th), x, y])

    def _compose(self, a, b):
        th1, x1, y1 = a.tolist()
        th2, x2, y2 = b.tolist()
        c, s = math.cos(th1), math.sin(th1)
        return np.array([wrap_angle(th1 + th2), x1 + c * x2 - s * y2, y1 + s * x2 + c * y2])

    def _inverse(self, a):
        th, x, y = a.tolist()
        c, s = math.cos(th), math.sin(th)
        return np.array([wrap_angle(-th), -(c * x + s * y), -(-s * x + c * y)])

    @staticmethod
    def _sinc_terms(w):
        # sin(w)/w and (1 - cos(w))/w
        if abs(w) < SMALL_ANGLE:
            w2 = w * w
            return 1.0 - w2 / 6.0 + w2 * w2 / 120.0, w / 2.0 - w * w2 / 24.0 + w * w2 * w2 / 720.0
        return math.sin(w) / w, (1.0 - math.cos(w)) / w

    def _exp(self, xi):
        w, vx, vy = xi.tolist()
        a, b = self._sinc_terms(w)
        return np.array([wrap_angle(w), a * vx - b * vy, b * vx + a * vy])

    def _log(self, g):
        w, tx, ty = g.tolist()
        if abs(w) > math.pi - CUT_LOCUS_MARGIN:
            raise AtCutLocus(f"heading {w!r} is within {CUT_LOCUS_MARGIN} of pi")
        # V^{-1} = [[A, w/2], [-w/2, A]] with A = (w/2) cot(w/2)
        if abs(w) < SMALL_ANGLE:
            w2 = w * w
            A = 1.0 - w2 / 12.0 - w2 * w2 / 720.0
        else:
            A = 0.5 * w / math.tan(0.5 * w)
        return np.array([w, A * tx + 0.5 * w * ty, -0.5 * w * tx + A * ty])

    def _matrix(self, g):
        th, x, y = g.tolist()
        c, s = math.cos(th), math.sin(th)
        return np.array([[c, -s, x], [s, c, y], [0.0, 0.0, 1.0]])

    def _adjoint(self, g):
        # Ad_{g^-1}; with h = g^-1 = (phi, p): Ad_h = [[1,0,0],[p_y,c,-s],[-p_x,s,c]]
        phi, px, py = self._inverse(g).tolist()
        c, s = math.cos(phi), math.sin(phi)
        return np.array([[1.0, 0.0, 0.0], [py, c, -s], [-px, s, c]])

    def _random(self, rng):
        return np.array([rng.uniform(-math.pi, math.pi), *rng.normal(scale=2.0, size=2)])

    def apply(self, g: GroupElement, p) -> np.ndarray:
        return se2_apply(g, p)


class R2(LieGroup):
    """Abelian translation group of the plane, used as a reference system."""

    name = "R2"
    dim = 2
    param_names = ("x", "y")
    basis = Basis(
        np.array([
            [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
            [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
        ]),
        names=("trans_x", "trans_y"),
    )

    def _identity(self):
        return np.zeros(2)

    def _compose(self, a, b):
        return a + b

    def _inverse(self, a):
        return -a

    def _exp(self, xi):
        return np.array(xi, dtype=float)

    def _log(self, a):
        return np.array(a, dtype=float)

    def _matrix(self, a):
        return np.array([[1.0, 0.0, a[0]], [0.0, 1.0, a[1]], [0.0, 0.0, 1.0]])

    def _adjoint(self, a):
        return np.eye(2)


so3 = SO3()
se2 = SE2()
r2 = R2()


def rot_x(angle: float) -> GroupElement:
    return so3.element([math.cos(angle / 2), math.sin(angle / 2), 0.0, 0.0])


def rot_y(angle: float) -> GroupElement:
    return so3.element([math.cos(angle / 2), 0.0, math.sin(angle / 2), 0.0])


def rot_z(angle: float) -> GroupElement:
    return so3.element([math.cos(angle / 2), 0.0, 0.0, math.sin(angle / 2)])


def so3_rotate(g: GroupElement, v) -> np.ndarray:
    """Rotate ``v`` by ``g`` (``R v``)."""
    q = g.data
    w, u = q[0], q[1:]
    v = np.asarray(v, dtype=float)
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def se2_apply(g: GroupElement, p) -> np.ndarray:
    """Rigid action ``R(theta) p + t`` on a planar point."""
    theta, tx, ty = g.data.tolist()
    px, py = np.asarray(p, dtype=float).tolist()
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c * px - s * py + tx, s * px + c * py + ty])
