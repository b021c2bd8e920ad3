"""Group-agnostic primitives for matrix Lie groups.

Elements are stored in a compact per-group parametrization (unit quaternion,
heading plus translation, ...) and every group also carries a faithful matrix
representation together with a fixed basis ``W_1..W_n`` of its Lie algebra.
Algebra elements ("algebra vectors") are plain float arrays of the
coordinates in that basis.

The scalar product on the algebra is the Euclidean one in the fixed basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import expm

__all__ = [
    "AtCutLocus",
    "Basis",
    "GroupElement",
    "GroupMismatch",
    "LieGroup",
    "SingularBasis",
    "StructureConstants",
    "Velocity",
    "adjoint",
    "adjoint_from_algebra",
    "ad_matrix",
    "bracket",
    "compose",
    "exp",
    "inverse",
    "is_close",
    "log",
    "structure_constants",
]

#: log refuses to return coordinates closer than this to the cut locus (rad).
CUT_LOCUS_MARGIN = 1e-6
#: below this angle the sinc-type factors switch to their Taylor series.
SMALL_ANGLE = 1e-4


class GroupMismatch(ValueError):
    """Two elements from different groups were combined."""


class AtCutLocus(ValueError):
    """The logarithm was requested at (or numerically next to) the cut locus."""


class SingularBasis(ValueError):
    """Generators handed to :class:`Basis` are linearly dependent."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Basis:
    """Fixed basis ``W_1..W_n`` of a matrix Lie algebra.

    ``generators`` has shape ``(n, d, d)``. Coordinates of an arbitrary
    algebra matrix are recovered with a least-squares projection onto the
    vectorized generators.
    """

    generators: np.ndarray
    names: tuple[str, ...] = ()
    _pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        gens = _frozen(self.generators)
        if gens.ndim != 3 or gens.shape[1] != gens.shape[2]:
            raise ValueError(f"generators must have shape (n, d, d), got {gens.shape}")
        flat = gens.reshape(gens.shape[0], -1).T
        if np.linalg.matrix_rank(flat, tol=1e-10) < gens.shape[0]:
            raise SingularBasis(
                f"{gens.shape[0]} generators span a space of rank "
                f"{np.linalg.matrix_rank(flat, tol=1e-10)}"
            )
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "_pinv", _frozen(np.linalg.pinv(flat)))
        if not self.names:
            names = tuple(f"W{i + 1}" for i in range(gens.shape[0]))
            object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return self.generators.shape[0]

    def hat(self, xi) -> np.ndarray:
        """Algebra matrix ``sum_k xi_k W_k``."""
        return np.tensordot(np.asarray(xi, dtype=float), self.generators, axes=1)

    def vee(self, mat) -> np.ndarray:
        """Coordinates of an algebra matrix in this basis."""
        return self._pinv @ np.asarray(mat, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class StructureConstants:
    """``tensor[i, j, k]`` is the ``W_k`` coordinate of ``[W_i, W_j]``."""

    tensor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tensor", _frozen(self.tensor))

    @property
    def dim(self) -> int:
        return self.tensor.shape[0]

    def antisymmetry_defect(self) -> float:
        return float(np.max(np.abs(self.tensor + self.tensor.transpose(1, 0, 2)), initial=0.0))

    def jacobi_defect(self) -> float:
        """Max |[[Wi,Wj],Wk] + [[Wj,Wk],Wi] + [[Wk,Wi],Wj]| in coordinates."""
        c = self.tensor
        # [[Wi,Wj],Wk] = sum_m c[i,j,m] c[m,k,:]
        t = np.einsum("ijm,mkl->ijkl", c, c)
        cyc = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
        return float(np.max(np.abs(cyc), initial=0.0))


def structure_constants(basis: Basis) -> StructureConstants:
    gens = basis.generators
    n = basis.dim
    c = np.zeros((n, n, n))
    for i in range(n):
        for j in range(i + 1, n):
            comm = gens[i] @ gens[j] - gens[j] @ gens[i]
            c[i, j] = basis.vee(comm)
            c[j, i] = -c[i, j]
    return StructureConstants(c)


class LieGroup:
    """Base class for concrete groups.

    Subclasses implement the private array-level operations; the public
    wrappers produce :class:`GroupElement` values. Array-level methods are
    also what the integrator uses in its inner loop.
    """

    name: str = "G"
    dim: int = 0
    param_names: tuple[str, ...] = ()
    basis: Basis

    def __init__(self):
        self.structure = structure_constants(self.basis)
        # ad_xi[k, j] = sum_i xi_i c[i, j, k]
        self._ad_tensor = np.ascontiguousarray(self.structure.tensor.transpose(0, 2, 1))

    def __repr__(self):
        return f"{type(self).__name__}()"

    # -- array-level operations, overridden per group ---------------------
    def _identity(self) -> np.ndarray:
        raise NotImplementedError

    def _compose(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _inverse(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _exp(self, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _log(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _matrix(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _normalize(self, a: np.ndarray) -> np.ndarray:
        return a

    def _canonical(self, a: np.ndarray) -> np.ndarray:
        return a

    def _adjoint(self, a: np.ndarray) -> np.ndarray:
        # generic fallback through the matrix representation
        m = self._matrix(a)
        minv = np.linalg.inv(m)
        cols = [self.basis.vee(minv @ w @ m) for w in self.basis.generators]
        return np.column_stack(cols)

    def _random(self, rng: np.random.Generator) -> np.ndarray:
        return self._exp(rng.normal(size=self.dim))

    def _ad(self, xi: np.ndarray) -> np.ndarray:
        return np.tensordot(xi, self._ad_tensor, axes=1)

    def _bracket(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self._ad(a) @ b

    def _dexpinv(self, theta: np.ndarray, v: np.ndarray) -> np.ndarray:
        # inverse differential of exp, truncated after the double bracket
        adv = self._bracket(theta, v)
        return v + 0.5 * adv + self._bracket(theta, adv) / 12.0

    def _to_body(self, x: np.ndarray, spatial: np.ndarray) -> np.ndarray:
        # body coordinates of a right-translated vector: Ad_{x^-1} spatial
        return self._adjoint(x) @ spatial

    # -- public element-level API -----------------------------------------
    def element(self, data) -> GroupElement:
        data = np.asarray(data, dtype=float)
        if data.shape != (len(self.param_names),):
            raise ValueError(
                f"{self.name} element needs {len(self.param_names)} parameters, got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError(f"non-finite {self.name} parameters: {data}")
        return GroupElement(self, self._normalize(data))

    def identity(self) -> GroupElement:
        return GroupElement(self, self._identity())

    def random(self, rng: np.random.Generator) -> GroupElement:
        return GroupElement(self, self._random(rng))

    def hat(self, xi) -> np.ndarray:
        return self.basis.hat(xi)

    def vee(self, mat) -> np.ndarray:
        return self.basis.vee(mat)

    def matrix(self, g: GroupElement) -> np.ndarray:
        return self._matrix(g.data)


class GroupElement:
    """Immutable point of a :class:`LieGroup`.

    ``g @ h`` is the group product and ``g.inverse()`` the inverse.
    """

    __slots__ = ("group", "data")

    def __init__(self, group: LieGroup, data: np.ndarray):
        if not (type(data) is np.ndarray and data.dtype == np.float64 and not data.flags.writeable):
            data = np.array(data, dtype=float)
            data.flags.writeable = False
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "data", data)

    def __setattr__(self, key, value):
        raise AttributeError("GroupElement is immutable")

    def __repr__(self):
        return f"{self.group.name}{tuple(float(v) for v in self.data)}"

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return compose(self, other)

    def inverse(self) -> GroupElement:
        return inverse(self)

    def matrix(self) -> np.ndarray:
        return self.group._matrix(self.data)

    def canonical(self) -> np.ndarray:
        """Parameters in canonical form (used for comparisons only)."""
        return self.group._canonical(self.data)


def _same_group(g1: GroupElement, g2: GroupElement) -> LieGroup:
    if g1.group is not g2.group and type(g1.group) is not type(g2.group):
        raise GroupMismatch(f"cannot combine {g1.group.name} and {g2.group.name} elements")
    return g1.group


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    grp = _same_group(g1, g2)
    return GroupElement(grp, grp._compose(g1.data, g2.data))


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(g.group, g.group._inverse(g.data))


def exp(group: LieGroup, xi) -> GroupElement:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (group.dim,):
        raise ValueError(f"{group.name} algebra vector needs {group.dim} coordinates, got {xi.shape}")
    return GroupElement(group, group._exp(xi))


def log(g: GroupElement) -> np.ndarray:
    """Exponential coordinates of ``g`` on the principal branch.

    Raises :class:`AtCutLocus` when the rotation angle is within
    ``CUT_LOCUS_MARGIN`` of pi.
    """
    return g.group._log(g.data)


def bracket(group: LieGroup, xi1, xi2) -> np.ndarray:
    a = group.basis.hat(xi1)
    b = group.basis.hat(xi2)
    return group.basis.vee(a @ b - b @ a)


def ad_matrix(group: LieGroup, xi) -> np.ndarray:
    """Matrix of ``v -> [xi, v]`` built from the structure constants."""
    return np.einsum("i,ijk->kj", np.asarray(xi, dtype=float), group.structure.tensor)


def ad_fast(group: LieGroup, xi: np.ndarray) -> np.ndarray:
    """Same as :func:`ad_matrix`, through the group's (possibly closed-form) hook."""
    return group._ad(xi)


def adjoint(g: GroupElement) -> np.ndarray:
    """Matrix of ``xi -> d/de [g^-1 exp(e xi) g]`` at ``e = 0``.

    This is the right action ``psi_g`` of the group on its algebra:
    ``adjoint(g1 @ g2) == adjoint(g2) @ adjoint(g1)``.
    """
    return g.group._adjoint(g.data)


def is_close(g1: GroupElement, g2: GroupElement, atol: float = 1e-9) -> bool:
    """Compare through the matrix representation (immune to double cover and angle wrap)."""
    grp = _same_group(g1, g2)
    return bool(np.allclose(grp._matrix(g1.data), grp._matrix(g2.data), rtol=0.0, atol=atol))


def adjoint_from_algebra(group: LieGroup, xi) -> np.ndarray:
    """``adjoint(exp(xi))`` evaluated as ``expm(-ad_xi)``; an independent route."""
    return expm(-ad_matrix(group, xi))


class Velocity(NamedTuple):
    """Tangent vector at ``x`` written as ``x * body + spatial * x``.

    ``body`` is left-translated (``DL_x``), ``spatial`` right-translated
    (``DR_x``); either may be ``None``.
    """

    body: Optional[np.ndarray] = None
    spatial: Optional[np.ndarray] = None

    def to_body(self, group: LieGroup, x: np.ndarray) -> np.ndarray:
        """Collapse to a single body-frame vector at the state ``x`` (parameters)."""
        out = np.zeros(group.dim) if self.body is None else np.asarray(self.body, dtype=float)
        if self.spatial is not None:
            out = out + group._to_body(x, self.spatial)
        return out
