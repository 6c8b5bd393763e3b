"""Box-shaped polyhedral sets: projections, directional derivatives,
support-function proximal maps and critical-cone membership.

All sets here are coordinate boxes ``[lower, upper]`` with entries in
``[-inf, inf]``; this keeps every operation closed-form and exact.  Applied
to matrix spaces the box acts entrywise on svec coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, InputError

#: absolute slack (scaled by ``1 + |bound|``) for active-set classification
ACTIVE_TOL = 1e-9

# per-coordinate cone codes used for critical cones and their duals
FREE, ZERO, NONNEG, NONPOS = "free", "zero", "nonneg", "nonpos"

_DUAL_CODE = {FREE: ZERO, ZERO: FREE, NONNEG: NONNEG, NONPOS: NONPOS}


@dataclass(frozen=True)
class BoxSet:
    """Coordinate box ``{v : lower <= v <= upper}`` with infinite bounds allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionError("lower and upper must be 1-d arrays of equal length")
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise InputError("box bounds may not be NaN")
        if (lo > hi).any():
            raise InputError("box requires lower <= upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @classmethod
    def full(cls, dim: int) -> "BoxSet":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def nonneg(cls, dim: int) -> "BoxSet":
        return cls(np.zeros(dim), np.full(dim, np.inf))

    def contains(self, v, tol: float = ACTIVE_TOL) -> bool:
        v = _check_vec(self, v)
        slack_lo = (1.0 + np.abs(np.where(np.isfinite(self.lower), self.lower, 0.0))) * tol
        slack_hi = (1.0 + np.abs(np.where(np.isfinite(self.upper), self.upper, 0.0))) * tol
        return bool((v >= self.lower - slack_lo).all() and (v <= self.upper + slack_hi).all())


def _check_vec(box: BoxSet, v, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != box.dim:
        raise DimensionError(f"{name} must be 1-d of length {box.dim}, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise InputError(f"{name} contains non-finite entries")
    return v


def _at_lower(box: BoxSet, v: np.ndarray) -> np.ndarray:
    bound = box.lower
    tol = ACTIVE_TOL * (1.0 + np.abs(np.where(np.isfinite(bound), bound, 0.0)))
    return np.isfinite(bound) & (np.abs(v - bound) <= tol)


def _at_upper(box: BoxSet, v: np.ndarray) -> np.ndarray:
    bound = box.upper
    tol = ACTIVE_TOL * (1.0 + np.abs(np.where(np.isfinite(bound), bound, 0.0)))
    return np.isfinite(bound) & (np.abs(v - bound) <= tol)


def project_box(box: BoxSet, c) -> np.ndarray:
    """Euclidean projection: coordinatewise clamp."""
    return np.clip(_check_vec(box, c), box.lower, box.upper)


def dir_deriv_project_box(box: BoxSet, c, b) -> np.ndarray:
    """Directional derivative of the box projection at ``c`` along ``b``.

    Equals the projection of ``b`` onto the tangent cone of the box at
    ``project_box(c)`` intersected with the orthogonal complement of the
    residual ``c - project_box(c)``; evaluated coordinatewise.
    """
    c = _check_vec(box, c, "base point")
    b = _check_vec(box, b, "direction")
    cp = project_box(box, c)
    out = b.copy()
    at_lo = _at_lower(box, cp)
    at_hi = _at_upper(box, cp)
    fixed = at_lo & at_hi
    # strictly outside: residual nonzero, derivative locked to zero
    below = np.isfinite(box.lower) & (c < box.lower) & ~_at_lower(box, c)
    above = np.isfinite(box.upper) & (c > box.upper) & ~_at_upper(box, c)
    out[at_lo & ~fixed] = np.maximum(b[at_lo & ~fixed], 0.0)
    out[at_hi & ~fixed] = np.minimum(b[at_hi & ~fixed], 0.0)
    out[fixed | below | above] = 0.0
    return out


def prox_support(box: BoxSet, t: float, v) -> np.ndarray:
    """Proximal map of ``t`` times the reflected support function.

    The function minimized is ``z -> sup { <-z, p> : p in the box }``, the
    term the dual solvers carry; by the Moreau identity its prox is
    ``v + t * project_box(-v / t)``, exactly.
    """
    if not np.isfinite(t) or t <= 0:
        raise InputError(f"prox parameter must be a positive float, got {t}")
    v = _check_vec(box, v)
    return v + t * project_box(box, -v / t)


def _pair_codes(box: BoxSet, b: np.ndarray, a: np.ndarray, tol: float) -> list:
    """Per-coordinate codes of the critical cone ``T_P(b) ∩ a^⊥``.

    Requires ``b`` in the box and ``-a`` in the normal cone at ``b``
    (coordinatewise complementarity); raises :class:`DomainError` naming the
    first failed condition otherwise.
    """
    if not box.contains(b, tol=max(tol, ACTIVE_TOL)):
        raise DomainError("precondition failed: base point is not inside the box")
    at_lo = _at_lower(box, b)
    at_hi = _at_upper(box, b)
    mult_tol = tol * (1.0 + float(np.abs(a).max(initial=0.0)))
    codes = []
    for i in range(box.dim):
        if at_lo[i] and at_hi[i]:
            codes.append(ZERO)
        elif at_lo[i]:
            if a[i] < -mult_tol:
                raise DomainError(
                    "precondition failed: multiplier has the wrong sign at a "
                    f"lower-active coordinate (index {i})"
                )
            codes.append(ZERO if a[i] > mult_tol else NONNEG)
        elif at_hi[i]:
            if a[i] > mult_tol:
                raise DomainError(
                    "precondition failed: multiplier has the wrong sign at an "
                    f"upper-active coordinate (index {i})"
                )
            codes.append(ZERO if a[i] < -mult_tol else NONPOS)
        else:
            if abs(a[i]) > mult_tol:
                raise DomainError(
                    "precondition failed: multiplier must vanish at an inactive "
                    f"coordinate (index {i})"
                )
            codes.append(FREE)
    return codes


def critical_cone_codes(box: BoxSet, b, a, tol: float = ACTIVE_TOL) -> list:
    """Public wrapper over the per-coordinate critical-cone classification."""
    b = _check_vec(box, b, "base point")
    a = _check_vec(box, a, "multiplier")
    return _pair_codes(box, b, a, tol)


def dual_cone_codes(codes: list) -> list:
    """Coordinatewise dual of a product of {free, zero, nonneg, nonpos} cones."""
    return [_DUAL_CODE[c] for c in codes]


def _code_member(code: str, u: float, tol: float) -> bool:
    if code == FREE:
        return True
    if code == ZERO:
        return abs(u) <= tol
    if code == NONNEG:
        return u >= -tol
    return u <= tol


def in_critical_cone_box(box: BoxSet, u, b, a, tol: float = 1e-9) -> bool:
    """Is ``u`` in the critical cone ``T_P(b) ∩ a^⊥``?

    Preconditions: ``b`` in the box and ``-a`` in the normal cone at ``b``;
    violations raise :class:`DomainError`.  The test combines coordinatewise
    tangent-cone membership with orthogonality against the multiplier.
    """
    u = _check_vec(box, u, "candidate")
    b = _check_vec(box, b, "base point")
    a = _check_vec(box, a, "multiplier")
    _pair_codes(box, b, a, tol)  # precondition guard
    scale = 1.0 + float(np.abs(u).max(initial=0.0))
    at_lo = _at_lower(box, b)
    at_hi = _at_upper(box, b)
    fixed = at_lo & at_hi
    if (np.abs(u[fixed]) > tol * scale).any():
        return False
    if (u[at_lo & ~fixed] < -tol * scale).any():
        return False
    if (u[at_hi & ~fixed] > tol * scale).any():
        return False
    ortho = abs(float(a @ u))
    return ortho <= tol * (1.0 + float(np.linalg.norm(a)) * float(np.linalg.norm(u)))


def in_S_ba(box: BoxSet, u, b, a, tol: float = 1e-9) -> bool:
    """Is ``u`` in the dual cone of the critical cone ``T_P(b) ∩ a^⊥``?

    Under the complementarity precondition the critical cone is a product of
    coordinate cones, so duality is decided against its generating set: the
    signed unit vectors of the free/one-sided coordinates.
    """
    u = _check_vec(box, u, "candidate")
    b = _check_vec(box, b, "base point")
    a = _check_vec(box, a, "multiplier")
    codes = dual_cone_codes(_pair_codes(box, b, a, tol))
    scale = tol * (1.0 + float(np.abs(u).max(initial=0.0)))
    return all(_code_member(code, float(ui), scale) for code, ui in zip(codes, u))
