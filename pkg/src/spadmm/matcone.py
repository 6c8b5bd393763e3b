"""Spectral calculus on the cones of positive/negative semidefinite matrices.

Everything here works on dense symmetric ``numpy`` arrays.  The central
object is the :class:`SpectralTriple` of a symmetric matrix ``C``: an
orthonormal eigenbasis together with the index sets of strictly positive
(``alpha``), numerically zero (``beta``) and strictly negative (``gamma``)
eigenvalues.  When ``C = a + b`` for a complementary pair (``a`` PSD, ``b``
NSD, ``a @ b = 0``), ``alpha`` carries the positive part and ``gamma`` the
negative part, and the triple drives directional derivatives of the cone
projections, critical-cone membership tests and the tangent-pair relations
used by the second-order analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, InputError, NumericalError

DEFAULT_ZERO_TOL = 1e-10


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part of ``m`` (exact symmetry in floating point)."""
    return (m + m.T) / 2.0


def check_symmetric(m, name: str = "matrix") -> np.ndarray:
    """Validate that ``m`` is a finite, exactly symmetric square array."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise InputError(f"{name} contains non-finite entries")
    if m.size and not (m == m.T).all():
        raise InputError(f"{name} is not symmetric; symmetrize() it first")
    return m


@dataclass(frozen=True)
class SpectralTriple:
    """Eigendecomposition of a symmetric matrix with a sign classification.

    ``basis`` has orthonormal columns, ``values`` is non-increasing, and
    ``basis @ diag(values) @ basis.T`` reconstructs the matrix.  ``alpha``,
    ``beta`` and ``gamma`` partition ``range(p)`` into strictly positive,
    numerically zero and strictly negative eigenvalues; the magnitude cut is
    ``zero_tol * max(1, |values|.max())``.
    """

    basis: np.ndarray
    values: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    zero_tol: float = DEFAULT_ZERO_TOL

    @property
    def dim(self) -> int:
        return self.values.size

    def part(self, idx: np.ndarray) -> np.ndarray:
        """Columns of the eigenbasis selected by an index set."""
        return self.basis[:, idx]

    def reconstruct(self) -> np.ndarray:
        return symmetrize((self.basis * self.values) @ self.basis.T)


@dataclass(frozen=True)
class GammaWeights:
    """First-divided-difference weights between the positive and negative blocks.

    ``upsilon[i, j] = -values[gamma[j]] / (values[alpha[i]] - values[gamma[j]])``
    lies in (0, 1); ``upsilon_bar = 1 - upsilon``.
    """

    upsilon: np.ndarray
    upsilon_bar: np.ndarray = field(repr=False)


def eig_sym(m, zero_tol: float = DEFAULT_ZERO_TOL) -> SpectralTriple:
    """Full symmetric eigendecomposition, eigenvalues sorted non-increasing.

    Parameters
    ----------
    m : array_like
        Symmetric matrix.
    zero_tol : float
        Relative magnitude below which an eigenvalue is classified as zero.
    """
    m = check_symmetric(m)
    if zero_tol < 0:
        raise InputError("zero_tol must be nonnegative")
    try:
        vals, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    top = abs(vals).max() if vals.size else 0.0
    cut = zero_tol * max(1.0, top)
    idx = np.arange(vals.size)
    alpha = idx[vals > cut]
    gamma = idx[vals < -cut]
    beta = idx[(vals <= cut) & (vals >= -cut)]
    return SpectralTriple(vecs, vals, alpha, beta, gamma, zero_tol)


def gamma_weights(triple: SpectralTriple) -> GammaWeights:
    """Weights coupling the ``alpha`` rows with the ``gamma`` columns."""
    la = triple.values[triple.alpha][:, None]
    lg = triple.values[triple.gamma][None, :]
    ups = -lg / (la - lg) if la.size and lg.size else np.zeros((la.size, lg.size))
    return GammaWeights(ups, 1.0 - ups)


def project_psd(m) -> np.ndarray:
    """Frobenius projection onto the PSD cone."""
    t = eig_sym(m)
    return symmetrize((t.basis * np.maximum(t.values, 0.0)) @ t.basis.T)


def project_nsd(m) -> np.ndarray:
    """Frobenius projection onto the NSD cone."""
    t = eig_sym(m)
    return symmetrize((t.basis * np.minimum(t.values, 0.0)) @ t.basis.T)


def dir_deriv_proj_nsd(triple: SpectralTriple, h) -> np.ndarray:
    """Directional derivative of the NSD-cone projection.

    ``triple`` is the spectral triple of the base point ``C`` and ``h`` the
    direction.  In the eigenbasis the result has a zero block on the
    positive-positive indices, the positive-negative block scaled by the
    divided-difference weights, a nested NSD projection on the zero-zero
    block, and the remaining blocks copied through.
    """
    h = check_symmetric(h, "direction")
    if h.shape[0] != triple.dim:
        raise DimensionError(
            f"direction has dimension {h.shape[0]}, base point has {triple.dim}"
        )
    a, b, g = triple.alpha, triple.beta, triple.gamma
    ht = triple.basis.T @ h @ triple.basis
    out = np.zeros_like(ht)
    if a.size and g.size:
        ups = gamma_weights(triple).upsilon
        out[np.ix_(a, g)] = ht[np.ix_(a, g)] * ups
        out[np.ix_(g, a)] = out[np.ix_(a, g)].T
    if b.size:
        out[np.ix_(b, b)] = project_nsd(symmetrize(ht[np.ix_(b, b)]))
        if g.size:
            out[np.ix_(b, g)] = ht[np.ix_(b, g)]
            out[np.ix_(g, b)] = ht[np.ix_(g, b)]
    if g.size:
        out[np.ix_(g, g)] = ht[np.ix_(g, g)]
    return symmetrize(triple.basis @ out @ triple.basis.T)


def dir_deriv_proj_psd(triple: SpectralTriple, h) -> np.ndarray:
    """Directional derivative of the PSD-cone projection (mirror identity)."""
    flipped = eig_sym(-triple.reconstruct(), triple.zero_tol)
    return -dir_deriv_proj_nsd(flipped, -check_symmetric(h, "direction"))


def pinv_psd(s, zero_tol: float = DEFAULT_ZERO_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a PSD matrix via its eigendecomposition."""
    t = eig_sym(s, zero_tol)
    if t.gamma.size:
        worst = t.values[t.gamma].min()
        raise DomainError(
            f"pinv_psd requires a PSD matrix; found eigenvalue {worst:.3e}"
        )
    inv = np.zeros_like(t.values)
    inv[t.alpha] = 1.0 / t.values[t.alpha]
    return symmetrize((t.basis * inv) @ t.basis.T)


def _block(triple, h, rows, cols):
    return triple.part(rows).T @ h @ triple.part(cols)


def _frob(m):
    return float(np.linalg.norm(m))


def in_critical_cone_nsd(h, triple: SpectralTriple, tol: float = 1e-10) -> bool:
    """Membership of ``h`` in the critical cone of the NSD projection at ``C``.

    Requires the ``alpha`` rows against ``alpha`` and ``beta`` columns to
    vanish and the ``beta``-``beta`` block to be NSD, within ``tol`` relative
    to ``max(1, ||h||_F)``.
    """
    h = check_symmetric(h, "candidate")
    scale = max(1.0, _frob(h))
    a, b = triple.alpha, triple.beta
    if a.size:
        if _frob(_block(triple, h, a, a)) > tol * scale:
            return False
        if b.size and _frob(_block(triple, h, a, b)) > tol * scale:
            return False
    if b.size:
        bb = symmetrize(_block(triple, h, b, b))
        if np.linalg.eigvalsh(bb).max() > tol * scale:
            return False
    return True


def in_critical_cone_psd(h, triple: SpectralTriple, tol: float = 1e-10) -> bool:
    """Mirror test: ``gamma`` rows vanish, ``beta``-``beta`` block is PSD."""
    h = check_symmetric(h, "candidate")
    scale = max(1.0, _frob(h))
    g, b = triple.gamma, triple.beta
    if g.size:
        if _frob(_block(triple, h, g, g)) > tol * scale:
            return False
        if b.size and _frob(_block(triple, h, g, b)) > tol * scale:
            return False
    if b.size:
        bb = symmetrize(_block(triple, h, b, b))
        if np.linalg.eigvalsh(bb).min() < -tol * scale:
            return False
    return True


def in_polar_critical_cone_nsd(h, triple: SpectralTriple, tol: float = 1e-10) -> bool:
    """Membership in the polar of the NSD critical cone at ``C``.

    Characterization: the ``alpha``-``gamma`` block vanishes and ``h`` lies in
    the PSD critical cone at the same base point.
    """
    h = check_symmetric(h, "candidate")
    scale = max(1.0, _frob(h))
    a, g = triple.alpha, triple.gamma
    if a.size and g.size and _frob(_block(triple, h, a, g)) > tol * scale:
        return False
    return in_critical_cone_psd(h, triple, tol)


def in_polar_critical_cone_psd(h, triple: SpectralTriple, tol: float = 1e-10) -> bool:
    """Membership in the polar of the PSD critical cone at ``C``."""
    h = check_symmetric(h, "candidate")
    scale = max(1.0, _frob(h))
    a, g = triple.alpha, triple.gamma
    if a.size and g.size and _frob(_block(triple, h, a, g)) > tol * scale:
        return False
    return in_critical_cone_nsd(h, triple, tol)


@dataclass(frozen=True)
class PairRelationsReport:
    """Outcome of the tangent-pair relation test for a direction pair.

    ``relations`` holds the four block equations in order; ``in_cone`` is the
    critical-cone membership of the first direction; ``inner_lhs``/``inner_rhs``
    are the two sides of the inner-product identity.
    """

    relations: tuple
    in_cone: bool
    inner_lhs: float
    inner_rhs: float

    @property
    def holds(self) -> bool:
        return all(self.relations)


def check_pair_relations(da, db, triple: SpectralTriple, tol: float = 1e-10):
    """Check the four block relations tying a direction pair to the base pair.

    ``triple`` belongs to ``C = a + b`` with ``a = project_psd(C)`` and
    ``b = project_nsd(C)``.  The relations hold iff
    ``da == dir_deriv_proj_nsd(triple, da + db)`` does *not* move ``da``,
    i.e. the pair is tangent to the complementary-pair manifold at ``(a, b)``.
    """
    da = check_symmetric(da, "first direction")
    db = check_symmetric(db, "second direction")
    if da.shape != db.shape or da.shape[0] != triple.dim:
        raise DimensionError("direction pair must match the base point dimension")
    a, b, g = triple.alpha, triple.beta, triple.gamma
    basis = triple.basis
    dat = basis.T @ da @ basis
    dbt = basis.T @ db @ basis
    scale_a = max(1.0, _frob(da))
    scale_b = max(1.0, _frob(db))
    scale = max(scale_a, scale_b)

    ab = np.concatenate([a, b]) if b.size else a
    bg = np.concatenate([b, g]) if b.size else g
    rel1 = _frob(dat[np.ix_(a, ab)]) <= tol * scale_a if a.size else True
    if a.size and g.size:
        w = gamma_weights(triple)
        rel2 = (
            _frob(dat[np.ix_(a, g)] * w.upsilon_bar - dbt[np.ix_(a, g)] * w.upsilon)
            <= tol * scale
        )
    else:
        rel2 = True
    if b.size:
        bb = symmetrize(dat[np.ix_(b, b)])
        target = project_nsd(symmetrize(dat[np.ix_(b, b)] + dbt[np.ix_(b, b)]))
        rel3 = _frob(bb - target) <= tol * scale
    else:
        rel3 = True
    rel4 = _frob(dbt[np.ix_(bg, g)]) <= tol * scale_b if g.size else True

    pos = symmetrize((basis * np.maximum(triple.values, 0.0)) @ basis.T)
    neg = symmetrize((basis * np.minimum(triple.values, 0.0)) @ basis.T)
    inner_lhs = float(np.tensordot(da, db))
    inner_rhs = 2.0 * float(np.tensordot(pos, da @ pinv_psd(-neg, triple.zero_tol) @ da))
    return PairRelationsReport(
        (bool(rel1), bool(rel2), bool(rel3), bool(rel4)),
        in_critical_cone_nsd(da, triple, tol),
        inner_lhs,
        inner_rhs,
    )
