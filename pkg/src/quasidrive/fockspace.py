"""Fock-basis operators, scaled Hamiltonians and a banded symmetric eigensolver.

Both rotating-frame Hamiltonians are real symmetric and banded in the Fock
basis of the scaled ladder operators: the resonant surface is tridiagonal,
the parametric one pentadiagonal with a vanishing first off-diagonal
(it conserves parity).  The eigensolver is self-contained: Givens band
reduction to tridiagonal form followed by implicit-shift QL iteration, so
results are deterministic and carry no external linear-algebra dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NumericError

_EPS = np.finfo(float).eps


@dataclass
class BandedSymmetricMatrix:
    """Real symmetric matrix stored by diagonals.

    bands[k] holds the k-th superdiagonal (length dim - k); bands[0] is the
    main diagonal.  bandwidth is the half-bandwidth (0 diagonal,
    1 tridiagonal, 2 pentadiagonal).  lam/kind carry the model metadata the
    builders know, so spectra can evaluate observables without re-deriving
    the coordinate scale.
    """

    dim: int
    bandwidth: int
    bands: list
    lam: float | None = None
    kind: str | None = None

    def __post_init__(self):
        if self.dim < 2:
            raise NumericError("basis size must be >= 2")
        if len(self.bands) != self.bandwidth + 1:
            raise NumericError("bands list inconsistent with bandwidth")
        for k, b in enumerate(self.bands):
            if len(b) != self.dim - k:
                raise NumericError(f"band {k} has wrong length")

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        for k, b in enumerate(self.bands):
            idx = np.arange(self.dim - k)
            a[idx, idx + k] = b
            a[idx + k, idx] = b
        return a


@dataclass
class Spectrum:
    """Lowest-K eigenpairs of a scaled Hamiltonian with per-state observables.

    eigenvalues ascend; eigenvectors are the columns of `vectors`, normalized
    with their first significant Fock coefficient positive.  q_mean, p_mean
    and r2_mean are <Q>, <P> and <Q^2+P^2>; parity is +1/-1 for parity-pure
    states (parametric model) and 0 where parity is not conserved.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    lam: float | None = None
    kind: str | None = None
    q_mean: np.ndarray = field(default=None, repr=False)
    p_mean: np.ndarray = field(default=None, repr=False)
    r2_mean: np.ndarray = field(default=None, repr=False)
    parity: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]


def build_quadratures(lam: float, dim: int):
    """Return (Q, P, a) matrices in a dim-dimensional Fock basis.

    Q = sqrt(lam/2)(a + a+), P = i sqrt(lam/2)(a+ - a), and a is the
    lowering operator with <n-1|a|n> = sqrt(n).  The truncated commutator
    [P, Q] equals -i lam I except in the (dim-1, dim-1) corner.
    """
    if lam <= 0:
        raise NumericError("lambda must be positive")
    n = np.arange(1, dim)
    a = np.zeros((dim, dim))
    a[n - 1, n] = np.sqrt(n)
    s = math.sqrt(0.5 * lam)
    q = s * (a + a.T)
    p = 1j * s * (a.T - a)
    return q, p, a


def build_g_resonant(lam: float, beta: float, dim: int) -> BandedSymmetricMatrix:
    """Scaled Hamiltonian of the resonantly driven oscillator.

    g = (Q^2+P^2-1)^2/4 - sqrt(beta) Q quantized with the exact substitution
    Q^2+P^2 = lam (2 a+a + 1): diagonal (lam(2n+1)-1)^2/4, first off-diagonal
    -sqrt(beta lam (n+1)/2).
    """
    if lam <= 0:
        raise NumericError("lambda must be positive")
    if beta < 0:
        raise NumericError("beta must be >= 0")
    n = np.arange(dim)
    diag = 0.25 * (lam * (2 * n + 1) - 1.0) ** 2
    off = -np.sqrt(beta * lam * 0.5 * (n[:-1] + 1.0))
    return BandedSymmetricMatrix(dim=dim, bandwidth=1, bands=[diag, off],
                                 lam=lam, kind="resonant")


def build_g_parametric(lam: float, mu: float, dim: int) -> BandedSymmetricMatrix:
    """Scaled Hamiltonian of the parametrically driven oscillator.

    g = (Q^2+P^2)^2/4 + (1-mu)P^2/2 - (1+mu)Q^2/2.  In ladder operators the
    drive term contributes -(lam/2)(a^2 + a+^2), so the matrix couples only
    n and n+2 (parity conservation): diagonal
    lam^2(2n+1)^2/4 - (lam/2) mu (2n+1), second off-diagonal
    -(lam/2) sqrt((n+1)(n+2)), first off-diagonal identically zero.
    """
    if lam <= 0:
        raise NumericError("lambda must be positive")
    n = np.arange(dim)
    diag = 0.25 * lam * lam * (2 * n + 1.0) ** 2 - 0.5 * lam * mu * (2 * n + 1.0)
    off1 = np.zeros(dim - 1)
    m = np.arange(dim - 2)
    off2 = -0.5 * lam * np.sqrt((m + 1.0) * (m + 2.0))
    return BandedSymmetricMatrix(dim=dim, bandwidth=2, bands=[diag, off1, off2],
                                 lam=lam, kind="parametric")


# ---------------------------------------------------------------------------
# eigensolver core
# ---------------------------------------------------------------------------

def _tridiag_ql(d, e, z, max_iter=50):
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix.

    d is the diagonal, e[i] couples i and i+1 (e[-1] is a workspace slot),
    z accumulates the orthogonal transformations column-wise (may be None).
    Modifies d, e, z in place; d holds the unordered eigenvalues on return.
    """
    n = len(d)
    for l in range(n):
        iterations = 0
        while True:
            m = n - 1
            for mm in range(l, n - 1):
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    m = mm
                    break
            if m == l:
                break
            iterations += 1
            if iterations > max_iter:
                raise ConvergenceError(
                    f"QL iteration failed to converge for eigenvalue {l}", index=l)
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    f_col = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * f_col
                    z[:, i] = c * z[:, i] - s * f_col
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0


def _apply_rotation(a, z, i, j, c, s):
    """Two-sided Givens rotation in the (i, j) plane of dense a, tracked in z."""
    ri = a[i, :].copy()
    rj = a[j, :].copy()
    a[i, :] = c * ri + s * rj
    a[j, :] = -s * ri + c * rj
    ci = a[:, i].copy()
    cj = a[:, j].copy()
    a[:, i] = c * ci + s * cj
    a[:, j] = -s * ci + c * cj
    zi = z[:, i].copy()
    zj = z[:, j].copy()
    z[:, i] = c * zi + s * zj
    z[:, j] = -s * zi + c * zj


def _band_reduce_to_tridiag(a, z):
    """Reduce a dense symmetric pentadiagonal matrix to tridiagonal form.

    Eliminates each second-subdiagonal entry with a Givens rotation and
    chases the resulting bulge down the band.
    """
    n = a.shape[0]
    scale = max(np.max(np.abs(a)), 1.0)
    tiny = 1e-15 * scale
    for k in range(n - 2):
        if abs(a[k + 2, k]) > tiny:
            r = math.hypot(a[k + 1, k], a[k + 2, k])
            _apply_rotation(a, z, k + 1, k + 2, a[k + 1, k] / r, a[k + 2, k] / r)
        a[k + 2, k] = a[k, k + 2] = 0.0
        q = k + 1
        while q + 3 < n and abs(a[q + 3, q]) > tiny:
            r = math.hypot(a[q + 2, q], a[q + 3, q])
            _apply_rotation(a, z, q + 2, q + 3, a[q + 2, q] / r, a[q + 3, q] / r)
            a[q + 3, q] = a[q, q + 3] = 0.0
            q += 2


def _solve_tridiagonal(diag, off):
    """All eigenpairs of a symmetric tridiagonal matrix, unsorted."""
    n = len(diag)
    d = np.array(diag, dtype=float)
    e = np.zeros(n)
    e[: n - 1] = off
    z = np.eye(n)
    _tridiag_ql(d, e, z)
    return d, z


def _fix_signs(vectors, threshold=1e-8):
    """Flip columns so the first coefficient above threshold is positive."""
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        idx = np.nonzero(np.abs(col) > threshold)[0]
        lead = idx[0] if len(idx) else int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            vectors[:, k] = -col
    return vectors


def eigensolve(matrix: BandedSymmetricMatrix, k: int | None = None) -> Spectrum:
    """Lowest k eigenpairs of a banded symmetric matrix, ascending.

    Pentadiagonal input with a vanishing first off-diagonal splits exactly
    into even/odd parity chains, each solved as a tridiagonal problem; this
    keeps the near-degenerate double-well doublets parity-pure.  A genuinely
    pentadiagonal matrix goes through Givens band reduction first.
    """
    dim = matrix.dim
    if k is None:
        k = dim
    if not 1 <= k <= dim:
        raise NumericError(f"requested {k} eigenpairs from dimension {dim}")

    if matrix.bandwidth == 0:
        vals = np.array(matrix.bands[0], dtype=float)
        vecs = np.eye(dim)
    elif matrix.bandwidth == 1:
        vals, vecs = _solve_tridiagonal(matrix.bands[0], matrix.bands[1])
    elif matrix.bandwidth == 2 and not np.any(matrix.bands[1]):
        vals = np.empty(dim)
        vecs = np.zeros((dim, dim))
        for start in (0, 1):
            sel = np.arange(start, dim, 2)
            sub_d = matrix.bands[0][sel]
            sub_e = matrix.bands[2][sel[:-1]] if len(sel) > 1 else np.zeros(0)
            sv, sz = _solve_tridiagonal(sub_d, sub_e)
            vals[sel] = sv
            vecs[np.ix_(sel, sel)] = sz
    else:
        dense = matrix.to_dense()
        z = np.eye(dim)
        _band_reduce_to_tridiag(dense, z)
        d = np.diagonal(dense).copy()
        e = np.zeros(dim)
        e[: dim - 1] = np.diagonal(dense, 1)
        _tridiag_ql(d, e, z)
        vals, vecs = d, z

    order = np.argsort(vals, kind="stable")[:k]
    vals = vals[order]
    vecs = _fix_signs(vecs[:, order].copy())

    spec = Spectrum(eigenvalues=vals, vectors=vecs,
                    lam=matrix.lam, kind=matrix.kind)
    _attach_observables(spec)
    return spec


def _attach_observables(spec: Spectrum):
    lam = spec.lam
    if lam is None:
        return
    dim, k = spec.vectors.shape
    n = np.arange(dim)
    qband = np.sqrt(lam * 0.5 * (n[:-1] + 1.0))
    v = spec.vectors
    spec.q_mean = 2.0 * np.einsum("i,ik,ik->k", qband, v[:-1, :], v[1:, :])
    spec.p_mean = np.zeros(k)
    spec.r2_mean = lam * np.einsum("i,ik->k", 2.0 * n + 1.0, v * v)
    if spec.kind == "parametric":
        even = np.sum(v[0::2, :] ** 2, axis=0)
        odd = np.sum(v[1::2, :] ** 2, axis=0)
        spec.parity = np.where(even >= odd, 1, -1)
    else:
        spec.parity = np.zeros(k, dtype=int)


def expectation(op, state: np.ndarray):
    """<state|op|state> for a dense or banded operator.

    The state must be normalized to 1e-10; complex operators return the
    (real, if hermitian) sesquilinear form value.
    """
    if isinstance(op, BandedSymmetricMatrix):
        op = op.to_dense()
    op = np.asarray(op)
    state = np.asarray(state)
    if op.shape != (state.size, state.size):
        raise NumericError(
            f"operator shape {op.shape} incompatible with state of size {state.size}")
    nrm = np.vdot(state, state).real
    if abs(nrm - 1.0) > 1e-10:
        raise NumericError(f"state not normalized (|<s|s>-1| = {abs(nrm - 1):.2e})")
    val = np.vdot(state, op @ state)
    return val.real if abs(val.imag) < 1e-12 * max(1.0, abs(val.real)) else val


def truncation_check(builder, params: tuple, k: int, tol: float,
                     start: int | None = None, cap: int = 4096) -> int:
    """Smallest basis size certifying the lowest k eigenvalues to tol.

    Walks a doubling schedule from `start` (default k) and accepts the first
    D whose lowest-k eigenvalues move by less than tol when D grows by 25%.
    Production spectra should only be trusted at a certified D.
    """
    if k < 1 or tol <= 0:
        raise NumericError("need k >= 1 and tol > 0")
    d = max(2, k if start is None else start)
    while d <= cap:
        grown = max(d + 1, int(math.ceil(1.25 * d)))
        here = eigensolve(builder(*params, d), min(k, d)).eigenvalues
        there = eigensolve(builder(*params, grown), min(k, d)).eigenvalues
        if len(here) == k and np.max(np.abs(here - there)) < tol:
            return d
        d *= 2
    raise ConvergenceError(
        f"truncation not certified up to D={cap} (k={k}, tol={tol:g})")
