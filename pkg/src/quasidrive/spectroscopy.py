"""Detuning sweeps, susceptibilities, avoided crossings and multiphoton Rabi gaps.

Sweeps run in the reduced coordinates d = delta_omega/V (detuning in units of
the anharmonic level shift) and r = A/A_N.  Levels are followed diabatically
by eigenvector overlap between neighboring sweep points, with adaptive grid
bisection where the overlap degrades; through anticrossings wider than the
local grid step this naturally follows the adiabatic branches, which is what
an adiabatic-passage measurement sees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, TrackingError
from .fockspace import build_g_resonant, eigensolve, truncation_check
from .scaling import ResonanceSpec, resonant_sweep_map, quasienergy_in_v_units

#: minimal acceptable eigenvector overlap between adjacent sweep points
OVERLAP_FLOOR = 0.9
#: maximal bisection depth when refining around an overlap failure
MAX_REFINE_DEPTH = 20


@dataclass
class SweepResult:
    """Tracked levels and susceptibilities along a detuning sweep.

    axis: sweep values of d (including refinement-inserted points)
    labels: diabatic labels, one per tracked level (initial Fock indices)
    g: (npoints, nlabels) tracked eigenvalues of the scaled Hamiltonian
    chi: (npoints, nlabels) reduced susceptibilities 2 lam <Q>/sqrt(beta)
    overlap: (npoints, nlabels) overlap used when assigning each label
        (1.0 at the first point); NaN marks points bridged over
    """

    axis: np.ndarray
    labels: list
    g: np.ndarray
    chi: np.ndarray
    overlap: np.ndarray
    N: int = 0
    r: float = 0.0
    dim: int = 0
    refined_points: int = 0

    def column(self, label):
        return self.labels.index(label)


@dataclass
class RabiEstimate:
    """Minimal splitting of a resonating level pair.

    gap_g is in g-units, gap_v in units of V (gap_v = gap_g / (2 lam^2) at
    the gap location); formula_value is the weak-drive asymptotic
    r^N N^{5/4} (2 pi)^{-3/4} for comparison, in the same V units.
    """

    N: int
    location: float
    gap_g: float
    gap_v: float
    formula_value: float
    bracket: tuple = field(default=(0.0, 0.0))


def perturbative_amplitude(n: int, d: float) -> float:
    """First-order reduced vibration amplitude of Fock state n at detuning d.

    chi_n = -d / ((d - n)(d - n - 1)); poles at d = n and d = n + 1 are the
    single-photon resonances of the neighboring transitions.
    """
    den1 = d - n
    den2 = d - n - 1.0
    if abs(den1) < 1e-9 or abs(den2) < 1e-9:
        raise NumericError(
            f"chi^(1) undefined at single-photon resonance (n={n}, d={d:g})")
    return -d / (den1 * den2)


def susceptibility(spectrum, index: int, lam: float, beta: float) -> float:
    """Reduced susceptibility chi = 2 lam <Q> / sqrt(beta) of one eigenstate.

    Normalized so that it reproduces perturbative_amplitude to first order in
    the drive.  beta must be positive; at zero drive use the perturbative
    formula instead.
    """
    if beta <= 0:
        raise NumericError("susceptibility needs beta > 0; "
                           "use perturbative_amplitude at zero drive")
    return 2.0 * lam * spectrum.q_mean[index] / math.sqrt(beta)


def rabi_formula(N: int, r: float) -> float:
    """Weak-drive multiphoton Rabi splitting in units of V.

    Omega_R / V = r^N N^{5/4} (2 pi)^{-3/4}, the large-N lowest-order-in-drive
    asymptote; the r^N power law holds numerically throughout r < 1.
    """
    if N < 1:
        raise NumericError("N must be >= 1")
    if r < 0:
        raise NumericError("r must be >= 0")
    return r ** N * N ** 1.25 * (2.0 * math.pi) ** -0.75


def _solve_point(N: int, r: float, d: float, dim: int, k: int):
    model = resonant_sweep_map(ResonanceSpec(N=N, detuning_over_V=d, drive_ratio=r))
    spec = eigensolve(build_g_resonant(model.lam, model.beta, dim), k)
    return model, spec


def certify_dimension(N: int, r: float, d_values, k: int | None = None,
                      tol: float = 1e-11) -> int:
    """Certified Fock-space size for a set of sweep points.

    Certifies at the extreme d values (largest and smallest lambda) and takes
    the maximum, so one D serves the whole sweep.
    """
    if k is None:
        k = N + 5
    need = 0
    for d in (min(d_values), max(d_values)):
        model = resonant_sweep_map(ResonanceSpec(N=N, detuning_over_V=d, drive_ratio=r))
        need = max(need, truncation_check(
            build_g_resonant, (model.lam, model.beta), k, tol, start=max(2 * k, 16)))
    return need


def _assign(prev_vectors: np.ndarray, vecs: np.ndarray):
    """Greedily match previous tracked vectors to current eigenvectors.

    Returns (indices, overlaps, signs); each current state is used at most
    once, strongest overlaps assigned first.
    """
    ov = np.abs(prev_vectors.T @ vecs)          # (nlabels, nstates)
    nlab = ov.shape[0]
    taken = np.zeros(ov.shape[1], dtype=bool)
    idx = np.full(nlab, -1)
    got = np.zeros(nlab)
    order = np.argsort(-np.max(ov, axis=1), kind="stable")
    for lab in order:
        row = np.where(taken, -1.0, ov[lab])
        j = int(np.argmax(row))
        idx[lab] = j
        got[lab] = row[j]
        taken[j] = True
    signs = np.sign(np.sum(prev_vectors * vecs[:, idx], axis=0))
    signs[signs == 0] = 1.0
    return idx, got, signs


def sweep_detuning(N: int, r: float, d_range, grid: int, dim: int | None = None,
                   n_track: int | None = None, k_solve: int | None = None) -> SweepResult:
    """Track quasienergy levels and susceptibilities over a detuning range.

    Parameters
    ----------
    N, r : resonance order and reduced drive amplitude (r may be 0)
    d_range : (lo, hi) with 0 < lo < hi, in units of V
    grid : number of initial grid points, >= 3
    dim : Fock-space size; certified via truncation_check when omitted
    n_track : number of diabatic labels to follow (default N+2)
    k_solve : eigenpairs computed per point (default n_track+4)

    Tracked labels are the Fock indices of the eigenstates at the first
    point.  Around overlap failures the grid bisects adaptively; a point at
    which some label cannot be matched even at the refinement floor (for
    example an exactly degenerate multiphoton crossing at zero drive) is
    bridged: its entry is kept with overlap NaN and tracking continues from
    the last good point.  Persistent failure over consecutive points raises
    TrackingError identifying the crossing.
    """
    lo, hi = float(d_range[0]), float(d_range[1])
    if not (0.0 < lo < hi):
        raise NumericError("d_range must satisfy 0 < lo < hi")
    if grid < 3:
        raise NumericError("grid must have at least 3 points")
    if n_track is None:
        n_track = N + 2
    if k_solve is None:
        k_solve = n_track + 4
    if dim is None:
        dim = certify_dimension(N, r, (lo, hi), k=k_solve)

    d_values = list(np.linspace(lo, hi, grid))
    rows = []

    model0, spec0 = _solve_point(N, r, d_values[0], dim, k_solve)
    fock_rows = np.eye(dim, n_track)
    idx0, ov0, _ = _assign(fock_rows, spec0.vectors)
    labels = list(range(n_track))
    rows.append(_make_row(d_values[0], model0, spec0, idx0, np.ones(n_track)))
    prev = spec0.vectors[:, idx0]
    refined = 0

    i = 1
    pending = []          # stack of d values still to process before d_values[i]
    current_target = d_values[i]
    last_good_d = d_values[0]
    depth_map = {}

    def process(d, depth):
        nonlocal prev, last_good_d, refined
        model, spec = _solve_point(N, r, d, dim, k_solve)
        idx, ov, signs = _assign(prev, spec.vectors)
        if np.min(ov) >= OVERLAP_FLOOR:
            prev = spec.vectors[:, idx] * signs
            rows.append(_make_row(d, model, spec, idx, ov))
            last_good_d = d
            return True
        if depth < MAX_REFINE_DEPTH and d - last_good_d > 1e-14 * max(1.0, abs(d)):
            return False
        # refinement floor reached: bridge this point
        bad = ov < OVERLAP_FLOOR
        keep = spec.vectors[:, idx] * signs
        prev_keep = prev.copy()
        prev = np.where(bad[None, :], prev_keep, keep)
        ov = ov.astype(float)
        ov[bad] = np.nan
        rows.append(_make_row(d, model, spec, idx, ov))
        return True

    while i < len(d_values):
        target = pending[-1] if pending else d_values[i]
        depth = depth_map.get(target, 0)
        if process(target, depth):
            if pending:
                pending.pop()
            else:
                i += 1
        else:
            mid = 0.5 * (last_good_d + target)
            refined += 1
            depth_map[mid] = depth + 1
            depth_map[target] = depth + 1
            pending.append(mid)
            if refined > grid * (MAX_REFINE_DEPTH + 4):
                raise TrackingError(
                    f"diabatic tracking lost near d = {target:.6g}", location=target)

    rows.sort(key=lambda t: t[0])
    axis = np.array([t[0] for t in rows])
    g = np.array([t[1] for t in rows])
    chi = np.array([t[2] for t in rows])
    overlap = np.array([t[3] for t in rows])
    return SweepResult(axis=axis, labels=labels, g=g, chi=chi, overlap=overlap,
                       N=N, r=r, dim=dim, refined_points=refined)


def _make_row(d, model, spec, idx, ov):
    g_row = spec.eigenvalues[idx]
    if model.beta > 0:
        chi_row = 2.0 * model.lam * spec.q_mean[idx] / math.sqrt(model.beta)
    else:
        chi_row = np.empty(len(idx))
        for j in range(len(idx)):
            try:
                chi_row[j] = perturbative_amplitude(j, d)
            except NumericError:
                chi_row[j] = np.nan
    return (d, g_row, chi_row, np.asarray(ov, dtype=float))


def _pair_gap(N: int, r: float, d: float, dim: int, k: int) -> tuple:
    """Gap between the two eigenstates carrying the (0, N) Fock weight."""
    model, spec = _solve_point(N, r, d, dim, k)
    w = spec.vectors[0, :] ** 2 + spec.vectors[N, :] ** 2
    a, b = np.argsort(-w)[:2]
    gap = abs(spec.eigenvalues[a] - spec.eigenvalues[b])
    return gap, model.lam


def _golden_min(f, a, b, rtol=1e-10):
    """Golden-section minimum of a unimodal scalar function on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > rtol * (abs(a) + abs(b)):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def min_gap(N: int, r: float, bracket, dim: int | None = None,
            k_solve: int | None = None) -> RabiEstimate:
    """Locate the avoided crossing of the (0, N) pair and its minimal gap.

    The bracket (in d) must contain exactly one anticrossing of the pair;
    the gap is golden-section minimized to relative tolerance 1e-10 in d.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0.0 < lo < hi):
        raise NumericError("bracket must satisfy 0 < lo < hi")
    if r <= 0:
        raise NumericError("min_gap needs r > 0 (levels cross exactly at r = 0)")
    if k_solve is None:
        k_solve = N + 5
    if dim is None:
        dim = certify_dimension(N, r, (lo, hi), k=k_solve)

    def f(d):
        return _pair_gap(N, r, d, dim, k_solve)[0]

    d_star, gap = _golden_min(f, lo, hi)
    if min(d_star - lo, hi - d_star) < 2e-9 * (hi - lo):
        raise NumericError(
            f"gap minimum sits at the bracket edge ({d_star:g}); no interior "
            "anticrossing found")
    lam_star = 0.5 / d_star
    return RabiEstimate(N=N, location=d_star, gap_g=gap,
                        gap_v=quasienergy_in_v_units(gap, lam_star),
                        formula_value=rabi_formula(N, r), bracket=(lo, hi))


def write_sweep_csv(sweep: SweepResult, fh, float_fmt="%.17g"):
    """Write a SweepResult as CSV rows (d, n_diabatic, g_n, chi_n, overlap)."""
    fh.write("d,n_diabatic,g_n,chi_n,overlap\n")
    for i, d in enumerate(sweep.axis):
        for j, lab in enumerate(sweep.labels):
            fh.write(",".join([
                float_fmt % d,
                str(lab),
                float_fmt % sweep.g[i, j],
                float_fmt % sweep.chi[i, j],
                float_fmt % sweep.overlap[i, j],
            ]) + "\n")
