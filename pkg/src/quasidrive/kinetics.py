"""Dissipative kinetics over Floquet states: rates, balance equation, escape.

Weak coupling to a thermal bath causes single-quantum jumps of the lab-frame
oscillator; in the rotating frame the jump operator is the scaled lowering
operator of (Q, P) up to a phase, so the population dynamics over Floquet
states follows the balance equation

    drho_nu/dt = -sum_mu W[nu, mu] rho_nu + sum_mu W[mu, nu] rho_mu,
    W[nu, mu]  = Gamma [ (nbar+1) |<mu|a|nu>|^2 + nbar |<mu|a+|nu>|^2 ].

Coherences are dropped (secular approximation), valid when the dissipation
rate exceeds the tunneling splittings; this is assumed, not checked.  Because
Floquet states superpose many Fock states, W allows transitions that raise
the quasienergy distance from a metastable extremum even at nbar = 0; the
resulting diffusion gives the stationary distribution a finite width and an
activation-type escape exponent R_A, with rates scaling as exp(-R_A/lambda).
Gamma only sets the overall time scale: all exponents are Gamma-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import NumericError
from .fockspace import (Spectrum, _attach_observables, build_g_parametric,
                        build_g_resonant, eigensolve)
from .semiclassics import SurfaceGeometry, find_extrema, tunneling_exponent

#: states closer than this (in g) to the saddle value are left unclassified
SADDLE_MARGIN_FRACTION = 0.02


@dataclass
class RateMatrix:
    """Transition rates between Floquet states, in units of Gamma.

    w[i, j] is the rate i -> j; the diagonal is zero (the balance equation
    only uses off-diagonal sums).  g holds the quasienergies of the basis
    states, in the order the rows/columns use.
    """

    w: np.ndarray
    g: np.ndarray
    gamma: float
    nbar: float

    @property
    def size(self) -> int:
        return self.w.shape[0]

    def generator(self, support=None) -> np.ndarray:
        """Balance-equation generator L with drho/dt = L rho on a support set.

        Restriction keeps only flows within the support (the chain
        conditioned on staying there); columns of L sum to zero.
        """
        idx = np.arange(self.size) if support is None else np.asarray(support)
        ws = self.w[np.ix_(idx, idx)].copy()
        np.fill_diagonal(ws, 0.0)
        gen = ws.T.copy()
        np.fill_diagonal(gen, -ws.sum(axis=1))
        return gen


@dataclass
class Distribution:
    """Occupations of Floquet states with the solver residual."""

    rho: np.ndarray
    support: np.ndarray
    residual: float

    def __post_init__(self):
        total = self.rho.sum()
        if abs(total - 1.0) > 1e-12:
            raise NumericError(f"distribution not normalized ({total!r})")


@dataclass
class EscapeReport:
    """Activation-vs-tunneling comparison for one metastable well."""

    kind: str
    beta: float
    mu: float
    nbar: float
    lambdas: list
    r_values: list
    well_sizes: list
    activation_exponent: float
    activation_slope: float
    fit_max_residual: float
    tunneling_exponent: float
    mfpt: float
    mfpt_lambda: float
    verdict: str
    near_boundary: bool = False
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "kind", "beta", "mu", "nbar", "lambdas", "r_values", "well_sizes",
            "activation_exponent", "activation_slope", "fit_max_residual",
            "tunneling_exponent", "mfpt", "mfpt_lambda", "verdict",
            "near_boundary", "warnings")}


def rate_matrix(spectrum: Spectrum, lowering: np.ndarray, gamma: float,
                nbar: float, vectors: np.ndarray | None = None,
                g_values: np.ndarray | None = None) -> RateMatrix:
    """Bath-induced transition rates between the states of a spectrum.

    `vectors` may override the basis (e.g. well-localized doublet
    combinations); columns must live in the same Fock space as `lowering`.
    """
    if gamma <= 0 or nbar < 0:
        raise NumericError("need gamma > 0 and nbar >= 0")
    v = spectrum.vectors if vectors is None else vectors
    g = spectrum.eigenvalues if g_values is None else g_values
    if lowering.shape[0] != v.shape[0]:
        raise NumericError("lowering operator and eigenvectors use different bases")
    amp = v.T @ lowering @ v             # amp[mu, nu] = <mu|a|nu>
    down = amp ** 2                      # |<mu|a|nu>|^2, index [mu, nu]
    w = gamma * ((nbar + 1.0) * down.T + nbar * down)
    np.fill_diagonal(w, 0.0)
    return RateMatrix(w=w, g=np.array(g, dtype=float), gamma=gamma, nbar=nbar)


def _closed_classes(adj):
    """Closed communicating classes of a boolean adjacency matrix (Kosaraju)."""
    n = adj.shape[0]
    order = []
    seen = np.zeros(n, dtype=bool)
    for s in range(n):
        if seen[s]:
            continue
        stack = [(s, iter(np.nonzero(adj[s])[0]))]
        seen[s] = True
        while stack:
            node, it = stack[-1]
            advanced = False
            for j in it:
                if not seen[j]:
                    seen[j] = True
                    stack.append((int(j), iter(np.nonzero(adj[j])[0])))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
    comp = -np.ones(n, dtype=int)
    ncomp = 0
    radj = adj.T
    for s in reversed(order):
        if comp[s] >= 0:
            continue
        frontier = [s]
        comp[s] = ncomp
        while frontier:
            i = frontier.pop()
            for j in np.nonzero(radj[i])[0]:
                if comp[j] < 0:
                    comp[j] = ncomp
                    frontier.append(int(j))
        ncomp += 1
    closed = []
    for c in range(ncomp):
        members = np.nonzero(comp == c)[0]
        leaves = adj[np.ix_(members, np.setdiff1d(np.arange(n), members))]
        if not leaves.any():
            closed.append(members)
    return closed


def stationary(rates: RateMatrix, support=None) -> Distribution:
    """Stationary distribution of the balance equation on a support set.

    Solves for the null vector of the support-restricted generator by direct
    elimination with one pass of iterative refinement; the restricted chain
    must be irreducible.
    """
    idx = np.arange(rates.size) if support is None else np.asarray(support, dtype=int)
    if len(idx) == 0:
        raise NumericError("empty support set")
    if len(idx) == 1:
        return Distribution(rho=np.array([1.0]), support=idx, residual=0.0)
    closed = _closed_classes(rates.w[np.ix_(idx, idx)] > 0.0)
    if len(closed) != 1:
        blocks = [sorted(idx[c].tolist()) for c in closed]
        raise NumericError(
            "restricted chain has no unique stationary state; closed "
            f"communicating classes: {blocks}")
    gen = rates.generator(idx)
    # state-elimination (censoring) solve: all operations act on nonnegative
    # rates, so components keep relative accuracy even when the stationary
    # vector spans many decades (deep metastable wells)
    n = len(idx)
    order = np.concatenate([closed[0],
                            np.setdiff1d(np.arange(n), closed[0])]).astype(int)
    w = rates.w[np.ix_(idx, idx)][np.ix_(order, order)].copy()
    np.fill_diagonal(w, 0.0)
    for k in range(n - 1, 0, -1):
        s = w[k, :k].sum()
        if s <= 0.0:
            raise NumericError("state elimination stalled; chain inconsistent")
        w[:k, :k] += np.outer(w[:k, k], w[k, :k]) / s
        np.fill_diagonal(w[:k, :k], 0.0)
    # rows/columns of eliminated states keep their time-of-elimination
    # (censored) values, which is exactly what back-substitution needs
    rho_o = np.zeros(n)
    rho_o[0] = 1.0
    for k in range(1, n):
        rho_o[k] = np.dot(rho_o[:k], w[:k, k]) / w[k, :k].sum()
    rho = np.empty(n)
    rho[order] = rho_o
    rho /= rho.sum()
    residual = float(np.max(np.abs(gen @ rho)))
    return Distribution(rho=rho, support=idx, residual=residual)


def evolve(rates: RateMatrix, rho0: np.ndarray, t: float) -> Distribution:
    """Propagate occupations by exp(L t); conserves total probability."""
    if t < 0:
        raise NumericError("t must be >= 0")
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape != (rates.size,):
        raise NumericError("rho0 has wrong length")
    if abs(rho0.sum() - 1.0) > 1e-10:
        raise NumericError("rho0 not normalized")
    rho = expm(rates.generator() * t) @ rho0
    rho = np.maximum(rho, 0.0)
    rho /= rho.sum()
    return Distribution(rho=rho, support=np.arange(rates.size), residual=0.0)


def mean_first_passage(rates: RateMatrix, start: int, absorbing) -> float:
    """Expected time (units of 1/Gamma) to first reach the absorbing set."""
    absorbing = np.asarray(sorted(set(int(a) for a in absorbing)), dtype=int)
    if start in absorbing:
        return 0.0
    transient = np.array([i for i in range(rates.size) if i not in set(absorbing.tolist())])
    # reachability of the absorbing set from the start
    seen = {start}
    frontier = [start]
    hit = False
    while frontier and not hit:
        i = frontier.pop()
        for j in np.nonzero(rates.w[i] > 0)[0]:
            if j in absorbing:
                hit = True
                break
            if j not in seen:
                seen.add(j)
                frontier.append(int(j))
    if not hit:
        raise NumericError("absorbing set unreachable from the start state")
    wtt = rates.w[np.ix_(transient, transient)]
    out = rates.w[transient, :].sum(axis=1)
    a = np.diag(out) - wtt
    tau = np.linalg.solve(a, np.ones(len(transient)))
    return float(tau[np.nonzero(transient == start)[0][0]])


# ---------------------------------------------------------------------------
# well classification and escape
# ---------------------------------------------------------------------------

@dataclass
class WellBasis:
    """States assigned to one metastable well, ordered from its extremum
    toward the saddle; vectors may be localized doublet combinations."""

    label: str
    indices: np.ndarray          # positions in the g-ordering used for rates
    g: np.ndarray
    vectors: np.ndarray
    ambiguous: list = field(default_factory=list)


def classify_wells(spectrum: Spectrum, geometry: SurfaceGeometry):
    """Assign Floquet states to the wells of the quasienergy surface.

    Resonant: a state is "dome" when its g lies between the saddle and the
    dome-top values and its mean square radius stays below the saddle ring;
    remaining states are "rim" (below the saddle) or "outside".  Parametric:
    opposite-parity doublets below the saddle are paired by gap and rotated
    into left/right localized combinations.  States within a margin of the
    saddle value stay unclassified ("ambiguous") and are excluded from
    exponent estimates.
    """
    if geometry.kind == "resonant":
        return _classify_resonant(spectrum, geometry)
    return _classify_parametric(spectrum, geometry)


def _classify_resonant(spectrum, geometry):
    if not geometry.bistable:
        raise NumericError("well classification needs the bistable regime")
    g_saddle = geometry.g_saddle
    g_top = geometry.dome_top.g
    r2_saddle = geometry.saddle.q ** 2
    margin = SADDLE_MARGIN_FRACTION * (g_top - g_saddle)
    labels = []
    for i, g in enumerate(spectrum.eigenvalues):
        if abs(g - g_saddle) < margin:
            labels.append("ambiguous")
        elif g_saddle < g <= g_top + margin and spectrum.r2_mean[i] < r2_saddle:
            labels.append("dome")
        elif g < g_saddle:
            labels.append("rim")
        else:
            labels.append("outside")
    dome_idx = np.array([i for i, s in enumerate(labels) if s == "dome"], dtype=int)
    # order from the well extremum (dome top, highest g) toward the saddle
    dome_idx = dome_idx[np.argsort(-spectrum.eigenvalues[dome_idx])]
    well = WellBasis(label="dome", indices=dome_idx,
                     g=spectrum.eigenvalues[dome_idx],
                     vectors=spectrum.vectors[:, dome_idx],
                     ambiguous=[i for i, s in enumerate(labels) if s == "ambiguous"])
    return labels, well


def _classify_parametric(spectrum, geometry):
    if not geometry.bistable:
        raise NumericError("well classification needs |mu| < 1")
    mu = geometry.mu
    g_well = -0.25 * (1.0 + mu) ** 2
    margin = SADDLE_MARGIN_FRACTION * abs(g_well)
    order = np.argsort(spectrum.eigenvalues)
    below = [i for i in order if spectrum.eigenvalues[i] < -margin]
    labels = ["outside"] * spectrum.size
    pairs = []
    used = set()
    for pos, i in enumerate(below):
        if i in used:
            continue
        partner = None
        for j in below[pos + 1:]:
            if j in used:
                continue
            if spectrum.parity[j] != spectrum.parity[i]:
                partner = j
                break
        if partner is None:
            labels[i] = "ambiguous"
            continue
        gap = abs(spectrum.eigenvalues[partner] - spectrum.eigenvalues[i])
        others = [j for j in below if j not in (i, partner) and j not in used]
        nearest = min((abs(spectrum.eigenvalues[j] - spectrum.eigenvalues[i])
                       for j in others), default=np.inf)
        if gap > 0.5 * nearest:
            labels[i] = "ambiguous"
            continue
        pairs.append((i, partner))
        used.update((i, partner))
        labels[i] = labels[partner] = "doublet"
    right_vecs, right_g = [], []
    dim = spectrum.dim
    n = np.arange(dim - 1)
    qband = np.sqrt(spectrum.lam * 0.5 * (n + 1.0))
    for i, j in pairs:
        ve, vo = spectrum.vectors[:, i], spectrum.vectors[:, j]
        # <even|Q|odd> fixes which combination localizes at Q > 0
        cross = float(np.sum(qband * (ve[:-1] * vo[1:] + ve[1:] * vo[:-1])))
        sign = 1.0 if cross > 0 else -1.0
        vr = (ve + sign * vo) / math.sqrt(2.0)
        right_vecs.append(vr)
        right_g.append(0.5 * (spectrum.eigenvalues[i] + spectrum.eigenvalues[j]))
    right_g = np.array(right_g)
    order = np.argsort(right_g)          # from well bottom upward
    vecs = np.array(right_vecs).T[:, order] if right_vecs else np.zeros((dim, 0))
    well = WellBasis(label="right", indices=np.arange(len(right_g)),
                     g=right_g[order], vectors=vecs,
                     ambiguous=[i for i, s in enumerate(labels) if s == "ambiguous"])
    return labels, well


def _lowering(dim):
    a = np.zeros((dim, dim))
    m = np.arange(1, dim)
    a[m - 1, m] = np.sqrt(m)
    return a


def disentangle_radial(spectrum: Spectrum, gap_ratio: float = 0.2) -> Spectrum:
    """Rotate quasi-degenerate eigenpairs to definite radial character.

    Dome and outer-sheet states of the tilted-hat surface hybridize whenever
    the two quantization ladders align to within the dynamical-tunneling
    splitting (the near-equal sheet periods make whole ladders align at
    once).  Diagonalizing <Q^2 + P^2> inside each pair whose gap is small
    against the local level spacing restores sheet-localized states, which
    is the right basis for secular kinetics when the dissipation rate
    exceeds the splitting.  Pairs that are already sheet-pure have no radial
    cross term, so the rotation is then the identity and always safe.
    """
    vals = spectrum.eigenvalues
    vecs = spectrum.vectors.copy()
    dim = spectrum.dim
    lam = spectrum.lam
    n = np.arange(dim)
    r2diag = lam * (2.0 * n + 1.0)
    gaps = np.diff(vals)
    i = 0
    while i < len(vals) - 1:
        left = gaps[i - 1] if i > 0 else np.inf
        right = gaps[i + 1] if i + 1 < len(gaps) else np.inf
        if gaps[i] < gap_ratio * min(left, right):
            va = vecs[:, i].copy()
            vb = vecs[:, i + 1].copy()
            m = np.empty((2, 2))
            m[0, 0] = np.sum(r2diag * va * va)
            m[1, 1] = np.sum(r2diag * vb * vb)
            m[0, 1] = m[1, 0] = np.sum(r2diag * va * vb)
            _, rot = np.linalg.eigh(m)
            vecs[:, i] = rot[0, 0] * va + rot[1, 0] * vb
            vecs[:, i + 1] = rot[0, 1] * va + rot[1, 1] * vb
            i += 2
        else:
            i += 1
    out = Spectrum(eigenvalues=vals.copy(), vectors=vecs,
                   lam=lam, kind=spectrum.kind)
    _attach_observables(out)
    return out


def _well_spectrum_resonant(beta, lam, nbar, dim=None):
    geometry = find_extrema("resonant", beta=beta)
    if dim is None:
        dim = max(64, int(3.2 / lam))
    # full spectrum: the dome states sit above every rim-valley state, so a
    # partial solve risks missing them
    spec = eigensolve(build_g_resonant(lam, beta, dim), dim)
    if spec.eigenvalues[-1] < geometry.dome_top.g:
        raise NumericError("basis too small to cover the dome quasienergies")
    spec = disentangle_radial(spec)
    labels, well = classify_wells(spec, geometry)
    return geometry, spec, labels, well


def _well_spectrum_parametric(mu, lam, nbar, dim=None):
    geometry = find_extrema("parametric", mu=mu)
    if dim is None:
        dim = max(64, int(4.0 * (1.0 + abs(mu)) / lam))
    spec = eigensolve(build_g_parametric(lam, mu, dim), dim)
    labels, well = classify_wells(spec, geometry)
    return geometry, spec, labels, well


def _well_chain(kind, param, lam, nbar):
    """Rates restricted to one well's states, ordered extremum -> boundary."""
    if kind == "resonant":
        geometry, spec, labels, well = _well_spectrum_resonant(param, lam, nbar)
        vecs = well.vectors
        g_vals = well.g
    else:
        geometry, spec, labels, well = _well_spectrum_parametric(param, lam, nbar)
        order = np.argsort(well.g)       # bottom (extremum) first
        vecs = well.vectors[:, order]
        g_vals = well.g[order]
    rates = rate_matrix(spec, _lowering(spec.dim), 1.0, nbar,
                        vectors=vecs, g_values=g_vals)
    return geometry, spec, labels, well, rates


def activation_exponent(kind: str, param: float, lam_values, nbar: float = 0.0,
                        min_well_states: int = 2):
    """Quasienergy-diffusion escape exponent extrapolated to lambda -> 0.

    For each lambda the stationary distribution of the well-restricted chain
    gives r(lambda) = -lambda ln(rho_boundary / rho_extremum); a linear fit
    in lambda extrapolates to the semiclassical exponent R_A.  Wells with
    fewer than min_well_states usable states are skipped with a warning
    (shallow wells hold only a few levels at moderate lambda).
    """
    lam_values = sorted(lam_values, reverse=True)
    if len(lam_values) < 2:
        raise NumericError("need at least two lambda values for extrapolation")
    rs, used, sizes, warnings = [], [], [], []
    for lam in lam_values:
        _, _, _, well, rates = _well_chain(kind, param, lam, nbar)
        nwell = len(well.g)
        sizes.append(nwell)
        if nwell < max(2, min_well_states):
            warnings.append(f"lambda={lam:g}: only {nwell} well states; skipped")
            continue
        dist = stationary(rates)
        r = -lam * math.log(dist.rho[-1] / dist.rho[0])
        rs.append(r)
        used.append(lam)
    if len(rs) < 2:
        raise NumericError(
            "too few lambda values with enough well states; " + "; ".join(warnings))
    coeff = np.polyfit(used, rs, 1)
    fit = np.polyval(coeff, used)
    resid = float(np.max(np.abs(fit - np.array(rs))))
    diffs = np.diff(rs)        # lambda descends, so r should drift one way
    if len(rs) >= 3 and np.any(diffs > 0) and np.any(diffs < 0) \
            and resid > 0.05 * max(abs(coeff[1]), max(map(abs, rs))):
        warnings.append(
            "r(lambda) non-monotone beyond fit tolerance; the boundary state "
            "may cross a sharp feature of the distribution")
    return {
        "R_A": float(coeff[1]),
        "slope": float(coeff[0]),
        "lambdas": used,
        "r_values": rs,
        "well_sizes": sizes,
        "fit_max_residual": resid,
        "warnings": warnings,
    }


def boltzmann_residual(g_values, rho) -> float:
    """Max residual of the best affine fit to ln rho vs g (non-Boltzmann test)."""
    mask = rho > 0
    if np.count_nonzero(mask) < 3:
        raise NumericError("need at least 3 occupied states for the affine fit")
    x = np.asarray(g_values)[mask]
    y = np.log(rho[mask])
    coeff = np.polyfit(x, y, 1)
    return float(np.max(np.abs(np.polyval(coeff, x) - y)))


def escape_report(kind: str, param: float, lam_values, nbar: float = 0.0) -> EscapeReport:
    """Full activation-vs-tunneling comparison for one metastable well.

    R_A comes from the balance-equation chain; the dynamical-tunneling
    exponent is evaluated at the well-extremum quasienergy.  The verdict is
    "activation" when R_A < s_tun (diffusion over quasienergy beats
    tunneling), "tunneling" otherwise.
    """
    if kind == "resonant":
        beta, mu = float(param), 0.0
        geometry = find_extrema("resonant", beta=beta)
        if not geometry.bistable:
            raise NumericError(f"beta={beta:g} outside the bistable range (0, 4/27)")
        g_ext = geometry.dome_top.g
        near = beta > 0.85 * (4.0 / 27.0) or beta < 1e-3
        s_tun = tunneling_exponent(geometry, g_ext)
    else:
        beta, mu = 0.0, float(param)
        geometry = find_extrema("parametric", mu=mu)
        if not geometry.bistable:
            raise NumericError(f"mu={mu:g} outside the bistable range (-1, 1)")
        g_ext = -0.25 * (1.0 + mu) ** 2 + 1e-12
        near = abs(mu) > 0.85
        s_tun = tunneling_exponent(geometry, g_ext)

    act = activation_exponent(kind, param, lam_values, nbar=nbar)

    # escape rate at the smallest usable lambda: MFPT from the well-extremum
    # state to the states beyond the saddle
    lam_small = min(act["lambdas"])
    geometry2, spec, labels, well, _ = _well_chain(kind, param, lam_small, nbar)
    full = rate_matrix(spec, _lowering(spec.dim), 1.0, nbar)
    if kind == "resonant":
        start = int(well.indices[0])     # dome-top state
        absorbing = [i for i, s in enumerate(labels) if s in ("rim", "outside")]
    else:
        start = int(np.argmin(spec.eigenvalues))
        absorbing = [i for i, s in enumerate(labels) if s == "outside"]
    if not absorbing:
        raise NumericError("no states beyond the saddle in the solved window")
    mfpt = mean_first_passage(full, start, absorbing)

    verdict = "activation" if act["R_A"] < s_tun else "tunneling"
    return EscapeReport(
        kind=kind, beta=beta, mu=mu, nbar=nbar,
        lambdas=act["lambdas"], r_values=act["r_values"],
        well_sizes=act["well_sizes"],
        activation_exponent=act["R_A"], activation_slope=act["slope"],
        fit_max_residual=act["fit_max_residual"],
        tunneling_exponent=s_tun, mfpt=mfpt, mfpt_lambda=lam_small,
        verdict=verdict, near_boundary=near, warnings=act["warnings"])
