"""Classical orbit analysis of the rotating-frame quasienergy surfaces.

The resonant surface g = (Q^2+P^2-1)^2/4 - sqrt(beta) Q is a tilted Mexican
hat: for 0 < beta < 4/27 it has a dome-top maximum, a rim minimum and a
saddle, all on the P = 0 axis.  The parametric surface has two symmetric
wells and a saddle at the origin.  Closed level curves g(Q,P) = const are
quadratic in P^2, so each orbit splits into explicit momentum branches

    resonant:    P^2 = 1 - Q^2 -+ 2 sqrt(g + sqrt(beta) Q)
    parametric:  P^2 = -(Q^2 + 1 - mu) + sqrt(4 Q^2 + (1-mu)^2 + 4 g)

The two resonant branches join where the square root vanishes, at
Qc = -g/sqrt(beta); level curves with |g| < sqrt(beta) wrap through that
junction and are integrated as two-branch composites.  Action, period and
orbit averages are Gauss-Kronrod quadratures with endpoint substitution;
Fourier components traverse the orbit with an ODE integrator.  Tunneling
exponents continue the momentum branch through the classically forbidden
Q-segment connecting two equal-g orbits; splitting scales as
exp(-s_tun/lambda).  The real-Q path is the standard one-dimensional
reduction; possible excursions of the true instanton off the P = 0 axis for
a strongly tilted hat are not modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import NumericError
from .quadrature import integrate_with_endpoint_substitution as _quad_sub

_SADDLE_GUARD = 1e-9


@dataclass(frozen=True)
class Extremum:
    q: float
    p: float
    g: float
    kind: str            # "max" | "min" | "saddle"
    degenerate: bool = False


@dataclass
class SurfaceGeometry:
    """Stationary points of one quasienergy surface."""

    kind: str            # "resonant" | "parametric"
    beta: float = 0.0
    mu: float = 0.0
    extrema: list = field(default_factory=list)
    bistable: bool = False

    def _one(self, kind):
        found = [e for e in self.extrema if e.kind == kind]
        return found[0] if found else None

    @property
    def saddle(self):
        return self._one("saddle")

    @property
    def dome_top(self):
        return self._one("max")

    @property
    def rim_bottom(self):
        if self.kind != "resonant":
            return None
        mins = [e for e in self.extrema if e.kind == "min"]
        return mins[0] if mins else None

    @property
    def wells(self):
        return [e for e in self.extrema if e.kind == "min"]

    @property
    def g_saddle(self):
        s = self.saddle
        return s.g if s is not None else None


@dataclass
class Orbit:
    """One closed level curve of g(Q, P), split into momentum branches.

    segments is a list of (branch, q_lo, q_hi); branch is "-"/"+" for the
    resonant surface and "p" for the parametric one.  A zero-length segment
    list marks an orbit degenerated to an extremum point.
    """

    kind: str
    sheet: str
    g: float
    beta: float = 0.0
    mu: float = 0.0
    segments: list = field(default_factory=list)
    point: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def p2(self, branch, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "resonant":
            root = np.sqrt(np.maximum(self.g + math.sqrt(self.beta) * q, 0.0))
            return 1.0 - q * q + (2.0 * root if branch == "+" else -2.0 * root)
        s = np.sqrt(4.0 * q * q + (1.0 - self.mu) ** 2 + 4.0 * self.g)
        return -(q * q + 1.0 - self.mu) + s

    def speed_factor(self, branch, q):
        """|dg/dP| / |P| along the branch (always positive on the orbit)."""
        q = np.asarray(q, dtype=float)
        if self.kind == "resonant":
            return 2.0 * np.sqrt(np.maximum(self.g + math.sqrt(self.beta) * q, 0.0))
        return np.sqrt(4.0 * q * q + (1.0 - self.mu) ** 2 + 4.0 * self.g)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def _g_resonant(q, p, beta):
    return 0.25 * (q * q + p * p - 1.0) ** 2 - math.sqrt(beta) * q


def _g_parametric(q, p, mu):
    r2 = q * q + p * p
    return 0.25 * r2 * r2 + 0.5 * (1.0 - mu) * p * p - 0.5 * (1.0 + mu) * q * q


def surface_value(geometry: SurfaceGeometry, q, p):
    if geometry.kind == "resonant":
        return _g_resonant(q, p, geometry.beta)
    return _g_parametric(q, p, geometry.mu)


def _hessian_kind(hqq, hpp):
    if hqq < 0 and hpp < 0:
        return "max"
    if hqq > 0 and hpp > 0:
        return "min"
    return "saddle"


def _real_roots(coeffs, imag_tol=1e-8):
    roots = np.roots(coeffs)
    out = []
    for z in roots:
        if abs(z.imag) < imag_tol * max(1.0, abs(z.real)):
            out.append(z.real)
    return sorted(out)


def _polish(poly, dpoly, x, steps=60):
    for _ in range(steps):
        df = dpoly(x)
        if df == 0:
            break
        step = poly(x) / df
        x -= step
        if abs(step) <= 1e-17 * max(1.0, abs(x)):
            break
    return x


def find_extrema(kind: str, beta: float | None = None,
                 mu: float | None = None) -> SurfaceGeometry:
    """Stationary points of the chosen surface, classified by Hessian signature.

    Outside the bistable range the reduced extremum set is returned with
    bistable=False.
    """
    if kind == "resonant":
        if beta is None or beta < 0:
            raise NumericError("resonant geometry needs beta >= 0")
        sb = math.sqrt(beta)
        # stationary points on P=0 solve Q^3 - Q = sqrt(beta)
        roots = _real_roots([1.0, 0.0, -1.0, -sb])
        poly = lambda q: q ** 3 - q - sb
        dpoly = lambda q: 3.0 * q * q - 1.0
        extrema = []
        for q in roots:
            q = _polish(poly, dpoly, q)
            hqq = 3.0 * q * q - 1.0
            hpp = q * q - 1.0
            degen = min(abs(hqq), abs(hpp)) < 1e-9
            extrema.append(Extremum(q=q, p=0.0, g=_g_resonant(q, 0.0, beta),
                                    kind=_hessian_kind(hqq, hpp), degenerate=degen))
        if beta == 0.0:
            # unperturbed hat: degenerate rim ring at R=1, g=0
            extrema = [Extremum(0.0, 0.0, 0.25, "max"),
                       Extremum(-1.0, 0.0, 0.0, "saddle", degenerate=True),
                       Extremum(1.0, 0.0, 0.0, "min", degenerate=True)]
        bistable = 0.0 < beta < 4.0 / 27.0 and len(extrema) == 3
        return SurfaceGeometry(kind="resonant", beta=beta,
                               extrema=extrema, bistable=bistable)

    if kind == "parametric":
        if mu is None:
            raise NumericError("parametric geometry needs mu")
        extrema = []
        cand = [0.0]
        if mu > -1.0:
            w = math.sqrt(1.0 + mu)
            cand += [w, -w]
        for q in cand:
            hqq = 3.0 * q * q - (1.0 + mu)
            hpp = q * q + 1.0 - mu
            degen = min(abs(hqq), abs(hpp)) < 1e-9
            extrema.append(Extremum(q=q, p=0.0, g=_g_parametric(q, 0.0, mu),
                                    kind=_hessian_kind(hqq, hpp), degenerate=degen))
        if mu > 1.0:
            pw = math.sqrt(mu - 1.0)
            for p in (pw, -pw):
                extrema.append(Extremum(q=0.0, p=p,
                                        g=_g_parametric(0.0, p, mu), kind="saddle"))
        return SurfaceGeometry(kind="parametric", mu=mu, extrema=extrema,
                               bistable=-1.0 < mu < 1.0)

    raise NumericError(f"unknown surface kind {kind!r}")


# ---------------------------------------------------------------------------
# orbit construction
# ---------------------------------------------------------------------------

def _resonant_turning_points(beta, g):
    """P=0 crossings of the level curve, as (minus_roots, plus_roots)."""
    sb = math.sqrt(beta)
    # (Q^2-1)^2/4 - sb Q - g = 0
    coeffs = [0.25, 0.0, -0.5, -sb, 0.25 - g]
    poly = lambda q: 0.25 * (q * q - 1.0) ** 2 - sb * q - g
    dpoly = lambda q: q * (q * q - 1.0) - sb
    minus, plus = [], []
    for q in _real_roots(coeffs):
        q = _polish(poly, dpoly, q)
        (minus if q * q <= 1.0 else plus).append(q)
    return sorted(minus), sorted(plus)


def _validate_segments(orb: Orbit):
    for branch, lo, hi in orb.segments:
        if hi <= lo:
            raise NumericError(f"empty orbit segment [{lo:g}, {hi:g}]")
        probe = lo + (hi - lo) * np.array([0.25, 0.5, 0.75])
        if np.any(orb.p2(branch, probe) < -1e-10):
            raise NumericError(
                f"branch selection failed on segment [{lo:g}, {hi:g}] "
                f"(sheet {orb.sheet}, g={orb.g:g})")


def orbit(geometry: SurfaceGeometry, sheet: str, g: float) -> Orbit:
    """Construct the closed orbit with level value g on the given sheet.

    Resonant sheets are "dome" (inner trajectories around the dome top) and
    "rim" (everything on the outer surface: the rim valley below the saddle
    and the outer loops above it).  Parametric sheets are "left"/"right".
    g at a sheet extremum returns the degenerate point orbit; g within 1e-9
    of the saddle value is rejected as ambiguous.
    """
    if geometry.kind == "resonant":
        return _orbit_resonant(geometry, sheet, g)
    if geometry.kind == "parametric":
        return _orbit_parametric(geometry, sheet, g)
    raise NumericError(f"unknown geometry kind {geometry.kind!r}")


def _point_orbit(kind, sheet, g, beta, mu, q0):
    return Orbit(kind=kind, sheet=sheet, g=g, beta=beta, mu=mu,
                 segments=[], point=(q0, 0.0))


def _orbit_resonant(geometry, sheet, g):
    beta = geometry.beta
    sb = math.sqrt(beta)
    g_saddle = geometry.g_saddle
    if g_saddle is not None and abs(g - g_saddle) < _SADDLE_GUARD:
        raise NumericError(
            f"g={g!r} within {_SADDLE_GUARD:g} of the saddle value; "
            "branch selection is ambiguous there")
    minus, plus = _resonant_turning_points(beta, g)

    if sheet == "dome":
        if not geometry.bistable and beta > 0:
            raise NumericError("dome sheet requires the bistable regime")
        top = geometry.dome_top
        if g > top.g:
            raise NumericError(f"g={g:g} above the dome top ({top.g:g})")
        if g_saddle is not None and g < g_saddle:
            raise NumericError(f"g={g:g} below the saddle; no dome orbit")
        if abs(g - top.g) < 1e-12:
            return _point_orbit("resonant", sheet, g, beta, 0.0, top.q)
        inner = [q for q in minus if q < top.q]
        outer = [q for q in minus if q > top.q]
        if not inner or not outer:
            raise NumericError(f"dome turning points not found at g={g:g}")
        orb = Orbit(kind="resonant", sheet=sheet, g=g, beta=beta,
                    segments=[("-", inner[-1], outer[0])])
        _validate_segments(orb)
        return orb

    if sheet == "rim":
        rim = geometry.rim_bottom
        if rim is not None and g < rim.g:
            raise NumericError(f"g={g:g} below the rim bottom ({rim.g:g})")
        if rim is not None and abs(g - rim.g) < 1e-12:
            return _point_orbit("resonant", sheet, g, beta, 0.0, rim.q)
        if beta > 0 and abs(g) < sb:
            # level curve wraps through the branch junction at Qc = -g/sb
            qc = -g / sb
            t_in = [q for q in minus if q > qc + 1e-13]
            if not t_in or not plus:
                raise NumericError(f"rim orbit roots not found at g={g:g}")
            orb = Orbit(kind="resonant", sheet=sheet, g=g, beta=beta,
                        segments=[("-", qc, t_in[0]), ("+", qc, plus[-1])])
        else:
            if len(plus) < 2:
                raise NumericError(f"rim orbit roots not found at g={g:g}")
            orb = Orbit(kind="resonant", sheet=sheet, g=g, beta=beta,
                        segments=[("+", plus[0], plus[-1])])
        _validate_segments(orb)
        return orb

    raise NumericError(f"unknown resonant sheet {sheet!r} (use 'dome' or 'rim')")


def _orbit_parametric(geometry, sheet, g):
    mu = geometry.mu
    if sheet not in ("left", "right"):
        raise NumericError(f"unknown parametric sheet {sheet!r}")
    if not geometry.bistable:
        raise NumericError("well sheets require the bistable range -1 < mu < 1")
    g_well = -0.25 * (1.0 + mu) ** 2
    if abs(g) < _SADDLE_GUARD:
        raise NumericError("g within guard of the saddle value 0")
    if g > 0:
        raise NumericError(f"g={g:g} above the saddle; no single-well orbit")
    if g < g_well:
        raise NumericError(f"g={g:g} below the well bottom ({g_well:g})")
    if abs(g - g_well) < 1e-12:
        qw = math.sqrt(1.0 + mu)
        return _point_orbit("parametric", sheet, g, 0.0, mu,
                            qw if sheet == "right" else -qw)
    disc = math.sqrt((1.0 + mu) ** 2 + 4.0 * g)
    q_in = math.sqrt((1.0 + mu) - disc)
    q_out = math.sqrt((1.0 + mu) + disc)
    seg = ("p", q_in, q_out) if sheet == "right" else ("p", -q_out, -q_in)
    orb = Orbit(kind="parametric", sheet=sheet, g=g, mu=mu, segments=[seg])
    _validate_segments(orb)
    return orb


# ---------------------------------------------------------------------------
# orbit integrals
# ---------------------------------------------------------------------------
#
# Integrands are expressed through (q, p2, speed) where speed = |dg/dP|/|P|:
#   action:   sqrt(p2)
#   period:   1 / (sqrt(p2) * speed)
#   <Q> num:  q / (sqrt(p2) * speed)
# For the resonant surface speed = 2 sqrt(g + sqrt(beta) q) vanishes at the
# branch junction Qc = -g/sqrt(beta).  Segments starting at or near Qc are
# integrated in branch-point coordinates q = Qc + v^2, where
# sqrt(g + sqrt(beta) q) = beta^{1/4} v exactly and every integrand is
# analytic again up to simple turning-point endpoints, which the endpoint
# substitution of the quadrature handles.

def _masked(expr, p2, q):
    # p2 below the evaluation roundoff floor counts as "at the turning point";
    # zooming into that band would integrate cancellation noise
    return np.where(p2 > 1e-14 * (1.0 + q * q), expr, 0.0)


def _weight(which, q, p2, speed):
    p2c = np.maximum(p2, 0.0)
    if which == "action":
        return np.sqrt(p2c)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = 1.0 / (np.sqrt(p2c) * speed)
    if which == "period":
        return _masked(base, p2, q)
    if which == "qavg":
        return _masked(q * base, p2, q)
    raise ValueError(which)


def _segment_integral(orb, which, branch, lo, hi, rtol):
    if orb.kind == "parametric":
        def fq(q):
            return _weight(which, q, orb.p2(branch, q), orb.speed_factor(branch, q))
        return _quad_sub(fq, lo, hi, rtol=rtol, atol=1e-15)

    beta = orb.beta
    sb = math.sqrt(beta)
    sign = 1.0 if branch == "+" else -1.0
    if sb > 0.0:
        qc = -orb.g / sb
        if (lo - qc) < 0.5 * (hi - lo):
            # branch-point coordinates
            beta4 = beta ** 0.25

            def fv(v):
                q = qc + v * v
                root = beta4 * v
                p2 = 1.0 - q * q + 2.0 * sign * root
                if which == "action":
                    return 2.0 * v * np.sqrt(np.maximum(p2, 0.0))
                with np.errstate(divide="ignore", invalid="ignore"):
                    base = 1.0 / (np.sqrt(np.maximum(p2, 0.0)) * beta4)
                if which == "qavg":
                    base = q * base
                return _masked(base, p2, q)

            return _quad_sub(fv, math.sqrt(max(lo - qc, 0.0)),
                             math.sqrt(hi - qc), rtol=rtol, atol=1e-15)

    def fq(q):
        root = np.sqrt(np.maximum(orb.g + sb * q, 0.0))
        p2 = 1.0 - q * q + 2.0 * sign * root
        return _weight(which, q, p2, 2.0 * root)

    return _quad_sub(fq, lo, hi, rtol=rtol, atol=1e-15)


def _orbit_integral(orb, which, rtol):
    total = 0.0
    composite = len(orb.segments) > 1
    for b, lo, hi in orb.segments:
        piece = _segment_integral(orb, which, b, lo, hi, rtol)
        if which == "action" and composite and b == "-":
            # the inner branch of a wrapped orbit bounds a hole in the
            # enclosed region: its area counts negatively (time does not)
            piece = -piece
        total += piece
    return 2.0 * total


def action(orb: Orbit, rtol: float = 1e-12) -> float:
    """Phase-plane area of the orbit, S = contour integral of P dQ > 0."""
    if orb.point is not None:
        return 0.0
    if "action" not in orb._cache:
        orb._cache["action"] = _orbit_integral(orb, "action", rtol)
    return orb._cache["action"]


def period(orb: Orbit, rtol: float = 1e-11) -> float:
    """Period of the classical motion; equals |dS/dg| on each sheet."""
    if orb.point is not None:
        return _harmonic_period(orb)
    if "period" not in orb._cache:
        orb._cache["period"] = _orbit_integral(orb, "period", rtol)
    return orb._cache["period"]


def orbit_average_q(orb: Orbit, rtol: float = 1e-11) -> float:
    """Time average of the coordinate over one period."""
    if orb.point is not None:
        return orb.point[0]
    return _orbit_integral(orb, "qavg", rtol) / period(orb, rtol)


def _harmonic_period(orb):
    q0 = orb.point[0]
    if orb.kind == "resonant":
        hqq = 3.0 * q0 * q0 - 1.0
        hpp = q0 * q0 - 1.0
    else:
        hqq = 3.0 * q0 * q0 - (1.0 + orb.mu)
        hpp = q0 * q0 + 1.0 - orb.mu
    w2 = hqq * hpp
    if w2 <= 0:
        raise NumericError("degenerate orbit at a non-elliptic point")
    return 2.0 * math.pi / math.sqrt(w2)


def hamilton_rhs(orb: Orbit):
    """Right-hand side of Hamilton's equations for this orbit's surface."""
    if orb.kind == "resonant":
        sb = math.sqrt(orb.beta)

        def rhs(t, y):
            q, p = y[0], y[1]
            r2m1 = q * q + p * p - 1.0
            return [p * r2m1, -(q * r2m1 - sb)]
    else:
        mu = orb.mu

        def rhs(t, y):
            q, p = y[0], y[1]
            r2 = q * q + p * p
            return [p * r2 + (1.0 - mu) * p, -(q * r2 - (1.0 + mu) * q)]
    return rhs


def trace_orbit(orb: Orbit, tau: float | None = None, samples: int = 2048,
                rtol: float = 1e-11, atol: float = 1e-13):
    """Integrate Hamilton's equations around the orbit once.

    Starts from the rightmost P = 0 point and returns (t, Q(t), P(t)) on a
    uniform grid over one period.  The closure defect |y(tau) - y(0)| is
    checked against the orbit scale.
    """
    if orb.point is not None:
        raise NumericError("cannot trace a degenerate point orbit")
    if tau is None:
        tau = period(orb)
    q_start = max(hi for _, _, hi in orb.segments)
    t_eval = np.linspace(0.0, tau, samples, endpoint=False)
    sol = solve_ivp(hamilton_rhs(orb), (0.0, tau), [q_start, 0.0],
                    t_eval=np.append(t_eval, tau), rtol=rtol, atol=atol,
                    method="DOP853", dense_output=False)
    if not sol.success:
        raise NumericError(f"orbit traversal failed: {sol.message}")
    qs, ps = sol.y[0], sol.y[1]
    scale = max(np.max(np.abs(qs)), np.max(np.abs(ps)))
    defect = math.hypot(qs[-1] - q_start, ps[-1])
    if defect > 1e-6 * max(scale, 1.0):
        raise NumericError(
            f"orbit did not close (defect {defect:.2e}); period inconsistent")
    return sol.t[:-1], qs[:-1], ps[:-1]


def fourier_components(orb: Orbit, k: int, samples: int = 2048):
    """k-th Fourier components (Q_k, P_k) of the motion along the orbit.

    Q_k = tau^-1 integral of Q(t) exp(-2 pi i k t / tau) dt, via ODE
    traversal with uniform resampling; Q_{-k} is the conjugate of Q_k.
    """
    if orb.point is not None:
        if k == 0:
            return complex(orb.point[0]), 0.0 + 0.0j
        return 0.0 + 0.0j, 0.0 + 0.0j
    key = ("trace", samples)
    if key not in orb._cache:
        orb._cache[key] = trace_orbit(orb, samples=samples)
    t, qs, ps = orb._cache[key]
    tau = period(orb)
    phase = np.exp(-2j * math.pi * k * t / tau)
    qk = np.mean(qs * phase)
    pk = np.mean(ps * phase)
    return complex(qk), complex(pk)


# ---------------------------------------------------------------------------
# Bohr-Sommerfeld quantization
# ---------------------------------------------------------------------------

def _action_on_sheet(geometry, sheet, g):
    return action(orbit(geometry, sheet, g))


def bohr_sommerfeld(lam: float, geometry: SurfaceGeometry, sheet: str,
                    n: int) -> float:
    """Level value g of the n-th quantized orbit on a sheet.

    Solves S(g) = 2 pi lam (n + 1/2); the Maslov index is 1/2 for every
    orbit here (smooth closed curves with simple turning points), which the
    zero-tilt limit validates exactly against the Fock diagonal.  States
    whose action does not fit on the sheet raise, distinguishing the
    above-saddle case.
    """
    if lam <= 0 or n < 0:
        raise NumericError("need lam > 0 and n >= 0")
    target = 2.0 * math.pi * lam * (n + 0.5)
    eps = 1e-11

    if geometry.kind == "resonant":
        g_saddle = geometry.g_saddle if geometry.g_saddle is not None else 0.0
        if sheet == "dome":
            top = geometry.dome_top.g
            lo = g_saddle + max(10 * _SADDLE_GUARD, 1e-8 * (top - g_saddle))
            s_max = _action_on_sheet(geometry, "dome", lo)
            if target > s_max:
                raise NumericError(
                    f"dome state n={n} does not fit on the sheet: its action "
                    f"{target:g} exceeds the separatrix action {s_max:g} "
                    "(orbit would lie below the saddle)")
            f = lambda g: _action_on_sheet(geometry, "dome", g) - target
            return brentq(f, lo, top - eps * max(abs(top), 1.0), xtol=1e-14)
        if sheet == "rim":
            rim = geometry.rim_bottom
            lo = rim.g + max(1e-12, 1e-10 * abs(rim.g))
            hi_sub = g_saddle - max(10 * _SADDLE_GUARD, 1e-8)
            f = lambda g: _action_on_sheet(geometry, "rim", g) - target
            if hi_sub > lo and geometry.beta > 0:
                s_valley = _action_on_sheet(geometry, "rim", hi_sub)
                if target <= s_valley:
                    return brentq(f, lo, hi_sub, xtol=1e-14)
            # above-saddle outer loop
            lo_ext = g_saddle + max(10 * _SADDLE_GUARD, 1e-8)
            s_lo = _action_on_sheet(geometry, "rim", lo_ext)
            if target < s_lo:
                raise NumericError(
                    f"rim state n={n}: action {target:g} falls in the "
                    f"separatrix gap ({target:g} < {s_lo:g}); the state "
                    "straddles the saddle")
            hi = max(2.0 * lo_ext, 1.0)
            while _action_on_sheet(geometry, "rim", hi) < target:
                hi *= 2.0
                if hi > 1e6:
                    raise NumericError("rim quantization bracket blew up")
            return brentq(f, lo_ext, hi, xtol=1e-14)
        raise NumericError(f"unknown resonant sheet {sheet!r}")

    # parametric wells
    g_well = -0.25 * (1.0 + geometry.mu) ** 2
    lo = g_well + max(1e-12, 1e-10 * abs(g_well))
    hi = -max(10 * _SADDLE_GUARD, 1e-8)
    s_max = _action_on_sheet(geometry, sheet, hi)
    if target > s_max:
        raise NumericError(
            f"well state n={n} does not fit below the saddle "
            f"(action {target:g} > {s_max:g})")
    f = lambda g: _action_on_sheet(geometry, sheet, g) - target
    return brentq(f, lo, hi, xtol=1e-14)


# ---------------------------------------------------------------------------
# tunneling exponents
# ---------------------------------------------------------------------------

def tunneling_exponent(geometry: SurfaceGeometry, g: float,
                       lam: float | None = None, rtol: float = 1e-12) -> float:
    """Imaginary-action exponent connecting the two equal-g orbits.

    s_tun = 2 integral of |Im P| dQ over the classically forbidden segment
    between the two orbits, continuing the momentum branch along real Q.
    The tunneling splitting scales as exp(-s_tun/lam); lam itself does not
    enter the exponent and is accepted only for interface symmetry.
    """
    if lam is not None and lam <= 0:
        raise NumericError("lam must be positive when given")

    if geometry.kind == "parametric":
        if not geometry.bistable:
            raise NumericError("tunneling needs the bistable range of mu")
        mu = geometry.mu
        g_well = -0.25 * (1.0 + mu) ** 2
        if g >= -_SADDLE_GUARD:
            raise NumericError(f"g={g:g} not below the saddle: no barrier")
        if g < g_well:
            raise NumericError(f"g={g:g} below the well bottom")
        disc = math.sqrt((1.0 + mu) ** 2 + 4.0 * g)
        q_in = math.sqrt((1.0 + mu) - disc)

        def im_p(q):
            # branch discriminant; below -(1-mu)^2/4 the two momentum branches
            # collide and P^2 continues into the complex plane, with
            # |Im P|^2 = (|P^2| + Re(-P^2))/2 on either conjugate branch
            a = q * q + 1.0 - mu
            d = 4.0 * q * q + (1.0 - mu) ** 2 + 4.0 * g
            pos = np.sqrt(np.maximum(a - np.sqrt(np.maximum(d, 0.0)), 0.0))
            neg = np.sqrt(0.5 * (np.hypot(a, np.sqrt(np.maximum(-d, 0.0))) + a))
            return np.where(d >= 0.0, pos, neg)

        return 2.0 * _quad_sub(im_p, -q_in, q_in, rtol=rtol, atol=1e-15)

    # resonant: dome orbit <-> outer orbit at the same g
    if not geometry.bistable:
        raise NumericError("resonant tunneling needs the bistable regime")
    g_saddle = geometry.g_saddle
    g_top = geometry.dome_top.g
    if g <= g_saddle + _SADDLE_GUARD:
        raise NumericError(
            f"g={g:g} at or below the saddle ({g_saddle:g}): no forbidden segment")
    if g > g_top + 1e-12:
        raise NumericError(f"g={g:g} above the dome top ({g_top:g})")
    beta = geometry.beta
    sb = math.sqrt(beta)
    qc = -g / sb
    minus, plus = _resonant_turning_points(beta, min(g, g_top))
    top_q = geometry.dome_top.q
    dome_left = max([q for q in minus if q <= top_q + 1e-9],
                    default=top_q)

    def forbidden_piece(sign, lo, hi):
        # integral of |Im P| over [lo, hi] on the +/- branch, in branch-point
        # coordinates when the junction is at or near the left endpoint
        if (lo - qc) < 0.5 * (hi - lo):
            beta4 = beta ** 0.25

            def fv(v):
                q = qc + v * v
                return 2.0 * v * np.sqrt(np.maximum(
                    q * q - 1.0 - 2.0 * sign * beta4 * v, 0.0))

            return _quad_sub(fv, math.sqrt(max(lo - qc, 0.0)),
                             math.sqrt(hi - qc), rtol=rtol, atol=1e-15)

        def fq(q):
            root = np.sqrt(np.maximum(g + sb * q, 0.0))
            return np.sqrt(np.maximum(q * q - 1.0 - 2.0 * sign * root, 0.0))

        return _quad_sub(fq, lo, hi, rtol=rtol, atol=1e-15)

    if g < sb:
        # outer loop wraps through the junction; barrier lives on the
        # minus branch between its leftmost zero and the dome edge
        qd = min(minus)
        return 2.0 * forbidden_piece(-1.0, qd, dome_left)
    t_left = min(plus)
    return 2.0 * (forbidden_piece(-1.0, qc, dome_left)
                  + forbidden_piece(+1.0, qc, t_left))
