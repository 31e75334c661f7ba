"""Mapping of physical oscillator/drive parameters to the dimensionless model.

A weakly nonlinear oscillator (unit mass)

    H = p^2/2 + omega0^2 q^2/2 + gamma q^4/4 + H_drive(t)

driven either resonantly, H_drive = -q A cos(omega_F t) with
delta_omega = omega_F - omega0 << omega0, or parametrically,
H_drive = q^2 F cos(omega_F t)/2 with delta_omega = omega_F/2 - omega0,
reduces in the rotating frame to a one-parameter quasienergy surface
g(Q, P) with an effective Planck constant lambda, [P, Q] = -i*lambda:

    resonant:    g = (Q^2 + P^2 - 1)^2/4 - sqrt(beta) Q
    parametric:  g = (Q^2 + P^2)^2/4 + (1-mu) P^2/2 - (1+mu) Q^2/2

This module owns all unit conversions; everything downstream works with
(lambda, beta) or (lambda, mu) only.  hbar and the oscillator constants never
appear outside it.  The reduction is leading order in |delta_omega|/omega0,
so lambda values up to about 1 are the physically sensible regime; the
toolkit does not enforce an upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

#: beta range in which the resonantly driven oscillator has two stable
#: forced-vibration states (tilted Mexican hat with dome, rim and saddle).
BETA_BISTABLE_MAX = 4.0 / 27.0


@dataclass(frozen=True)
class PhysicalParams:
    """Lab-frame oscillator and drive parameters (unit mass convention).

    omega0: oscillator angular frequency [rad/s]
    gamma: quartic nonlinearity, positive [s^-2 m^-2]
    hbar: action quantum in mass-normalized units [m^2/s]
    drive_kind: "resonant" or "parametric"
    A: resonant drive amplitude (force per unit mass), used iff resonant
    F: parametric modulation depth [s^-2], used iff parametric
    omegaF: drive angular frequency [rad/s]
    Gamma: energy relaxation rate [s^-1]
    nbar: thermal occupation of the bath at omega0, >= 0
    """

    omega0: float
    gamma: float
    hbar: float
    drive_kind: str
    omegaF: float
    A: float = 0.0
    F: float = 0.0
    Gamma: float = 0.0
    nbar: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive (soft-spring case not modeled)")
        if self.omega0 <= 0 or self.omegaF <= 0:
            raise ConfigError("frequencies must be positive")
        if self.hbar <= 0:
            raise ConfigError("hbar must be positive")
        if self.nbar < 0:
            raise ConfigError("nbar must be >= 0")
        if self.drive_kind not in ("resonant", "parametric"):
            raise ConfigError(f"unknown drive_kind {self.drive_kind!r}")

    @property
    def detuning(self) -> float:
        """delta_omega of the active drive branch."""
        if self.drive_kind == "resonant":
            return self.omegaF - self.omega0
        return 0.5 * self.omegaF - self.omega0

    @property
    def nonlinearity_energy(self) -> float:
        """V = 3 hbar gamma / (4 omega0^2), the anharmonic level-shift scale."""
        return 0.75 * self.hbar * self.gamma / self.omega0 ** 2


@dataclass(frozen=True)
class ScaledModel:
    """Dimensionless rotating-frame model.

    kind: "resonant" or "parametric"
    lam: effective Planck constant, > 0
    beta: reduced drive intensity (resonant branch only)
    mu: reduced detuning (parametric branch only)
    energy_scale: multiplies g-eigenvalues to give quasienergy in physical
        units; None for models built from reduced sweep coordinates.
    """

    kind: str
    lam: float
    beta: float = 0.0
    mu: float = 0.0
    energy_scale: float | None = None

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigError("lambda must be positive")
        if self.kind == "resonant" and self.beta < 0:
            raise ConfigError("beta must be >= 0")
        if self.kind not in ("resonant", "parametric"):
            raise ConfigError(f"unknown model kind {self.kind!r}")

    @property
    def bistable(self) -> bool:
        if self.kind == "resonant":
            return 0.0 < self.beta < BETA_BISTABLE_MAX
        return -1.0 < self.mu < 1.0


@dataclass(frozen=True)
class ResonanceSpec:
    """Reduced coordinates of an N-photon resonance sweep.

    N: photon number of the targeted resonance, >= 1
    detuning_over_V: d = delta_omega / V; the N-photon resonance sits at
        d = (N+1)/2
    drive_ratio: r = A / A_N where A_N is the drive scale at which the
        multiphoton Rabi splitting saturates
    V: nonlinearity energy scale; only needed to restore physical units
    """

    N: int
    detuning_over_V: float
    drive_ratio: float
    V: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.detuning_over_V <= 0:
            raise ConfigError("detuning_over_V must be positive")
        if self.drive_ratio < 0:
            raise ConfigError("drive_ratio must be >= 0")

    @property
    def resonant_detuning(self) -> float:
        """d at exact N-photon resonance, (N+1)/2."""
        return 0.5 * (self.N + 1)


def scale_resonant(p: PhysicalParams) -> ScaledModel:
    """Reduce resonant-drive physical parameters to (lambda, beta).

    alpha^2 = 8 omega_F delta_omega / (3 gamma) sets the coordinate scale;
    lambda = hbar / (omega_F alpha^2) and
    beta = 3 gamma A^2 / (32 omega_F^3 delta_omega^3).
    Requires delta_omega > 0: with gamma > 0 bistability needs blue detuning.
    """
    if p.drive_kind != "resonant":
        raise ConfigError("scale_resonant requires drive_kind='resonant'")
    d_omega = p.detuning
    if d_omega <= 0:
        raise ConfigError(
            f"resonant scaling requires omegaF > omega0 (got detuning {d_omega:g}); "
            "for gamma > 0 the bistable branch lies above resonance")
    alpha2 = 8.0 * p.omegaF * d_omega / (3.0 * p.gamma)
    lam = p.hbar / (p.omegaF * alpha2)
    beta = 3.0 * p.gamma * p.A ** 2 / (32.0 * p.omegaF ** 3 * d_omega ** 3)
    return ScaledModel(kind="resonant", lam=lam, beta=beta,
                       energy_scale=p.omegaF * d_omega * alpha2)


def scale_parametric(p: PhysicalParams) -> ScaledModel:
    """Reduce parametric-drive physical parameters to (lambda, mu).

    alpha^2 = 2F/(3 gamma), lambda = hbar/((omega_F/2) alpha^2),
    mu = 2 omega_F delta_omega / F.  Either sign of mu is allowed.
    """
    if p.drive_kind != "parametric":
        raise ConfigError("scale_parametric requires drive_kind='parametric'")
    if p.F <= 0:
        raise ConfigError("parametric scaling requires modulation depth F > 0")
    alpha2 = 2.0 * p.F / (3.0 * p.gamma)
    lam = p.hbar / (0.5 * p.omegaF * alpha2)
    mu = 2.0 * p.omegaF * p.detuning / p.F
    return ScaledModel(kind="parametric", lam=lam, mu=mu,
                       energy_scale=0.25 * p.F * alpha2)


def invert_resonant_amplitude(model: ScaledModel, p: PhysicalParams) -> float:
    """Recover the drive amplitude A that produced model.beta under p."""
    d_omega = p.detuning
    return math.sqrt(32.0 * p.omegaF ** 3 * d_omega ** 3 * model.beta / (3.0 * p.gamma))


def resonance_lambda(N: int) -> float:
    """Effective Planck constant at which levels 0 and N are degenerate.

    On the zero-drive diagonal g_n - g_0 = -lambda n + lambda^2 n(n+1), so
    g_N = g_0 exactly at lambda = 1/(N+1).
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    return 1.0 / (N + 1)


def drive_scale_amplitude(p: PhysicalParams, N: int) -> float:
    """A_N, the drive amplitude scale of the N-photon Rabi splitting.

    A_N = sqrt(2 hbar omega0) |V| N^{3/2} e^{-3/2} / 2 with V the
    nonlinearity energy scale of p.
    """
    V = p.nonlinearity_energy
    return 0.5 * math.sqrt(2.0 * p.hbar * p.omega0) * abs(V) * N ** 1.5 * math.exp(-1.5)


def resonant_sweep_map(spec: ResonanceSpec) -> ScaledModel:
    """Build the scaled model for reduced sweep coordinates (N, d, r).

    Eliminating the physical constants between the definitions of lambda,
    beta and A_N (taking omega_F = omega0 at leading order) gives

        lambda = 1/(2 d),      beta = r^2 N^3 / (16 e^3 d^3).

    The quasienergy in units of V is then g / (2 lambda^2) = 2 d^2 g.
    """
    d = spec.detuning_over_V
    lam = 0.5 / d
    beta = spec.drive_ratio ** 2 * spec.N ** 3 / (16.0 * math.exp(3.0) * d ** 3)
    return ScaledModel(kind="resonant", lam=lam, beta=beta, energy_scale=None)


def quasienergy_in_v_units(g: float, lam: float) -> float:
    """Convert a g-eigenvalue to quasienergy measured in units of V.

    epsilon/V = g / (2 lambda^2); on the zero-drive diagonal this reproduces
    epsilon_n/V = -d n + n(n+1)/2 with d = 1/(2 lambda).
    """
    return g / (2.0 * lam * lam)
