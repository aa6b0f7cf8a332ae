"""Conformal geometry of ``theta = u^(2/n) theta_0`` on the lattice.

Curvature always comes from the conformal factor through the CR Yamabe
equation ``-(2 + 2/n) Lap u + R0 u = R u^(1 + 2/n)``, so the flow and the
diagnostics share one discrete sub-Laplacian.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import hcalc
from .elliptic import gershgorin_bound
from .hcalc import DEFAULT_CONFIG, OperatorConfig
from .lattice import LatticeSpec, ScalarField, require_positive


@dataclass(frozen=True, eq=False)
class ContactBackground:
    """Base contact data: lattice, Webster curvature ``R0`` and the frame scale."""

    lattice: LatticeSpec
    R0: ScalarField
    cfg: OperatorConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.R0.lattice != self.lattice:
            raise ValueError("base curvature lives on a different lattice")

    @classmethod
    def flat(cls, lattice: LatticeSpec, cfg: OperatorConfig = DEFAULT_CONFIG) -> "ContactBackground":
        """The model contact form, whose Webster curvature vanishes identically."""
        return cls(lattice, ScalarField(lattice, np.zeros(lattice.shape)), cfg)

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def density(self) -> float:
        return self.lattice.density

    @cached_property
    def is_flat(self) -> bool:
        return not np.any(self.R0.values)

    def with_kappa(self, kappa: float) -> "ContactBackground":
        return ContactBackground(self.lattice, self.R0, OperatorConfig(kappa))


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """Strictly positive conformal factor."""

    u: ScalarField

    def __post_init__(self):
        require_positive(self.u)


@dataclass(frozen=True)
class RbarReport:
    """Average curvature by both routes; ``value`` is the energy form."""

    value: float
    direct: float
    energy_form: float
    discrepancy: float


def _field(u) -> ScalarField:
    return u.u if isinstance(u, ConformalFactor) else u


def _check(bg: ContactBackground, u: ScalarField) -> None:
    if u.lattice != bg.lattice:
        raise ValueError("field lives on a different lattice than the background")


def scalar_curvature(bg: ContactBackground, u) -> ScalarField:
    """Webster curvature of ``u^(2/n) theta_0``."""
    u = _field(u)
    _check(bg, u)
    require_positive(u)
    n = bg.n
    lap = hcalc.sub_laplacian(u, bg.cfg).values
    num = -(2.0 + 2.0 / n) * lap + bg.R0.values * u.values
    return ScalarField(u.lattice, num * u.values ** (-1.0 - 2.0 / n))


def conformal_volume(bg: ContactBackground, u) -> float:
    """``int u^(2 + 2/n) dV_0``."""
    u = _field(u)
    _check(bg, u)
    require_positive(u)
    return hcalc.integrate(u ** (2.0 + 2.0 / bg.n))


def yamabe_energy(bg: ContactBackground, u) -> float:
    """``int (2 + 2/n)|grad u|^2 + R0 u^2 dV_0`` (any real field)."""
    u = _field(u)
    _check(bg, u)
    n = bg.n
    total = (2.0 + 2.0 / n) * hcalc.dirichlet_energy(u, bg.cfg)
    if not bg.is_flat:
        total += hcalc.integrate(bg.R0 * u * u)
    return total


def yamabe_quotient(bg: ContactBackground, u) -> float:
    """Energy over ``volume^(n/(n+1))``; invariant under ``u -> c u``."""
    n = bg.n
    return yamabe_energy(bg, u) / conformal_volume(bg, u) ** (n / (n + 1.0))


def rbar_report(bg: ContactBackground, u) -> RbarReport:
    """Average Webster curvature, directly and via integration by parts."""
    u = _field(u)
    vol = conformal_volume(bg, u)
    R = scalar_curvature(bg, u)
    direct = hcalc.integrate(R * u ** (2.0 + 2.0 / bg.n)) / vol
    energy = yamabe_energy(bg, u) / vol
    scale = max(abs(direct), abs(energy))
    disc = abs(direct - energy) / scale if scale > 0.0 else 0.0
    return RbarReport(energy, direct, energy, disc)


def rbar(bg: ContactBackground, u) -> float:
    """Volume average of the Webster curvature of ``u^(2/n) theta_0``."""
    return rbar_report(bg, u).value


def conformal_sub_laplacian(bg: ContactBackground, u, f: ScalarField) -> ScalarField:
    """Sub-Laplacian of ``u^(2/n) theta_0``: ``u^-(1 + 2/n) (u Lap f + 2 <du, df>)``."""
    u = _field(u)
    _check(bg, u)
    require_positive(u)
    lap = hcalc.sub_laplacian(f, bg.cfg).values
    cross = hcalc.horizontal_inner(u, f, bg.cfg).values
    vals = (u.values * lap + 2.0 * cross) * u.values ** (-1.0 - 2.0 / bg.n)
    return ScalarField(u.lattice, vals)


def _quotient_gradient(bg: ContactBackground, u: ScalarField) -> tuple[float, np.ndarray]:
    n = bg.n
    p = 2.0 + 2.0 / n
    lap = hcalc.sub_laplacian(u, bg.cfg).values
    energy = yamabe_energy(bg, u)
    vol = conformal_volume(bg, u)
    dE = 2.0 * (-p * lap + bg.R0.values * u.values)
    dV = p * u.values ** (p - 1.0)
    e = n / (n + 1.0)
    grad = (dE - e * (energy / vol) * dV) / vol**e
    return energy / vol**e, grad


def lambda_estimate(
    bg: ContactBackground,
    init: ScalarField,
    steps: int = 2000,
    lr: float | None = None,
    max_halvings: int = 60,
    tol: float = 0.0,
) -> float:
    """Best Yamabe quotient found by projected gradient descent.

    Each step moves against the L^2 gradient of the quotient, rejects moves
    that lose positivity or raise the quotient (halving the step), and
    rescales the accepted iterate back to the initial volume.  After an
    accepted step the step size grows by a modest factor.

    Parameters
    ----------
    steps : int
        Number of accepted steps to attempt.
    lr : float, optional
        Initial step size; defaults to a stable explicit step for the
        sub-Laplacian part of the gradient.
    tol : float
        Stop once the quotient drops to this value or below.

    Raises
    ------
    RuntimeError
        If every trial step loses positivity through ``max_halvings`` halvings.
    """
    _check(bg, init)
    require_positive(init, "initial conformal factor")
    n = bg.n
    p = 2.0 + 2.0 / n
    vol0 = conformal_volume(bg, init)
    if lr is None:
        lr = vol0 ** (n / (n + 1.0)) / (2.0 * p * gershgorin_bound(bg.lattice, bg.cfg))
    u = init
    q, grad = _quotient_gradient(bg, u)
    best = q
    for _ in range(steps):
        if best <= tol:
            break
        step = lr
        positive_seen = False
        for _ in range(max_halvings):
            trial = u.values - step * grad
            if trial.min() > 0.0:
                positive_seen = True
                cand = ScalarField(u.lattice, trial)
                cand = cand * (vol0 / conformal_volume(bg, cand)) ** (1.0 / p)
                q_new, g_new = _quotient_gradient(bg, cand)
                if q_new <= q:
                    break
            step *= 0.5
        else:
            if not positive_seen:
                raise RuntimeError("descent keeps losing positivity after repeated step halving")
            break  # stagnated at round-off
        u, q, grad = cand, q_new, g_new
        best = min(best, q)
        lr = 1.5 * step
    return best


__all__ = [
    "ContactBackground",
    "ConformalFactor",
    "RbarReport",
    "scalar_curvature",
    "conformal_volume",
    "yamabe_energy",
    "yamabe_quotient",
    "rbar",
    "rbar_report",
    "conformal_sub_laplacian",
    "lambda_estimate",
]
