"""Empirical checks of the functional inequalities on the nilmanifold.

Spectral constants (Poincare and gradient-versus-Laplacian) come from the
smallest positive eigenvalue of ``-Lap``; the interpolation inequalities
are probed by ratios over seeded families of test fields.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import hcalc
from .conformal import ContactBackground
from .elliptic import spectrum
from .hcalc import OperatorConfig
from .lattice import LatticeSpec, ScalarField, bandlimited_values, packet_values

RELATION_TOL = 1e-12


@dataclass(frozen=True)
class InequalitySpec:
    """Exponents of ``||grad^j f||_p <= K ||grad^m f||_r^a ||f||_q^(1-a)``.

    The exponents must satisfy
    ``1/p = j/(2n+2) + a (1/r - m/(2n+2)) + (1 - a)/q``.
    """

    j: int
    m: int
    p: float
    q: float
    r: float
    a: float
    n: int = 1

    def __post_init__(self):
        if not (0 <= self.j < self.m):
            raise ValueError(f"need 0 <= j < m, got j={self.j}, m={self.m}")
        for name in ("p", "q", "r"):
            if not getattr(self, name) >= 1.0:
                raise ValueError(f"{name} must be >= 1")
        if not (self.j / self.m <= self.a <= 1.0):
            raise ValueError(f"a={self.a} outside [j/m, 1]")
        gap = abs(1.0 / self.p - self.relation_value(self.j, self.m, self.q, self.r, self.a, self.n))
        if gap > RELATION_TOL:
            raise ValueError(f"exponents violate the interpolation relation (off by {gap:.2e})")

    @staticmethod
    def relation_value(j, m, q, r, a, n) -> float:
        Q = 2.0 * n + 2.0
        return j / Q + a * (1.0 / r - m / Q) + (1.0 - a) / q

    @classmethod
    def solve(cls, j: int, m: int, q: float, r: float, a: float, n: int = 1) -> "InequalitySpec":
        """Build the inequality with ``p`` determined by the relation.

        Raises
        ------
        ValueError
            If the relation gives ``1/p`` outside ``(0, 1]``.
        """
        inv = cls.relation_value(j, m, q, r, a, n)
        if not 0.0 < inv <= 1.0:
            raise ValueError(f"relation gives 1/p = {inv:.6g}; no admissible p")
        return cls(j, m, 1.0 / inv, q, r, a, n)


@dataclass(frozen=True)
class RatioReport:
    """``ratio = lhs / rhs``; batch runs also carry the sample count and seed."""

    lhs: float
    rhs: float
    ratio: float
    witness: str
    max_ratio: float | None = None
    sample_count: int = 1
    seed: int | None = None
    constant: float | None = None
    passed: bool | None = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# -- spectral constants -----------------------------------------------------
@lru_cache(maxsize=16)
def _lambda1(lattice: LatticeSpec, kappa: float) -> float:
    return spectrum(lattice, 1, OperatorConfig(kappa)).lambda1


def spectral_gap(bg: ContactBackground) -> float:
    """Smallest positive eigenvalue of ``-Lap`` (cached per lattice and frame scale)."""
    return _lambda1(bg.lattice, bg.cfg.kappa)


def poincare_constant(bg: ContactBackground) -> float:
    """Best ``C`` in ``int |f - mean f|^2 <= C int |grad f|^2``, namely ``1/lambda_1``."""
    return 1.0 / spectral_gap(bg)


def grad_vs_lap_constant(bg: ContactBackground) -> float:
    """Best ``C`` in ``||grad f||_2 <= C ||Lap f||_2``, namely ``1/sqrt(lambda_1)``."""
    return 1.0 / math.sqrt(spectral_gap(bg))


def poincare_ratio(bg: ContactBackground, f: ScalarField) -> float:
    """``||f - mean f||_2^2 / ||grad f||_2^2`` with the stencil energy."""
    g = f - hcalc.mean(f)
    den = hcalc.dirichlet_energy(g, bg.cfg)
    if den == 0.0:
        raise ValueError("constant field: the Poincare ratio is undefined")
    return hcalc.lp_norm(g, 2) ** 2 / den


def grad_vs_lap_ratio(bg: ContactBackground, f: ScalarField) -> float:
    """``||grad f||_2 / ||Lap f||_2`` for the mean-zero part of ``f``."""
    g = f - hcalc.mean(f)
    den = hcalc.lp_norm(hcalc.sub_laplacian(g, bg.cfg), 2)
    if den == 0.0:
        raise ValueError("constant field: the ratio is undefined")
    return math.sqrt(hcalc.dirichlet_energy(g, bg.cfg)) / den


# -- test fields ------------------------------------------------------------
def random_bandlimited(bg: ContactBackground, seed: int, cutoff: int = 2, mean_zero: bool = True) -> ScalarField:
    """Seeded t-independent field over the wave vectors with ``|k| <= cutoff``."""
    return ScalarField(bg.lattice, bandlimited_values(bg.lattice, seed, cutoff, mean_zero))


def random_test_field(bg: ContactBackground, seed: int) -> tuple[ScalarField, str]:
    """Mean-zero test field from a mixed family, with a short description.

    Even seeds give band-limited t-independent fields; odd seeds give
    Heisenberg wave packets with random center, phase, t-frequency and a
    width near the lowest-level width, which are the fields that reach the
    spectral gap (t-independent fields only see ``(2 pi)^2 kappa``).
    """
    rng = np.random.default_rng(seed)
    if seed % 2 == 0 or bg.n != 1:
        cutoff = int(rng.integers(1, 4))
        f = random_bandlimited(bg, int(rng.integers(2**31)), cutoff)
        return f, f"bandlimited(cutoff={cutoff})"
    m = int(rng.choice([-2, -1, 1, 2]))
    width = 0.5 * math.pi * abs(m) * float(np.exp(rng.normal(0.0, 0.15)))
    center = tuple(float(c) for c in rng.uniform(0.0, 1.0, 3) * (1.0, 1.0, 4.0))
    phase = float(rng.uniform(0.0, 2.0 * math.pi))
    vals = packet_values(bg.lattice, m, width, center, phase)
    vals = vals - vals.mean()
    return ScalarField(bg.lattice, vals), f"packet(m={m}, width={width:.3f})"


def _search(bg, ratio_fn, samples: int, seed: int) -> RatioReport:
    if samples < 1:
        raise ValueError("need at least one sample")
    best = None
    ss = np.random.SeedSequence(seed)
    for i, child in enumerate(ss.generate_state(samples)):
        f, desc = random_test_field(bg, int(child) * 2 + (i % 2))
        ratio = ratio_fn(bg, f)
        if best is None or ratio > best[0]:
            best = (ratio, f"{desc}#{i}")
    return RatioReport(best[0], 1.0, best[0], best[1], best[0], samples, seed)


def poincare_search(bg: ContactBackground, samples: int = 200, seed: int = 0) -> RatioReport:
    """Worst Poincare ratio over the mixed random family."""
    return _search(bg, poincare_ratio, samples, seed)


def grad_vs_lap_search(bg: ContactBackground, samples: int = 200, seed: int = 0) -> RatioReport:
    """Worst ``||grad f|| / ||Lap f||`` over the mixed random family."""
    return _search(bg, grad_vs_lap_ratio, samples, seed)


# -- interpolation inequalities ---------------------------------------------
def _require_mean_zero(f: ScalarField) -> None:
    scale = float(np.max(np.abs(f.values)))
    if scale == 0.0:
        raise ValueError("zero field: both sides vanish")
    if abs(hcalc.mean(f)) > 1e-10 * scale:
        raise ValueError("field must have zero mean")


def gn_ratio(bg: ContactBackground, f: ScalarField, spec: InequalitySpec, witness: str = "field") -> RatioReport:
    """``||grad^j f||_p / (||grad^m f||_r^a ||f||_q^(1-a))`` for mean-zero ``f``."""
    if spec.n != bg.n:
        raise ValueError("spec dimension does not match the lattice")
    _require_mean_zero(f)
    lhs = hcalc.derivative_lp_norm(f, spec.j, spec.p, bg.cfg)
    top = hcalc.derivative_lp_norm(f, spec.m, spec.r, bg.cfg)
    low = hcalc.lp_norm(f, spec.q)
    rhs = top**spec.a * low ** (1.0 - spec.a)
    if not rhs > 0.0:
        raise ValueError("right-hand side vanishes")
    return RatioReport(lhs, rhs, lhs / rhs, witness)


def gn_empirical_K(
    bg: ContactBackground,
    spec: InequalitySpec,
    sample_count: int = 50,
    seed: int = 0,
    cutoff: int = 2,
) -> RatioReport:
    """Largest :func:`gn_ratio` over seeded band-limited mean-zero fields.

    The sample seeds come from one stream, so a longer run extends a
    shorter one and the result is a running maximum; the same seed gives
    the same continuum fields on every lattice.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    seeds = np.random.SeedSequence(seed).generate_state(sample_count)
    best = None
    for i, s in enumerate(seeds):
        rep = gn_ratio(bg, random_bandlimited(bg, int(s), cutoff), spec, f"bandlimited#{i}")
        if best is None or rep.ratio > best.ratio:
            best = rep
    return RatioReport(best.lhs, best.rhs, best.ratio, best.witness, best.ratio, sample_count, seed)


def it2_spec(n: int = 1, r: float = 2.0) -> InequalitySpec:
    """``||f||_p <= K ||grad f||_r`` with ``1/p = 1/r - 1/(2n+2)`` (the ``a = 1`` case)."""
    return InequalitySpec.solve(0, 1, r, r, 1.0, n)


def it3_constant(n: int, p: float) -> float:
    return math.sqrt(2.0 * n) + abs(p - 2.0)


def it3_check(
    bg: ContactBackground,
    f: ScalarField,
    p: float,
    q: float | None = None,
    r: float | None = None,
    slack: float = 0.1,
    witness: str = "field",
) -> RatioReport:
    """``||grad f||_p^2 <= (sqrt(2n) + |p - 2|) ||f||_q ||grad^2 f||_r`` with ``2/p = 1/q + 1/r``.

    The reported ``rhs`` includes the constant, so ``ratio <= 1 + slack``
    is the pass criterion.  A constant field gives ``0 <= 0`` and passes.
    """
    if not p >= 2.0:
        raise ValueError("need p >= 2")
    q = p if q is None else q
    r = p if r is None else r
    if abs(2.0 / p - 1.0 / q - 1.0 / r) > RELATION_TOL:
        raise ValueError("need 2/p = 1/q + 1/r")
    K = it3_constant(bg.n, p)
    lhs = hcalc.grad_lp_norm(f, p, bg.cfg) ** 2
    rhs = K * hcalc.lp_norm(f, q) * hcalc.hessian_lr_norm(hcalc.horizontal_hessian(f, bg.cfg), r)
    if rhs == 0.0:
        if lhs == 0.0:
            return RatioReport(0.0, 0.0, 0.0, witness, constant=K, passed=True)
        raise ValueError("right-hand side vanishes while the left does not")
    ratio = lhs / rhs
    return RatioReport(lhs, rhs, ratio, witness, constant=K, passed=bool(ratio <= 1.0 + slack))


def it3_sweep(
    bg: ContactBackground,
    p: float,
    sample_count: int = 50,
    seed: int = 0,
    cutoff: int = 2,
    slack: float = 0.1,
) -> RatioReport:
    """Worst :func:`it3_check` ratio over seeded band-limited fields."""
    seeds = np.random.SeedSequence(seed).generate_state(sample_count)
    worst = None
    for i, s in enumerate(seeds):
        rep = it3_check(bg, random_bandlimited(bg, int(s), cutoff), p, slack=slack, witness=f"bandlimited#{i}")
        if worst is None or rep.ratio > worst.ratio:
            worst = rep
    return RatioReport(
        worst.lhs, worst.rhs, worst.ratio, worst.witness, worst.ratio, sample_count, seed,
        worst.constant, bool(worst.ratio <= 1.0 + slack),
    )


__all__ = [
    "InequalitySpec",
    "RatioReport",
    "spectral_gap",
    "poincare_constant",
    "grad_vs_lap_constant",
    "poincare_ratio",
    "grad_vs_lap_ratio",
    "random_bandlimited",
    "random_test_field",
    "poincare_search",
    "grad_vs_lap_search",
    "gn_ratio",
    "gn_empirical_K",
    "it2_spec",
    "it3_constant",
    "it3_check",
    "it3_sweep",
]
