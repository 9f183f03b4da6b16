"""Tunneling actions over pre-gaps and the asymptotic Lyapunov exponent.

Each pre-gap g contributes the action S(g) = 2 * integral over g of
Im kappa(zeta + i0) d zeta, a positive number measuring the width of the
classically forbidden region in the slow variable.  The tunneling
coefficient t(g) = exp(-S(g) / 2 eps) and the product T(E) over all
pre-gaps control the leading asymptotics of the Lyapunov exponent,
Theta_asym = (eps / 2 pi) log(1 / T) = (1 / 4 pi) * sum of actions.

Everything multiplicative is carried in log-domain; eps down at 1e-3
underflows T long before the formulas stop making sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import (
    BranchSelectionError,
    ConsistencyError,
    InvalidInputError,
)
from .geometry import AnalyticPotential, GapLabel, IsoEnergyGeometry
from .hill import BandStructure, DiscriminantModel, PeriodicPotential

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class ActionSet:
    """All tunneling actions of one iso-energy geometry."""

    energy: float
    entries: tuple[tuple[GapLabel, float, float], ...]  # (label, S, quad error)
    total_action: float

    def __post_init__(self):
        s = sum(v for _, v, _ in self.entries)
        if abs(s - self.total_action) > 1e-12 * max(1.0, abs(s)):
            raise ConsistencyError("total action does not match its entries")
        if any(v <= 0 for _, v, _ in self.entries):
            raise ConsistencyError("tunneling actions must be positive")

    def action(self, label: GapLabel) -> float:
        for lab, v, _ in self.entries:
            if lab == label:
                return v
        raise KeyError(label)

    @property
    def labels(self) -> tuple[GapLabel, ...]:
        return tuple(lab for lab, _, _ in self.entries)

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "entries": [
                {"label": str(lab), "action": v, "quad_error": e}
                for lab, v, e in self.entries
            ],
            "total_action": self.total_action,
        }


@dataclass(frozen=True)
class AsymptoticLyapunov:
    """Leading term of the Lyapunov exponent from the tunneling actions."""

    energy: float
    theta_asym: float
    per_gap: tuple[tuple[GapLabel, float], ...]

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "theta_asym": self.theta_asym,
            "per_gap": [{"label": str(lab), "contribution": v}
                        for lab, v in self.per_gap],
        }


@dataclass(frozen=True)
class Coefficient:
    """Tunneling coefficient with its always-valid log-domain value."""

    value: float
    log_value: float
    underflowed: bool


# ---------------------------------------------------------------------------
# the action integral


_WINDOW_MODEL_CACHE: dict = {}


def _window_model(V: PeriodicPotential, lo: float, hi: float) -> DiscriminantModel:
    key = (id(V), round(lo, 9), round(hi, 9))
    model = _WINDOW_MODEL_CACHE.get(key)
    if model is None:
        model = DiscriminantModel(V, lo, hi)
        _WINDOW_MODEL_CACHE[key] = model
    return model


def _im_kappa_factory(V, W, bands, geom, label: GapLabel):
    """Integrand Im kappa(zeta + i0) on the pre-gap, with branch validation.

    The local energy must stay in the spectral gap carrying the label's
    index (below the spectrum for index 0); leaving it means the wrong
    branch or a broken geometry, not a quadrature problem.
    """
    E = geom.energy
    pad = 0.2 * (W.w_plus - W.w_minus) + 1.0
    model = _window_model(V, geom.window[0] - pad, geom.window[1] + pad)
    gap_lo, gap_hi = bands.gap(label.index)
    slack = 1e-9 * max(1.0, abs(E))

    def im_kappa(zeta: float) -> float:
        loc_E = E - float(W.value(zeta))
        if not (gap_lo - slack <= loc_E <= gap_hi + slack):
            raise BranchSelectionError(
                f"local energy {loc_E} left spectral gap {label.index} "
                f"[{gap_lo}, {gap_hi}] at zeta={zeta}; wrong side or geometry"
            )
        half = abs(float(model(loc_E))) / 2.0
        return math.acosh(max(1.0, half))

    return im_kappa


def tunneling_action(V: PeriodicPotential, W: AnalyticPotential,
                     bands: BandStructure, geom: IsoEnergyGeometry,
                     label: GapLabel, side: str = "+i0",
                     tol: float = 1e-10) -> float:
    """S(g) = 2 * integral of Im kappa(zeta + i0) over the pre-gap.

    The integrand vanishes like a square root at both endpoints, so each
    half-interval is mapped by zeta = endpoint +- u**2 before quadrature.
    The '-i0' side is an independent route (opposite boundary value, sign
    flipped back, different quadrature scheme) used for cross-checking.
    """
    value, _ = action_with_error(V, W, bands, geom, label, side=side, tol=tol)
    return value


def action_with_error(V, W, bands, geom, label: GapLabel, side: str = "+i0",
                      tol: float = 1e-10) -> tuple[float, float]:
    if label not in geom.gap_labels:
        raise InvalidInputError(f"{label} is not a pre-gap of this geometry")
    a, b = geom.pre_gap(label)
    if not b > a:
        raise InvalidInputError(f"pre-gap {label} has no interior")
    im_kappa = _im_kappa_factory(V, W, bands, geom, label)
    mid = 0.5 * (a + b)
    if side == "+i0":
        total, err = 0.0, 0.0
        # left half: zeta = a + u^2; right half: zeta = b - u^2
        for edge, sgn in ((a, 1.0), (b, -1.0)):
            ulim = math.sqrt(abs(mid - edge))
            val, e = quad(lambda u: 2.0 * u * im_kappa(edge + sgn * u * u),
                          0.0, ulim, epsabs=1e-12, epsrel=1e-11, limit=200)
            total += val
            err += e
        return 2.0 * total, 2.0 * err
    if side == "-i0":
        # Im kappa(zeta - i0) = -Im kappa(zeta + i0); integrate the mirrored
        # boundary value with nested Gauss-Legendre instead of adaptive quad
        def mirrored(u, edge, sgn):
            return 2.0 * u * (-im_kappa(edge + sgn * u * u))

        total, err = 0.0, 0.0
        for edge, sgn in ((a, 1.0), (b, -1.0)):
            ulim = math.sqrt(abs(mid - edge))
            val, e = _gauss_doubling(lambda u: mirrored(u, edge, sgn), 0.0, ulim)
            total += val
            err += e
        return -2.0 * total, 2.0 * err
    raise InvalidInputError(f"side must be '+i0' or '-i0', got {side!r}")


def _gauss_doubling(f, a: float, b: float, rtol: float = 1e-12,
                    max_level: int = 10) -> tuple[float, float]:
    """Composite Gauss-Legendre with panel doubling until stabilized."""
    nodes, weights = np.polynomial.legendre.leggauss(16)
    results: list[float] = []
    for level in range(max_level):
        panels = 2 ** level
        total = 0.0
        edges = np.linspace(a, b, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            center = 0.5 * (hi + lo)
            total += half * sum(w * f(center + half * x)
                                for x, w in zip(nodes, weights))
        results.append(total)
        if len(results) >= 2:
            diff = abs(results[-1] - results[-2])
            if diff <= rtol * max(1.0, abs(total)):
                return results[-1], diff
    return results[-1], abs(results[-1] - results[-2])


def compute_actions(V: PeriodicPotential, W: AnalyticPotential,
                    bands: BandStructure, geom: IsoEnergyGeometry,
                    side: str = "+i0", tol: float = 1e-10) -> ActionSet:
    """ActionSet over every pre-gap of the geometry."""
    entries = []
    for label in geom.gap_labels:
        s, e = action_with_error(V, W, bands, geom, label, side=side, tol=tol)
        entries.append((label, s, e))
    total = sum(v for _, v, _ in entries)
    return ActionSet(energy=geom.energy, entries=tuple(entries),
                     total_action=total)


# ---------------------------------------------------------------------------
# coefficients and the asymptotic exponent


def tunneling_coefficient(S: float, epsilon: float) -> Coefficient:
    """t(g) = exp(-S / (2 eps)), kept alongside its exact log."""
    if S < 0:
        raise InvalidInputError("action must be nonnegative")
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    log_t = -S / (2.0 * epsilon)
    value = math.exp(log_t) if log_t > -745.0 else 0.0
    return Coefficient(value=value, log_value=log_t,
                       underflowed=value == 0.0 and log_t < 0.0)


def total_T(actions: ActionSet, epsilon: float) -> tuple[float, float]:
    """(T, log T) with T the product of all tunneling coefficients."""
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    log_T = -actions.total_action / (2.0 * epsilon)
    T = math.exp(log_T) if log_T > -745.0 else 0.0
    return T, log_T


def lyapunov_asymptotic(actions: ActionSet, epsilon: float) -> AsymptoticLyapunov:
    """Leading Lyapunov asymptotics from the actions.

    Computed two ways that must agree identically: through the per-gap
    log-coefficients scaled by eps / 2 pi, and as total action / 4 pi.
    The eps argument only feeds the first route; the result carries no
    eps dependence.
    """
    if not actions.entries:
        raise InvalidInputError("action set is empty")
    per_gap = tuple((lab, v / FOUR_PI) for lab, v, _ in actions.entries)
    via_logs = (epsilon / (2.0 * math.pi)) * sum(
        -tunneling_coefficient(v, epsilon).log_value
        for _, v, _ in actions.entries
    )
    via_total = actions.total_action / FOUR_PI
    if abs(via_logs - via_total) > 1e-13 * max(1.0, abs(via_total)):
        raise ConsistencyError("log-domain routes disagree")
    return AsymptoticLyapunov(energy=actions.energy, theta_asym=via_total,
                              per_gap=per_gap)


def coefficient_magnitude_window(T: float, C: float) -> tuple[float, float]:
    """Admissible magnitude window [1/(C T), C/T] for the dominant model
    coefficients, given the total tunneling coefficient T."""
    if not T > 0:
        raise InvalidInputError("T must be positive")
    if not C > 1:
        raise InvalidInputError("C must exceed 1")
    return 1.0 / (C * T), C / T
