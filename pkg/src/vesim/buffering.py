# buffering.py
"""
Mass-action buffer chemistry for a single monoprotic ligand.

The reversible reaction HB <-> H + B at dissociation constant k_a gives,
for a compartment holding a total (free + complexed) proton concentration
T with total ligand B0, the free concentration as the positive root of

    C^2 + C*(B0 + k_a - T) - k_a*T = 0.

The finite-difference solver re-equilibrates with `equilibrate` after every
flux update; the analytical solvers fold the buffer into a per-phase flux
attenuation factor computed by `attenuation_factor`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BufferedCompartment:
    """One well-stirred volume holding free and buffer-complexed protons.

    Attributes:
        total_h: free + complexed H+ amount (mol)
        volume: compartment volume (m^3)
        buffer_total: total ligand concentration B0 (mol/m^3)
        k_a: dissociation constant (mol/m^3)
    """

    total_h: float
    volume: float
    buffer_total: float
    k_a: float

    def equilibrium(self) -> tuple[float, float]:
        total_conc = self.total_h / self.volume
        c_free = free_proton_conc(total_conc, self.buffer_total, self.k_a)
        return c_free, total_conc - c_free


def free_proton_conc(total_conc: float, buffer_total: float,
                     k_a: float) -> float:
    """Free H+ concentration of a compartment at buffer equilibrium.

    Args:
        total_conc: free + complexed H+ concentration T (mol/m^3)
        buffer_total: total ligand B0 (mol/m^3)
        k_a: dissociation constant (mol/m^3)

    Returns:
        The unique non-negative root of the mass-action quadratic.
    """
    if total_conc <= 0.0:
        return 0.0
    if buffer_total <= 0.0:
        return total_conc
    # q > 0 would cancel against the discriminant; use the conjugate form.
    q = buffer_total + k_a - total_conc
    disc = math.sqrt(q * q + 4.0 * k_a * total_conc)
    if q >= 0.0:
        return 2.0 * k_a * total_conc / (q + disc)
    return 0.5 * (disc - q)


def equilibrate(comp: BufferedCompartment) -> tuple[float, float]:
    """(free, complexed) concentrations in mol/m^3 of a compartment."""
    return comp.equilibrium()


def complexed_conc(c_free: float, buffer_total: float, k_a: float) -> float:
    """Complex concentration in equilibrium with a given free concentration."""
    if buffer_total <= 0.0 or c_free <= 0.0:
        return 0.0
    return buffer_total * c_free / (c_free + k_a)


def total_conc_from_free(c_free: float, buffer_total: float,
                         k_a: float) -> float:
    """Total (free + complexed) concentration for a given free concentration."""
    return c_free + complexed_conc(c_free, buffer_total, k_a)


def attenuation_factor(c_h: float, buffer_total: float, k_a: float) -> float:
    """Per-phase H+ flux attenuation caused by the buffer, clamped to >= 1.

    beta = k_a * B0 / (c_h + k_a)^2, evaluated at the H+ concentration at
    the start of the current cycle phase and held constant across it.
    Values below 1 would correspond to an effectively unbuffered medium,
    so they are clamped to 1.
    """
    if buffer_total <= 0.0:
        return 1.0
    beta = k_a * buffer_total / (c_h + k_a) ** 2
    return max(beta, 1.0)


def buffering_slowdown(c_h: float, buffer_total: float, k_a: float) -> float:
    """Exact local slowdown dT/dC = 1 + k_a*B0/(c_h+k_a)^2 of free-H+ motion.

    Differs from `attenuation_factor` by the +1 term and the absence of
    clamping; used for stability estimates of explicit stepping.
    """
    if buffer_total <= 0.0:
        return 1.0
    return 1.0 + k_a * buffer_total / (c_h + k_a) ** 2
