"""Named initial data and stationary states used by the CLI and the test battery.

Each preset fixes everything a run needs (grid, fields, solver settings), so
one name reproduces one run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .ericksen import EvolutionState, SolverConfig, counterexample_state
from .grid import Grid3, ScalarField, VectorField
from .spectral import leray_project

PRESETS = ("zero", "taylor-green", "director-winding", "appendix-a", "coupled-small")

WINDING_AMPLITUDE = 0.5
WINDING_WIDTH = 0.6
COUPLED_SEED = 7
COUPLED_U_AMPLITUDE = 0.1
COUPLED_V_AMPLITUDE = 0.3


@dataclass(frozen=True)
class Preset:
    """A named configuration: a grid, a solver config and a state factory."""

    name: str
    grid: Grid3
    solver: SolverConfig
    stationary: bool
    description: str

    def state(self):
        return build_state(self.name, self.grid)


def _unit(v):
    return v / np.sqrt(np.einsum("i...,i...->...", v, v))


def taylor_green(grid: Grid3, amplitude=1.0) -> VectorField:
    """``(sin x cos y cos z, -cos x sin y cos z, 0)``, divergence free and 2π periodic."""
    if not math.isclose(grid.box_half, math.pi):
        raise ConfigurationError("the Taylor-Green preset needs box half-width pi")
    x, y, z = grid.coords
    c = (
        amplitude * np.sin(x) * np.cos(y) * np.cos(z),
        -amplitude * np.cos(x) * np.sin(y) * np.cos(z),
        0.0,
    )
    return VectorField.from_components(grid, c)


def winding_angle(grid: Grid3, amplitude=WINDING_AMPLITUDE, width=WINDING_WIDTH) -> np.ndarray:
    """Radial Gaussian angle profile ``a exp(-|x|²/w²)``."""
    return amplitude * np.exp(-((grid.radius / width) ** 2))


def director_from_angle(grid: Grid3, alpha) -> VectorField:
    """``(0, -sin α, cos α)``; the harmonic map flow reduces to the heat equation for α."""
    alpha = np.broadcast_to(alpha, grid.shape)
    return VectorField.from_components(grid, (0.0, -np.sin(alpha), np.cos(alpha)))


def low_mode_field(grid: Grid3, rng, ncomp, kmax, amplitude):
    """``Re sum_m c_m exp(i k_m·x)`` over integer modes ``|m|_inf <= kmax``.

    The coefficients are drawn in a fixed order and scaled by their total
    size, so the field is the same function of ``x`` on every grid.
    """
    m = np.arange(-kmax, kmax + 1)
    size = (ncomp,) + (m.size,) * 3
    c = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    c *= amplitude / np.sqrt(np.sum(np.abs(c) ** 2) / ncomp)
    n = grid.n
    if 2 * kmax >= n:
        raise ConfigurationError("grid too coarse for the requested modes")
    full = np.zeros((ncomp, n, n, n), dtype=complex)
    idx = np.ix_(m % n, m % n, m % n)
    # Samples start at x = -L, which multiplies mode m by (-1)^(m1+m2+m3).
    sign = (-1.0) ** (m[:, None, None] + m[None, :, None] + m[None, None, :])
    for a in range(ncomp):
        full[a][idx] = c[a] * sign
    return np.fft.ifftn(full, axes=(-3, -2, -1)).real * n**3


def coupled_small(grid: Grid3, seed=COUPLED_SEED):
    """Small smooth divergence-free velocity and a director tilted from ``e3``."""
    rng = np.random.default_rng(seed)
    scale = math.pi / grid.box_half
    if not math.isclose(scale, 1.0):
        raise ConfigurationError("the coupled-small preset needs box half-width pi")
    u = leray_project(VectorField(grid, low_mode_field(grid, rng, 3, 2, COUPLED_U_AMPLITUDE)))
    w = low_mode_field(grid, rng, 3, 2, COUPLED_V_AMPLITUDE)
    w[2] += 1.0
    return u, VectorField(grid, _unit(w))


def build_state(name: str, grid: Grid3):
    """The state for ``name`` on ``grid`` (a stationary state for ``appendix-a``)."""
    zero_u = VectorField(grid, np.zeros((3,) + grid.shape))
    e3 = VectorField.from_components(grid, (0.0, 0.0, 1.0))
    if name == "zero":
        return EvolutionState(0.0, zero_u, e3)
    if name == "taylor-green":
        return EvolutionState(0.0, taylor_green(grid), e3)
    if name == "director-winding":
        return EvolutionState(0.0, zero_u, director_from_angle(grid, winding_angle(grid)))
    if name == "coupled-small":
        u, v = coupled_small(grid)
        return EvolutionState(0.0, u, v)
    if name == "appendix-a":
        return counterexample_state(grid).state
    raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def preset(name: str, n=None, box=None, dt=None, T=None) -> Preset:
    """Look up a preset, optionally overriding grid size, box and time settings."""
    defaults = {
        "zero": (32, math.pi, 1e-3, 0.1, "u = 0 with a constant director"),
        "taylor-green": (64, math.pi, 1e-3, 0.5, "Taylor-Green vortex with a constant director"),
        "director-winding": (64, math.pi, 1e-3, 0.1, "radial twist of the director, u = 0"),
        "coupled-small": (64, math.pi, 1e-3, 0.5, "small random velocity and director perturbation"),
        "appendix-a": (64, 4.5, 1e-3, 1e-3, "explicit stationary counterexample"),
    }
    if name not in defaults:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    n0, L0, dt0, T0, desc = defaults[name]
    grid = Grid3(n if n is not None else n0, box if box is not None else L0)
    solver = SolverConfig(dt=dt if dt is not None else dt0, T=T if T is not None else T0)
    return Preset(name, grid, solver, name == "appendix-a", desc)


def angle_of(v: VectorField) -> ScalarField:
    """Recover α from a director of the form ``(0, -sin α, cos α)``."""
    return ScalarField(v.grid, np.arctan2(-v.data[1], v.data[2]))
