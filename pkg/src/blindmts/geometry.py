"""Scene placement, link angles and line-of-sight phases.

Every panel is a vertical plane.  Its local frame is built from the horizontal
boresight azimuth ``alpha`` (angle of the outward normal, measured
counter-clockwise from the world +x axis):

* normal   n = (cos alpha, sin alpha, 0)
* columns  c = z x n = (-sin alpha, cos alpha, 0)   (v grows along c)
* rows     z = (0, 0, 1)                             (u grows upward)

Azimuth is measured in the horizontal plane from the normal towards ``c``,
elevation from the horizontal plane, so the world bearing of an endpoint seen
from a panel is ``alpha + psi``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateGeometryError, GeometryError

TWO_PI = 2.0 * math.pi
_MIN_DISTANCE = 1e-12


def wrap_pi(x):
    """Wrap angles to the interval (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(x, dtype=float), TWO_PI)


def wrap_2pi(x):
    """Wrap angles to the interval (0, 2*pi]; zero maps to 2*pi."""
    return TWO_PI - np.mod(-np.asarray(x, dtype=float), TWO_PI)


def _vec3(p) -> tuple[float, float, float]:
    a = tuple(float(c) for c in p)
    if len(a) != 3:
        raise ValueError(f"expected a 3-D position, got {p!r}")
    return a


@dataclass(frozen=True)
class MtsPanel:
    panel_id: int
    center: tuple[float, float, float]
    boresight_azimuth: float
    n_row: int
    n_col: int
    atom_spacing: float
    k_levels: int

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center))
        object.__setattr__(self, "boresight_azimuth", float(self.boresight_azimuth))
        if self.n_row < 1 or self.n_col < 1:
            raise GeometryError("panel needs at least one row and one column")
        if not self.atom_spacing > 0:
            raise GeometryError("atom_spacing must be positive")
        if self.k_levels < 2:
            raise GeometryError("k_levels must be >= 2")

    @property
    def n_atoms(self) -> int:
        return self.n_row * self.n_col

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_row, self.n_col)

    @property
    def phase_step(self) -> float:
        """Phase spacing omega = 2*pi/K."""
        return TWO_PI / self.k_levels

    @property
    def normal(self) -> np.ndarray:
        a = self.boresight_azimuth
        return np.array([math.cos(a), math.sin(a), 0.0])

    @property
    def column_axis(self) -> np.ndarray:
        a = self.boresight_azimuth
        return np.array([-math.sin(a), math.cos(a), 0.0])

    @property
    def supports_sensing(self) -> bool:
        return self.n_row >= 2 and self.n_col >= 2

    def to_dict(self) -> dict:
        return {
            "panel_id": self.panel_id,
            "center": list(self.center),
            "boresight_azimuth": self.boresight_azimuth,
            "n_row": self.n_row,
            "n_col": self.n_col,
            "atom_spacing": self.atom_spacing,
            "k_levels": self.k_levels,
        }


@dataclass(frozen=True)
class SceneGeometry:
    tx_position: tuple[float, float, float]
    rx_position: tuple[float, float, float]
    panels: tuple[MtsPanel, ...]
    wavelength: float
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "tx_position", _vec3(self.tx_position))
        object.__setattr__(self, "rx_position", _vec3(self.rx_position))
        object.__setattr__(self, "panels", tuple(self.panels))
        if not self.wavelength > 0:
            raise GeometryError("wavelength must be positive")
        if self.validate:
            self.check()

    def check(self) -> None:
        """Raise if points coincide or an endpoint is behind a panel."""
        points = [("tx", self.tx_position), ("rx", self.rx_position)]
        points += [(f"panel {p.panel_id}", p.center) for p in self.panels]
        for i in range(len(points)):
            for j in range(i + 1, len(points)):
                d = np.linalg.norm(np.subtract(points[i][1], points[j][1]))
                if d < _MIN_DISTANCE:
                    raise DegenerateGeometryError(
                        f"{points[i][0]} and {points[j][0]} coincide"
                    )
        for idx in range(len(self.panels)):
            link_angles(self, idx, "tx")
            link_angles(self, idx, "rx")

    @property
    def xi(self) -> float:
        return -TWO_PI / self.wavelength

    @property
    def n_atoms(self) -> int:
        return sum(p.n_atoms for p in self.panels)

    @property
    def direct_distance(self) -> float:
        return float(np.linalg.norm(np.subtract(self.tx_position, self.rx_position)))

    def replace_panels(self, panels: Sequence[MtsPanel]) -> "SceneGeometry":
        return SceneGeometry(self.tx_position, self.rx_position, tuple(panels), self.wavelength)

    def to_dict(self) -> dict:
        return {
            "tx_position": list(self.tx_position),
            "rx_position": list(self.rx_position),
            "wavelength": self.wavelength,
            "panels": [p.to_dict() for p in self.panels],
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class LinkAngles(NamedTuple):
    azimuth: float
    elevation: float
    distance: float


def link_angles(scene: SceneGeometry, panel: int, endpoint: str) -> LinkAngles:
    """Azimuth, elevation and distance of ``endpoint`` ('tx' or 'rx') seen from a panel."""
    if endpoint == "tx":
        target = scene.tx_position
    elif endpoint == "rx":
        target = scene.rx_position
    else:
        raise ValueError(f"endpoint must be 'tx' or 'rx', got {endpoint!r}")
    p = scene.panels[panel]
    r = np.subtract(target, p.center)
    d = float(np.linalg.norm(r))
    if d < _MIN_DISTANCE:
        raise DegenerateGeometryError(f"{endpoint} coincides with panel {p.panel_id}")
    forward = float(r @ p.normal)
    if forward <= 0.0:
        raise GeometryError(f"{endpoint} is not in front of panel {p.panel_id}")
    lateral = float(r @ p.column_axis)
    elevation = math.asin(max(-1.0, min(1.0, r[2] / d)))
    azimuth = math.atan2(lateral, forward)
    return LinkAngles(azimuth, elevation, d)


class LosPhases(NamedTuple):
    tx_to_atom: np.ndarray  # (n_row, n_col)
    atom_to_rx: np.ndarray  # (n_row, n_col)
    direct: float


def _atom_indices(p: MtsPanel) -> tuple[np.ndarray, np.ndarray]:
    u = np.arange(1, p.n_row + 1, dtype=float)[:, None]
    v = np.arange(1, p.n_col + 1, dtype=float)[None, :]
    return u, v


def los_phases(scene: SceneGeometry, panel: int) -> LosPhases:
    """Far-field LOS phase of every elementary link touching ``panel``.

    Indices enter proportionally (u = 1..n_row, v = 1..n_col, no centering).
    The two hop phases carry the sign that makes the cascade phase difference
    ``direct - tx_hop - rx_hop`` expand into the adjacent-atom relations used
    by the angle estimators.
    """
    p = scene.panels[panel]
    xi, dm = scene.xi, p.atom_spacing
    psi_t, phi_t, d_t = link_angles(scene, panel, "tx")
    psi_r, phi_r, d_r = link_angles(scene, panel, "rx")
    u, v = _atom_indices(p)
    tx_hop = -xi * dm * (v * math.sin(psi_t) * math.cos(phi_t) - u * math.sin(phi_t)) - xi * d_t
    rx_hop = -xi * dm * (u * math.sin(phi_r) - v * math.sin(psi_r) * math.cos(phi_r)) + xi * d_r
    direct = xi * scene.direct_distance
    return LosPhases(wrap_pi(tx_hop), wrap_pi(rx_hop), float(wrap_pi(direct)))


def true_phase_difference(scene: SceneGeometry, panel: int) -> np.ndarray:
    """Ground-truth per-atom phase difference in (0, 2*pi]."""
    ph = los_phases(scene, panel)
    return wrap_2pi(ph.direct - ph.tx_to_atom - ph.atom_to_rx)


def adjacent_phase_steps(scene: SceneGeometry, panel: int) -> tuple[float, float]:
    """Unwrapped row-step and column-step of the true phase difference."""
    p = scene.panels[panel]
    xi, dm = scene.xi, p.atom_spacing
    psi_t, phi_t, _ = link_angles(scene, panel, "tx")
    psi_r, phi_r, _ = link_angles(scene, panel, "rx")
    row = xi * dm * (math.sin(phi_r) - math.sin(phi_t))
    col = xi * dm * (math.sin(psi_t) * math.cos(phi_t) - math.sin(psi_r) * math.cos(phi_r))
    return row, col


def scene_aliases(scene: SceneGeometry, panel: int) -> bool:
    """True when an adjacent-atom phase step leaves (-pi, pi] and would alias."""
    row, col = adjacent_phase_steps(scene, panel)
    return not (-math.pi < row <= math.pi and -math.pi < col <= math.pi)
