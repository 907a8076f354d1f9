"""Angle-of-arrival recovery from phase differences and two-anchor triangulation."""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .bcm import GainTable, build_gain_table, recover_delta
from .errors import DegenerateTriangulationError, UnsupportedPanelError
from .geometry import MtsPanel, SceneGeometry, link_angles, scene_aliases, wrap_pi
from .sampling import RssDataset

TAN_EPS = 1e-9
DENOM_EPS = 1e-9
COS_EPS = 1e-9


class AliasingWarning(UserWarning):
    """Adjacent-atom phase steps exceed pi, so wrapped differences are ambiguous."""


class AngleEstimate(NamedTuple):
    angle: float
    n_pairs: int
    n_clamped: int
    n_wrapped: int


def _wrapped_diff(delta: np.ndarray, axis: int) -> tuple[np.ndarray, int]:
    raw = np.diff(np.asarray(delta, dtype=float), axis=axis)
    inside = (raw > -math.pi) & (raw <= math.pi)
    return wrap_pi(raw), int(np.count_nonzero(~inside))


def _clamped_arcsin(a: np.ndarray) -> tuple[np.ndarray, int]:
    clamped = np.clip(a, -1.0, 1.0)
    return np.arcsin(clamped), int(np.count_nonzero(clamped != a))


def estimate_elevation(delta, panel: MtsPanel, wavelength: float, phi_lr: float) -> AngleEstimate:
    """Elevation of the transmitter from vertically adjacent phase differences.

    Each pair gives arcsin(sin(phi_lr) - diff / (xi * d_M)); the pair angles
    are averaged.
    """
    if panel.n_row < 2:
        raise UnsupportedPanelError(f"panel {panel.panel_id} has fewer than two rows")
    xi = -2 * math.pi / wavelength
    diff, n_wrapped = _wrapped_diff(delta, axis=0)
    per_pair, n_clamped = _clamped_arcsin(math.sin(phi_lr) - diff / (xi * panel.atom_spacing))
    return AngleEstimate(float(per_pair.mean()), per_pair.size, n_clamped, n_wrapped)


def estimate_azimuth(
    delta, panel: MtsPanel, wavelength: float, psi_lr: float, phi_lr: float, phi_hat: float
) -> AngleEstimate:
    if panel.n_col < 2:
        raise UnsupportedPanelError(f"panel {panel.panel_id} has fewer than two columns")
    c = math.cos(phi_hat)
    if abs(c) < COS_EPS:
        raise DegenerateTriangulationError("elevation estimate is too close to +-pi/2")
    xi = -2 * math.pi / wavelength
    diff, n_wrapped = _wrapped_diff(delta, axis=1)
    a = diff / (xi * panel.atom_spacing * c) + math.sin(psi_lr) * math.cos(phi_lr) / c
    per_pair, n_clamped = _clamped_arcsin(a)
    return AngleEstimate(float(per_pair.mean()), per_pair.size, n_clamped, n_wrapped)


def _tan(angle: float) -> float:
    if abs(math.cos(angle)) < TAN_EPS:
        raise DegenerateTriangulationError(f"bearing {angle:.6g} rad is at a tangent singularity")
    return math.tan(angle)


def intersect_bearings(
    arg1: float, arg2: float, z1: Sequence[float], z2: Sequence[float]
) -> np.ndarray:
    """Intersection of the anchor lines written in the two-anchor closed form.

    ``arg1`` is the first anchor's azimuth minus its orientation and ``arg2``
    the second anchor's azimuth plus its orientation, with the first anchor's
    azimuth counted clockwise and the second's counter-clockwise.
    """
    t1, t2 = _tan(arg1), _tan(arg2)
    den = t1 + t2
    if abs(den) < DENOM_EPS:
        raise DegenerateTriangulationError("bearing lines are (nearly) parallel")
    zx1, zy1 = z1[0], z1[1]
    zx2, zy2 = z2[0], z2[1]
    px = (t1 * zx1 + t2 * zx2 + zy1 - zy2) / den
    py_1 = t1 * (zx1 - px) + zy1
    py_2 = -t2 * (zx2 - px) + zy2
    return np.array([px, 0.5 * (py_1 + py_2)])


def triangulate(psi_hat_1: float, psi_hat_2: float, panels: Sequence[MtsPanel]) -> np.ndarray:
    """2-D transmitter position from the azimuths seen by two panels.

    Azimuths follow :func:`~blindmts.geometry.link_angles` (counter-clockwise
    from boresight); the first is flipped to the clockwise sense the closed
    form expects.
    """
    p1, p2 = panels
    arg1 = -psi_hat_1 - p1.boresight_azimuth
    arg2 = psi_hat_2 + p2.boresight_azimuth
    return intersect_bearings(arg1, arg2, p1.center, p2.center)


@dataclass
class SensingEstimate:
    panel_ids: list[int]
    phi_hat: list[float]
    psi_hat: list[float]
    position: np.ndarray
    pair_positions: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def squared_error(self, scene: SceneGeometry) -> float:
        return squared_error(self.position, scene)

    def to_dict(self, scene: SceneGeometry | None = None) -> dict:
        out = {
            "panels": [
                {"panel_id": pid, "elevation_deg": math.degrees(ph), "azimuth_deg": math.degrees(ps)}
                for pid, ph, ps in zip(self.panel_ids, self.phi_hat, self.psi_hat)
            ],
            "position_m": [float(x) for x in self.position],
            "diagnostics": self.diagnostics,
        }
        if scene is not None:
            out["squared_error_m2"] = self.squared_error(scene)
        return out

    def save_json(self, path, scene: SceneGeometry | None = None) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(scene), indent=2, sort_keys=True) + "\n")
        return path


def squared_error(position, scene: SceneGeometry) -> float:
    px, py = scene.tx_position[0], scene.tx_position[1]
    return float((px - position[0]) ** 2 + (py - position[1]) ** 2)


def panel_angles(delta_panel: np.ndarray, scene: SceneGeometry, panel: int) -> tuple[AngleEstimate, AngleEstimate]:
    """Elevation then azimuth estimate of the transmitter for one panel."""
    p = scene.panels[panel]
    psi_r, phi_r, _ = link_angles(scene, panel, "rx")
    el = estimate_elevation(delta_panel, p, scene.wavelength, phi_r)
    az = estimate_azimuth(delta_panel, p, scene.wavelength, psi_r, phi_r, el.angle)
    return el, az


def localize_from_delta(delta: Sequence[np.ndarray], scene: SceneGeometry) -> SensingEstimate:
    usable = [i for i, p in enumerate(scene.panels) if p.supports_sensing]
    if len(usable) < 2:
        raise UnsupportedPanelError("localization needs two panels with at least 2x2 atoms")
    for i in usable:
        if scene_aliases(scene, i):
            warnings.warn(
                f"panel {scene.panels[i].panel_id}: adjacent phase steps exceed pi; "
                "angle estimates may alias",
                AliasingWarning,
                stacklevel=2,
            )
    # canonical order keeps the estimate independent of panel list order
    usable.sort(key=lambda i: scene.panels[i].panel_id)
    angles, diag = {}, {}
    for i in usable:
        el, az = panel_angles(delta[i], scene, i)
        pid = scene.panels[i].panel_id
        angles[i] = (el.angle, az.angle)
        diag[str(pid)] = {
            "pairs": el.n_pairs + az.n_pairs,
            "clamped": el.n_clamped + az.n_clamped,
            "wrapped": el.n_wrapped + az.n_wrapped,
        }
    pair_positions = {}
    for a, b in itertools.combinations(usable, 2):
        pos = triangulate(angles[a][1], angles[b][1], (scene.panels[a], scene.panels[b]))
        pair_positions[(scene.panels[a].panel_id, scene.panels[b].panel_id)] = pos
    position = np.mean(np.stack(list(pair_positions.values())), axis=0)
    return SensingEstimate(
        panel_ids=[scene.panels[i].panel_id for i in usable],
        phi_hat=[angles[i][0] for i in usable],
        psi_hat=[angles[i][1] for i in usable],
        position=position,
        pair_positions=pair_positions,
        diagnostics=diag,
    )


def localize(source: RssDataset | GainTable, scene: SceneGeometry) -> SensingEstimate:
    """Dataset (or ready gain table) to transmitter position."""
    table = build_gain_table(source) if isinstance(source, RssDataset) else source
    return localize_from_delta(recover_delta(table).delta_star, scene)
