"""Flat atom indexing shared by the channel, sampling and statistics code.

Atoms of all panels are concatenated panel by panel, each panel row-major
(u outer, v inner).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class AtomLayout:
    shapes: tuple[tuple[int, int], ...]
    k_levels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple((int(r), int(c)) for r, c in self.shapes))
        object.__setattr__(self, "k_levels", tuple(int(k) for k in self.k_levels))
        if len(self.shapes) != len(self.k_levels):
            raise DimensionError("one K per panel is required")

    @classmethod
    def from_scene(cls, scene) -> "AtomLayout":
        return cls(tuple(p.shape for p in scene.panels), tuple(p.k_levels for p in scene.panels))

    @property
    def n_panels(self) -> int:
        return len(self.shapes)

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        return tuple(r * c for r, c in self.shapes)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.sizes)]))

    @property
    def n_atoms(self) -> int:
        return self.offsets[-1]

    def panel_slice(self, panel: int) -> slice:
        return slice(self.offsets[panel], self.offsets[panel + 1])

    @cached_property
    def atom_levels(self) -> np.ndarray:
        """K of the panel owning each atom."""
        return np.repeat(np.array(self.k_levels, dtype=np.int64), self.sizes)

    @cached_property
    def atom_phase_step(self) -> np.ndarray:
        return TWO_PI / self.atom_levels

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        """Split a trailing flat atom axis into per-panel (…, n_row, n_col) arrays."""
        flat = np.asarray(flat)
        return [
            flat[..., self.panel_slice(i)].reshape(flat.shape[:-1] + self.shapes[i])
            for i in range(self.n_panels)
        ]

    def join(self, panels: Sequence[np.ndarray]) -> np.ndarray:
        if len(panels) != self.n_panels:
            raise DimensionError(f"expected {self.n_panels} panels, got {len(panels)}")
        parts = []
        for arr, shape in zip(panels, self.shapes):
            arr = np.asarray(arr)
            if arr.shape[-2:] != shape:
                raise DimensionError(f"panel array shape {arr.shape} does not end in {shape}")
            parts.append(arr.reshape(arr.shape[:-2] + (shape[0] * shape[1],)))
        return np.concatenate(parts, axis=-1)

    def atom_label(self, atom: int) -> tuple[int, int, int]:
        """(panel, u, v) of a flat atom index, with 1-based u and v."""
        panel = int(np.searchsorted(self.offsets, atom, side="right") - 1)
        local = atom - self.offsets[panel]
        r, c = divmod(local, self.shapes[panel][1])
        return panel, r + 1, c + 1

    def to_dict(self) -> dict:
        return {"shapes": [list(s) for s in self.shapes], "k_levels": list(self.k_levels)}


@dataclass(frozen=True, eq=False)
class PhaseConfig:
    """One K-ary phase index per meta-atom; phase value is index * 2*pi/K."""

    layout: AtomLayout
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.shape != (self.layout.n_atoms,):
            raise DimensionError(
                f"configuration has shape {idx.shape}, layout needs ({self.layout.n_atoms},)"
            )
        if not np.issubdtype(idx.dtype, np.integer):
            if not np.all(idx == np.round(idx)):
                raise ValueError("phase indices must be integers")
        idx = idx.astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= self.layout.atom_levels):
            raise ValueError("phase index out of range")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @classmethod
    def zeros(cls, layout: AtomLayout) -> "PhaseConfig":
        return cls(layout, np.zeros(layout.n_atoms, dtype=np.int64))

    @classmethod
    def from_panels(cls, layout: AtomLayout, panels: Sequence[np.ndarray]) -> "PhaseConfig":
        return cls(layout, layout.join(panels))

    def per_panel(self) -> list[np.ndarray]:
        return self.layout.split(self.indices)

    def phases(self) -> np.ndarray:
        return self.indices * self.layout.atom_phase_step

    def __eq__(self, other):
        if not isinstance(other, PhaseConfig):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.layout, self.indices.tobytes()))
