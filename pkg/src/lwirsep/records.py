"""Observation records and the ill-posed access contract.

A simulated record exposes every radiative component. A field-like record
mimics a real collection: only the observed total radiance and the viewing
geometry are readable, and the target truth (material, temperature) only when
the pixel is labeled. The atmospheric components of a field-like record are
withheld at the interface level -- reading them raises.
"""

from __future__ import annotations

import numpy as np

from .atmosphere import Geometry
from .errors import WithheldComponentError

SOURCE_SIMULATED = "simulated"
SOURCE_FIELD_LIKE = "field_like"

# Fixed component order used by the loss terms, error tables and file layout.
COMPONENTS = ("tau", "L_down", "L_up", "L_emit", "L_total")


class SampleRecord:
    """One observation: geometry, target identity and radiative components."""

    __slots__ = (
        "geometry",
        "source",
        "labeled",
        "_material_id",
        "_T",
        "_tau",
        "_L_down",
        "_L_up",
        "_L_emit",
        "_L_total",
    )

    def __init__(self, geometry: Geometry, source: str, labeled: bool,
                 material_id: int, T: float, tau, L_down, L_up, L_emit, L_total):
        if source not in (SOURCE_SIMULATED, SOURCE_FIELD_LIKE):
            raise ValueError(f"unknown source {source!r}")
        self.geometry = geometry
        self.source = source
        self.labeled = bool(labeled)
        self._material_id = int(material_id)
        self._T = float(T)
        self._tau = tau
        self._L_down = L_down
        self._L_up = L_up
        self._L_emit = L_emit
        self._L_total = L_total

    @classmethod
    def simulated(cls, geometry, material_id, T, tau, L_down, L_up, L_emit, L_total):
        return cls(geometry, SOURCE_SIMULATED, True, material_id, T,
                   np.asarray(tau, dtype=np.float64),
                   np.asarray(L_down, dtype=np.float64),
                   np.asarray(L_up, dtype=np.float64),
                   np.asarray(L_emit, dtype=np.float64),
                   np.asarray(L_total, dtype=np.float64))

    @classmethod
    def field_like(cls, geometry, material_id, T, L_total, labeled):
        return cls(geometry, SOURCE_FIELD_LIKE, labeled, material_id, T,
                   None, None, None, None, np.asarray(L_total, dtype=np.float64))

    # -- reading interface ---------------------------------------------------

    def _component(self, name, value):
        if self.source == SOURCE_FIELD_LIKE:
            raise WithheldComponentError(
                f"{name} is withheld on field-like records (only L_total is observed)")
        return value

    @property
    def tau(self):
        return self._component("tau", self._tau)

    @property
    def L_down(self):
        return self._component("L_down", self._L_down)

    @property
    def L_up(self):
        return self._component("L_up", self._L_up)

    @property
    def L_emit(self):
        return self._component("L_emit", self._L_emit)

    @property
    def L_total(self):
        return self._L_total

    @property
    def material_id(self) -> int:
        if self.source == SOURCE_FIELD_LIKE and not self.labeled:
            raise WithheldComponentError("material identity is withheld on unlabeled field pixels")
        return self._material_id

    @property
    def T(self) -> float:
        if self.source == SOURCE_FIELD_LIKE and not self.labeled:
            raise WithheldComponentError("surface temperature is withheld on unlabeled field pixels")
        return self._T

    def __eq__(self, other):
        if not isinstance(other, SampleRecord):
            return NotImplemented
        def same(a, b):
            if a is None or b is None:
                return a is b
            return np.array_equal(a, b)
        return (self.geometry == other.geometry and self.source == other.source
                and self.labeled == other.labeled
                and self._material_id == other._material_id and self._T == other._T
                and all(same(getattr(self, f"_{c}"), getattr(other, f"_{c}")) for c in COMPONENTS))

    def __repr__(self):
        return (f"SampleRecord({self.source}, material={self._material_id}, "
                f"range={self.geometry.range_m}, angle={self.geometry.angle_deg})")
