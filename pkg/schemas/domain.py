"""
Core domain types shared by the simulation services.
"""

import math
from typing import Dict, Iterable, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import settings

AXES = ("x", "y", "z")
AXIS_VECTORS: Dict[str, Tuple[float, float, float]] = {
    "x": (1.0, 0.0, 0.0),
    "y": (0.0, 1.0, 0.0),
    "z": (0.0, 0.0, 1.0),
}

Factor = Tuple[int, str]
Term = Tuple[float, Tuple[Factor, ...]]

SERIES_COLUMNS = ["kick_index", "cycle_index", "time", "x", "y", "z", "norm", "x_mean"]


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class SpinGraph(BaseModel):
    """Spin positions on a pseudo-random 3D graph."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    L: int = Field(..., ge=1)
    positions: np.ndarray
    r_min: float = Field(..., gt=0)
    r_max: float = Field(..., gt=0)
    seed: int

    @field_validator("positions", mode="before")
    @classmethod
    def validate_positions(cls, v):
        array = _frozen_array(v, np.float64)
        if array.ndim != 2 or array.shape[1] != 3:
            raise ValueError("positions must be an (L, 3) array")
        return array

    @model_validator(mode="after")
    def validate_shape(self):
        if self.positions.shape[0] != self.L:
            raise ValueError(f"expected {self.L} positions, got {self.positions.shape[0]}")
        if self.r_min >= self.r_max:
            raise ValueError("r_min must be smaller than r_max")
        return self

    def distances(self) -> np.ndarray:
        delta = self.positions[:, None, :] - self.positions[None, :, :]
        return np.linalg.norm(delta, axis=-1)


class CouplingSet(BaseModel):
    """Dipolar coupling table, median coupling and on-site disorder fields."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    L: int = Field(..., ge=1)
    couplings: np.ndarray
    field_axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    median_coupling: float = 0.0
    fields: np.ndarray

    @field_validator("couplings", mode="before")
    @classmethod
    def validate_couplings(cls, v):
        array = _frozen_array(v, np.float64)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ValueError("couplings must be a square table")
        if not np.array_equal(array, array.T):
            raise ValueError("couplings must be symmetric")
        if np.any(np.diag(array) != 0.0):
            raise ValueError("self-couplings must vanish")
        return array

    @field_validator("fields", mode="before")
    @classmethod
    def validate_fields(cls, v):
        return _frozen_array(v, np.float64)

    @model_validator(mode="after")
    def validate_sizes(self):
        if self.couplings.shape[0] != self.L or self.fields.shape != (self.L,):
            raise ValueError("coupling table and fields must match L")
        return self

    def with_fields(self, fields: np.ndarray) -> "CouplingSet":
        return CouplingSet(
            L=self.L,
            couplings=self.couplings,
            field_axis=self.field_axis,
            median_coupling=self.median_coupling,
            fields=fields,
        )

    def pairs(self) -> Iterable[Tuple[int, int, float]]:
        """Nonzero couplings j < k in row-major order."""
        for j in range(self.L):
            for k in range(j + 1, self.L):
                b = float(self.couplings[j, k])
                if b != 0.0:
                    yield j, k, b


def _canonical_terms(L: int, terms: Iterable) -> Tuple[Term, ...]:
    merged: Dict[Tuple[Factor, ...], float] = {}
    for coeff, factors in terms:
        ordered = tuple(sorted((int(site), str(axis)) for site, axis in factors))
        sites = [site for site, _ in ordered]
        if len(set(sites)) != len(sites):
            raise ValueError(f"repeated site in term {ordered}")
        for site, axis in ordered:
            if axis not in AXES:
                raise ValueError(f"unknown axis '{axis}'")
            if not 0 <= site < L:
                raise ValueError(f"site {site} outside 0..{L - 1}")
        merged[ordered] = merged.get(ordered, 0.0) + float(coeff)

    keys = sorted(merged, key=lambda factors: (len(factors), factors))
    return tuple(
        (merged[key], key) for key in keys if abs(merged[key]) > settings.TERM_MERGE_TOL
    )


class TermOperator(BaseModel):
    """Weighted sum of products of spin-1/2 operators I = σ/2 on distinct sites.

    Terms are kept in canonical order (sites ascending within a term, terms
    sorted by body count then factors) with identical products merged, so
    equality is structural.
    """

    model_config = ConfigDict(frozen=True)

    L: int = Field(..., ge=1)
    terms: Tuple[Tuple[float, Tuple[Tuple[int, str], ...]], ...] = ()

    @model_validator(mode="before")
    @classmethod
    def canonicalize(cls, data):
        if isinstance(data, dict) and "L" in data:
            data = dict(data)
            data["terms"] = _canonical_terms(int(data["L"]), data.get("terms", ()))
        return data

    def __add__(self, other: "TermOperator") -> "TermOperator":
        self._check_sites(other)
        return TermOperator(L=self.L, terms=self.terms + other.terms)

    def __sub__(self, other: "TermOperator") -> "TermOperator":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "TermOperator":
        return TermOperator(L=self.L, terms=tuple((scalar * c, f) for c, f in self.terms))

    __rmul__ = __mul__

    def __neg__(self) -> "TermOperator":
        return (-1.0) * self

    def _check_sites(self, other: "TermOperator") -> None:
        if other.L != self.L:
            raise ValueError(f"site count mismatch: {self.L} vs {other.L}")

    def as_dict(self) -> Dict[Tuple[Factor, ...], float]:
        return {factors: coeff for coeff, factors in self.terms}

    def coefficient(self, *factors: Factor) -> float:
        key = tuple(sorted(factors))
        return self.as_dict().get(key, 0.0)

    def allclose(self, other: "TermOperator", atol: float = 1e-12) -> bool:
        self._check_sites(other)
        mine, theirs = self.as_dict(), other.as_dict()
        return all(
            abs(mine.get(key, 0.0) - theirs.get(key, 0.0)) <= atol
            for key in set(mine) | set(theirs)
        )

    def to_text(self) -> str:
        lines = [f"# sites = {self.L}"]
        for coeff, factors in self.terms:
            body = " ".join(f"{site}:{axis}" for site, axis in factors)
            lines.append(f"{coeff!r} {body}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TermOperator":
        L: Optional[int] = None
        terms: List[Term] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("#").partition("=")
                if key.strip() == "sites":
                    L = int(value)
                continue
            coeff, *factors = line.split()
            terms.append((float(coeff), tuple((int(s), a) for s, a in (f.split(":") for f in factors))))
        if L is None:
            raise ValueError("operator text lacks a '# sites = L' header")
        return cls(L=L, terms=terms)


class RotationSpec(BaseModel):
    """Collective rotation e^{-i angle axis·I}."""

    model_config = ConfigDict(frozen=True)

    axis: Tuple[float, float, float]
    angle: float

    @field_validator("axis")
    @classmethod
    def validate_axis(cls, v):
        norm = math.sqrt(sum(c * c for c in v))
        if norm == 0.0:
            raise ValueError("rotation axis must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            v = tuple(c / norm for c in v)
        return v

    @classmethod
    def about(cls, axis: str, angle: float) -> "RotationSpec":
        return cls(axis=AXIS_VECTORS[axis], angle=angle)

    def su2(self) -> np.ndarray:
        """2x2 single-spin matrix cos(a/2) 1 - i sin(a/2) n·σ."""
        nx, ny, nz = self.axis
        c, s = math.cos(self.angle / 2.0), math.sin(self.angle / 2.0)
        return np.array(
            [
                [c - 1j * s * nz, -1j * s * nx - s * ny],
                [-1j * s * nx + s * ny, c + 1j * s * nz],
            ],
            dtype=np.complex128,
        )


class DriveProtocol(BaseModel):
    """Two-frequency drive parameters and measurement schedule."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    theta: float = Field(math.pi / 2, description="Fast flip angle (rad)")
    gamma: float = Field(math.pi, description="Slow kick angle (rad)")
    tau: float = Field(..., gt=0, description="Fast pulse spacing")
    N: int = Field(..., ge=1, description="Fast pulses per slow kick")
    M: int = Field(..., ge=1, description="Number of Floquet cycles")
    slow_axis: Literal["y", "z"] = "y"
    noise_fraction: float = Field(0.0, ge=0.0, lt=1.0)
    noise_seed: int
    measure_every: Literal["fast_kick", "floquet_cycle"] = "floquet_cycle"

    @property
    def period(self) -> float:
        return self.N * self.tau

    @property
    def kicks_per_cycle(self) -> int:
        return self.N + 1


class StateKind(BaseModel):
    """Initial-state request."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["polarized", "evolved", "cat"] = "polarized"
    axis: Literal["+x", "-x", "+y", "-y", "+z", "-z"] = "+x"
    t_d: float = Field(0.0, ge=0.0)
    sign: Literal["+", "-"] = "+"


class StateVector(BaseModel):
    """Pure state of L spins; amplitude index bit j is site j, bit 0 = up."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    L: int = Field(..., ge=1)
    amplitudes: np.ndarray

    @field_validator("amplitudes", mode="before")
    @classmethod
    def validate_amplitudes(cls, v):
        array = np.asarray(v, dtype=np.complex128)
        if array.ndim != 1:
            raise ValueError("amplitudes must be one-dimensional")
        return array

    @model_validator(mode="after")
    def validate_dimension(self):
        if self.amplitudes.shape[0] != 2 ** self.L:
            raise ValueError(f"expected 2^{self.L} amplitudes")
        return self

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(L=self.L, amplitudes=self.amplitudes.copy())


class TimeSeries(BaseModel):
    """Measurement records of one protocol run."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    frame: pd.DataFrame
    protocol: DriveProtocol
    provenance: Dict[str, str] = Field(default_factory=dict)

    @field_validator("frame")
    @classmethod
    def validate_frame(cls, v):
        missing = [c for c in SERIES_COLUMNS if c not in v.columns]
        if missing:
            raise ValueError(f"series frame lacks columns {missing}")
        if not v["time"].is_monotonic_increasing:
            raise ValueError("series time must be monotone")
        return v[SERIES_COLUMNS].reset_index(drop=True)

    def cycle_frame(self) -> pd.DataFrame:
        """Records at Floquet-cycle boundaries, including the initial record."""
        mask = self.frame["kick_index"] % self.protocol.kicks_per_cycle == 0
        return self.frame[mask].reset_index(drop=True)

    @classmethod
    def from_cycle_values(
        cls,
        values: np.ndarray,
        protocol: DriveProtocol,
        times: Optional[np.ndarray] = None,
        y_values: Optional[np.ndarray] = None,
    ) -> "TimeSeries":
        """Build a per-cycle series from plain arrays (synthetic input and reloads)."""
        values = np.asarray(values, dtype=np.float64)
        cycles = np.arange(values.shape[0])
        if times is None:
            times = cycles * protocol.period
        frame = pd.DataFrame(
            {
                "kick_index": cycles * protocol.kicks_per_cycle,
                "cycle_index": cycles,
                "time": np.asarray(times, dtype=np.float64),
                "x": values,
                "y": np.zeros_like(values) if y_values is None else np.asarray(y_values, dtype=np.float64),
                "z": np.zeros_like(values),
                "norm": np.ones_like(values),
                "x_mean": values,
            }
        )
        return cls(frame=frame, protocol=protocol)


class DenseOperator(BaseModel):
    """Dense 2^L x 2^L matrix used by the verification oracles."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    L: int = Field(..., ge=1)
    matrix: np.ndarray

    @model_validator(mode="after")
    def validate_matrix(self):
        dim = 2 ** self.L
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix")
        return self

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= atol)

    def unitarity_defect(self) -> float:
        identity = np.eye(self.matrix.shape[0])
        return float(np.linalg.norm(self.matrix.conj().T @ self.matrix - identity, ord=2))


class Spectrum(BaseModel):
    """Stroboscopic Fourier amplitudes at ω_k = 2πk/(MT)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frequencies: np.ndarray
    amplitudes: np.ndarray
    period: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.amplitudes)

    def bin_of(self, omega: float) -> int:
        step = 2.0 * math.pi / (len(self.amplitudes) * self.period)
        return int(round(omega / step)) % len(self.amplitudes)

    def magnitude_at(self, omega: float) -> float:
        return float(self.magnitude[self.bin_of(omega)])

    def peak_frequency(self) -> float:
        return float(self.frequencies[int(np.argmax(self.magnitude))])
