"""
Pydantic schemas for run configuration files.
"""

import math
from typing import List, Literal, Optional, Tuple
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from schemas.domain import StateKind

SCHEMA_VERSION = 1


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DisorderSpec(StrictModel):
    """On-site fields c_j ~ N(mean_factor·b̄, (sigma_factor·b̄)²)."""

    mean_factor: float = Field(1.0)
    sigma_factor: float = Field(10.0, ge=0.0)
    seed: int


class GraphSpec(StrictModel):
    """Inline graph parameters or a reference to a saved graph file."""

    L: Optional[int] = Field(None, ge=1)
    r_min: float = Field(0.7, gt=0)
    r_max: float = Field(0.8, gt=0)
    seed: Optional[int] = None
    file: Optional[str] = Field(None, description="Saved graph file; overrides L/r_min/r_max/seed")
    field_axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    disorder: Optional[DisorderSpec] = None

    @model_validator(mode="after")
    def validate_source(self):
        if self.file is None:
            if self.L is None or self.seed is None:
                raise ValueError("inline graphs need L and seed")
            if self.disorder is None:
                raise ValueError("inline graphs need a disorder block with a seed")
        if self.r_min >= self.r_max:
            raise ValueError("r_min must be smaller than r_max")
        return self


class ProtocolSpec(StrictModel):
    """Drive protocol template; exactly one of tau / tau_j is set."""

    theta: float = Field(math.pi / 2)
    gamma: float = Field(math.pi)
    tau: Optional[float] = Field(None, gt=0)
    tau_j: Optional[float] = Field(None, gt=0, description="τ in units of 1/J")
    N: int = Field(..., ge=1)
    M: int = Field(..., ge=1)
    slow_axis: Literal["y", "z"] = "y"
    noise_fraction: float = Field(0.0, ge=0.0, lt=1.0)
    noise_seed: int
    measure_every: Literal["fast_kick", "floquet_cycle"] = "floquet_cycle"

    @model_validator(mode="after")
    def validate_timing(self):
        if (self.tau is None) == (self.tau_j is None):
            raise ValueError("set exactly one of 'tau' and 'tau_j'")
        return self


class GammaSpan(StrictModel):
    """Uniform γ grid given in units of π."""

    start: float
    stop: float
    count: int = Field(..., ge=1)

    def values(self) -> List[float]:
        if self.count == 1:
            return [self.start * math.pi]
        step = (self.stop - self.start) / (self.count - 1)
        return [(self.start + i * step) * math.pi for i in range(self.count)]


class SweepSpec(StrictModel):
    """Sweep axes; an empty axis keeps the protocol template value."""

    gamma: List[float] = Field(default_factory=list)
    gamma_span: Optional[GammaSpan] = None
    N: List[int] = Field(default_factory=list)
    tau: List[float] = Field(default_factory=list)
    tau_j: List[float] = Field(default_factory=list)
    theta: List[float] = Field(default_factory=list)
    t_d: List[float] = Field(default_factory=list)
    graph_seed: List[int] = Field(default_factory=list)

    @field_validator("N")
    @classmethod
    def validate_n(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("N values must be positive")
        return v

    @model_validator(mode="after")
    def validate_axes(self):
        if self.gamma and self.gamma_span is not None:
            raise ValueError("use either 'gamma' or 'gamma_span'")
        if self.tau and self.tau_j:
            raise ValueError("use either 'tau' or 'tau_j' as a sweep axis")
        gammas = self.gamma_values()
        if len(set(gammas)) != len(gammas):
            raise ValueError("gamma values must be distinct")
        return self

    def gamma_values(self) -> List[float]:
        if self.gamma_span is not None:
            return self.gamma_span.values()
        return list(self.gamma)


class AnalysisSpec(StrictModel):
    """Analysis toggles."""

    heating_time: bool = True
    spectrum: bool = True
    fits: bool = True
    rigidity: bool = True
    rectify: Literal["none", "absolute"] = "absolute"
    threshold: float = Field(math.exp(-1.0), gt=0, lt=1)
    rigidity_threshold: float = Field(0.2, gt=0, lt=1)


class CouplingScaleSpec(StrictModel):
    """Sampling window for the J estimate; defaults follow the coupling set."""

    dt: Optional[float] = Field(None, gt=0)
    t_max: Optional[float] = Field(None, gt=0)


class RunConfig(StrictModel):
    """Top-level run configuration."""

    schema_version: int
    graph: GraphSpec
    protocol: ProtocolSpec
    hamiltonian: Literal["full", "idealized"] = "full"
    initial_state: StateKind = Field(default_factory=StateKind)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)
    coupling_scale: CouplingScaleSpec = Field(default_factory=CouplingScaleSpec)
    output_dir: Optional[str] = None
    workers: int = Field(1, ge=1)

    @field_validator("schema_version")
    @classmethod
    def validate_schema_version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; expected {SCHEMA_VERSION}")
        return v

    def with_seed_override(self, seed: int) -> "RunConfig":
        """Derive every seed from one base seed."""
        data = self.model_dump()
        data["graph"]["seed"] = seed
        if data["graph"].get("disorder") is not None:
            data["graph"]["disorder"]["seed"] = seed + 1
        data["protocol"]["noise_seed"] = seed + 2
        data["sweep"]["graph_seed"] = []
        return RunConfig.model_validate(data)
