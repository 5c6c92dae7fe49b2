from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator


def _labels(v):
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return v


class NodeSpec(BaseModel):
    name: str = Field(min_length=1)
    values: List[str] = Field(min_length=1)
    latent: bool = False

    @field_validator("values", mode="before")
    @classmethod
    def _stringify(cls, v):
        return _labels(v)


class KernelSpec(BaseModel):
    parents: List[str] = []
    rows: List[List[float]]


class ModelFile(BaseModel):
    """On-disk causal model (or, with bidirected edges and no kernels, an ADMG)."""

    format_version: Literal[1] = 1
    nodes: List[NodeSpec]
    edges: List[Tuple[str, str]] = []
    bidirected: List[Tuple[str, str]] = []
    kernels: Dict[str, KernelSpec] = {}


class TauEntry(BaseModel):
    low: List[str]
    high: str

    @field_validator("low", mode="before")
    @classmethod
    def _stringify(cls, v):
        return _labels(v)

    @field_validator("high", mode="before")
    @classmethod
    def _stringify_high(cls, v):
        return str(v)


class AbstractionFile(BaseModel):
    """On-disk abstraction: clusters, removed nodes, tau tables and optional epsilon tables.

    tau entries are written as [[low values...], high value] pairs.
    """

    format_version: Literal[1] = 1
    clusters: Dict[str, List[str]]
    removed: List[str] = []
    tau: Dict[str, List[TauEntry]] = {}
    high_values: Dict[str, List[str]] = {}
    epsilon: Dict[str, List[List[float]]] = {}
    joint_tau: Optional[List[Tuple[List[str], List[str]]]] = None

    @field_validator("tau", mode="before")
    @classmethod
    def _pairs(cls, v):
        if not isinstance(v, dict):
            return v
        out = {}
        for h, entries in v.items():
            out[h] = [
                {"low": e[0], "high": e[1]} if isinstance(e, (list, tuple)) and len(e) == 2 else e
                for e in entries
            ]
        return out

    @field_validator("high_values", mode="before")
    @classmethod
    def _stringify(cls, v):
        if isinstance(v, dict):
            return {h: _labels(vals) for h, vals in v.items()}
        return v

    def to_json(self) -> dict:
        data = {
            "format_version": self.format_version,
            "clusters": self.clusters,
            "removed": self.removed,
            "tau": {h: [[e.low, e.high] for e in entries] for h, entries in self.tau.items()},
        }
        if self.high_values:
            data["high_values"] = self.high_values
        if self.epsilon:
            data["epsilon"] = self.epsilon
        if self.joint_tau is not None:
            data["joint_tau"] = [[list(a), list(b)] for a, b in self.joint_tau]
        return data
