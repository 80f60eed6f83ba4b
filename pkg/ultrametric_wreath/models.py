"""Data models for input files and reports.

This module defines Pydantic models for the JSON file formats read by the CLI
(spaces, trees, level embeddings, skeletons, projection systems) and for the
reports written back (validation reports, witness records, theorem reports).
Domain objects live in their own modules; ``serialization`` converts between
the two.
"""

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .permgroup import IsoWitness


class Violation(BaseModel):
    """A single failed axiom with the tuple that breaks it."""

    axiom: str = Field(..., description="Short axiom name, e.g. 'strong-triangle'")
    where: list[str] = Field(default_factory=list, description="Offending tuple")
    message: str = Field(..., description="Human-readable explanation")


class ValidationReport(BaseModel):
    """Outcome of an axiom check; failure is data, not an exception."""

    kind: str = Field(..., description="What was validated (space, tree, skeleton, system)")
    ok: bool = Field(..., description="True iff no violation was found")
    violations: list[Violation] = Field(default_factory=list)

    @classmethod
    def from_violations(cls, kind: str, violations: list[Violation]) -> "ValidationReport":
        return cls(kind=kind, ok=not violations, violations=violations)


class WitnessRecord(BaseModel):
    """Serializable summary of an IsoWitness."""

    name: str = Field(..., description="Which isomorphism this witnesses")
    verified: bool
    reason: str
    source_order: int
    target_order: int
    induced: bool = False
    bijection: dict[str, str] = Field(default_factory=dict)
    failure: Optional[list[str]] = Field(
        default=None, description="One-line notation of the first offending element"
    )

    @classmethod
    def from_witness(cls, name: str, witness: IsoWitness) -> "WitnessRecord":
        return cls(
            name=name,
            verified=witness.verified,
            reason=witness.reason,
            source_order=witness.source.order,
            target_order=witness.target.order,
            induced=witness.induced,
            bijection={str(x): str(y) for x, y in witness.bijection},
            failure=witness.failure.one_line() if witness.failure is not None else None,
        )


Verdict = Literal["PASS", "FAIL", "DIAGNOSTIC"]


class TheoremReport(BaseModel):
    """Result of an end-to-end pipeline run.

    The verdict is PASS iff every witness verified, FAIL if any did not, and
    DIAGNOSTIC when a hypothesis of the pipeline does not hold for the input.
    """

    pipeline: str = Field(..., description="Pipeline name")
    input_digest: str = Field("", description="sha256 of the canonical input")
    verdict: Verdict
    witnesses: list[WitnessRecord] = Field(default_factory=list)
    orders: dict[str, int] = Field(default_factory=dict)
    artifacts: dict[str, Any] = Field(default_factory=dict)
    diagnostics: list[str] = Field(default_factory=list)
    timings_ms: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_verdict(self) -> "TheoremReport":
        """A PASS verdict requires every witness to be verified."""
        if self.verdict == "PASS" and not all(w.verified for w in self.witnesses):
            raise ValueError("PASS verdict with an unverified witness")
        return self


class BatchReport(BaseModel):
    """Aggregated corpus run."""

    seed: int
    count: int
    max_points: int
    verdicts: dict[str, int] = Field(default_factory=dict)
    instances: list[dict[str, Any]] = Field(default_factory=list)


# Input file schemas


class SpaceFile(BaseModel):
    """``{ "points": ["a","b"], "dist": [["0","1"],["1","0"]] }``"""

    kind: Optional[Literal["space"]] = None
    points: list[str]
    dist: list[list[str]]

    @field_validator("dist", mode="before")
    @classmethod
    def stringify(cls, v: Any) -> Any:
        """Accept integer entries alongside rational strings."""
        if isinstance(v, list):
            return [[str(x) for x in row] if isinstance(row, list) else row for row in v]
        return v

    @model_validator(mode="after")
    def check_square(self) -> "SpaceFile":
        """Validate that dist is a square matrix over points."""
        n = len(self.points)
        if n == 0:
            raise ValueError("points cannot be empty")
        if len(self.dist) != n or any(len(row) != n for row in self.dist):
            raise ValueError("dist must be a square matrix over points")
        return self


class NodeEntry(BaseModel):
    id: str
    level: int = Field(..., ge=0)
    parent: Optional[str] = None


class TreeFile(BaseModel):
    """``{ "levels": ["1","2"], "nodes": [{"id": "n0", "level": 0, "parent": "n1"}, ...] }``"""

    kind: Optional[Literal["tree"]] = None
    levels: list[str]
    nodes: list[NodeEntry]

    @field_validator("levels")
    @classmethod
    def validate_levels(cls, v: list[str]) -> list[str]:
        """Validate that levels are present."""
        if not v:
            raise ValueError("levels cannot be empty")
        return v


class EmbeddingFile(BaseModel):
    """``{ "pairs": { "1": ["10", "11"], ... } }``"""

    kind: Optional[Literal["embedding"]] = None
    pairs: dict[str, list[str]]

    @field_validator("pairs")
    @classmethod
    def validate_pairs(cls, v: dict[str, list[str]]) -> dict[str, list[str]]:
        """Validate that every level maps to a (minus, plus) pair."""
        for key, pair in v.items():
            if len(pair) != 2:
                raise ValueError(f"level {key} must map to exactly two values")
        return v


class SkeletonFile(BaseModel):
    """``{ "elements": ["d1","d2"], "le": [["d1","d2"]], "N": {...}, "levels": {...} }``"""

    kind: Optional[Literal["skeleton"]] = None
    elements: list[str]
    le: list[list[str]] = Field(default_factory=list)
    N: dict[str, int]
    levels: Optional[dict[str, str]] = None

    @model_validator(mode="after")
    def check_consistency(self) -> "SkeletonFile":
        """Validate pair arity and that N covers exactly the elements."""
        if not self.elements:
            raise ValueError("elements cannot be empty")
        if any(len(p) != 2 for p in self.le):
            raise ValueError("every le entry must be a pair")
        if set(self.N) != set(self.elements):
            raise ValueError("N must label exactly the skeleton elements")
        if any(n < 1 for n in self.N.values()):
            raise ValueError("N values must be positive")
        if self.levels is not None and set(self.levels) != set(self.elements):
            raise ValueError("levels must label exactly the skeleton elements")
        return self


class PiEntry(BaseModel):
    """One projection table row: pi_{source,target}(sequence) = image."""

    source: str
    target: str
    sequence: dict[str, int]
    image: dict[str, int]


class SystemFile(BaseModel):
    """A skeleton with local domains and optional non-trivial projections.

    Missing ``pi`` rows default to plain restriction. ``groups`` optionally
    lists generators (one-line over 0..N-1) of the coordinate groups H_delta;
    absent entries mean the full symmetric group.
    """

    kind: Optional[Literal["system"]] = None
    skeleton: SkeletonFile
    family: dict[str, list[dict[str, int]]]
    pi: list[PiEntry] = Field(default_factory=list)
    groups: dict[str, list[list[int]]] = Field(default_factory=dict)


class FullnessReport(BaseModel):
    """Aut(T) against Iso(G(T)) on the same ground set."""

    aut_order: int
    iso_order: int
    forward_inclusion: bool = Field(..., description="Every automorphism is an isometry")
    equal: bool


class CombContractReport(BaseModel):
    """Finite-scale isometry count of the point-replacement space."""

    base_order: int
    comb_order: int
    points: int
    expected_order: int
    actual_order: int
    copies_preserved: bool = Field(
        ..., description="Every isometry maps each copy {x} x comb onto some copy"
    )

    @property
    def holds(self) -> bool:
        return self.expected_order == self.actual_order and self.copies_preserved


class UrysohnReport(BaseModel):
    """Wideness and quasi-maximality of a space with a linear condensed skeleton."""

    bound: int = Field(..., description="The wideness bound m")
    skeleton_N: list[int] = Field(..., description="N along the chain, bottom first")
    wide: dict[str, bool] = Field(default_factory=dict, description="m-wideness per distance")
    quasi_maximal: bool
    simplified_N: list[int]
    simplify_witness: WitnessRecord
