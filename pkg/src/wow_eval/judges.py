"""Deterministic arithmetic over external-judge outputs.

All judge files are JSON documents matching the judges' output schemas;
the validators here reject schema drift loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    AllNull,
    EmptyGroundTruth,
    OutOfRange,
    SchemaError,
)

CAPTION_COMPONENTS = (
    "initial_state", "processing_state", "final_state", "action", "object",
)

PHYSICAL_DIMS = (
    "object_interaction", "physical_properties", "temporal_consistency",
    "lighting_and_reflections", "fluids_and_particles", "local_anomalies",
)

GRPO_KEYS = (
    "video_quality", "instruction_following",
    "physical_consistency", "planning_logic",
)

_THREE_LEVEL = (0, 0.5, 1)


# ---------------------------------------------------------------------------
# Judgment types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaptionJudgment:
    components: dict  # five fixed keys -> value in {0, 0.5, 1}

    def __post_init__(self):
        keys = set(self.components)
        if keys != set(CAPTION_COMPONENTS):
            raise SchemaError(
                f"caption components must be exactly {CAPTION_COMPONENTS}, "
                f"got {sorted(keys)}"
            )
        for k, v in self.components.items():
            if v not in _THREE_LEVEL:
                raise SchemaError(f"component {k!r}: {v} not in {{0, 0.5, 1}}")


@dataclass(frozen=True)
class SequenceExecJudgment:
    sequence_match: float
    exec_quality: tuple  # one integer in [1, 5] per action-object pair

    def __post_init__(self):
        if not 0 <= self.sequence_match <= 1:
            raise SchemaError(f"sequence_match {self.sequence_match} not in [0,1]")
        if not self.exec_quality:
            raise SchemaError("exec_quality must be non-empty")
        for q in self.exec_quality:
            if not (isinstance(q, int) and 1 <= q <= 5):
                raise SchemaError(f"exec_quality value {q!r} not an int in [1,5]")


@dataclass(frozen=True)
class PhysicalJudgment:
    dims: dict  # six fixed keys -> int in [1, 5] or None

    def __post_init__(self):
        if set(self.dims) != set(PHYSICAL_DIMS):
            raise SchemaError(
                f"physical dims must be exactly {PHYSICAL_DIMS}, "
                f"got {sorted(self.dims)}"
            )
        for k, v in self.dims.items():
            if v is not None and not (isinstance(v, int) and 1 <= v <= 5):
                raise SchemaError(f"dim {k!r}: {v!r} not null or int in [1,5]")


@dataclass(frozen=True)
class PlanDag:
    """Atomic actions (skill, object, args) with acyclic dependency edges."""

    nodes: tuple  # of (skill, object, args tuple)
    edges: tuple = ()

    def __post_init__(self):
        n = len(self.nodes)
        adj = {i: [] for i in range(n)}
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise SchemaError(f"edge ({a}, {b}) out of range")
            adj[a].append(b)
        state = {}

        def visit(u):
            state[u] = 1
            for v in adj[u]:
                if state.get(v) == 1:
                    raise SchemaError("edges contain a cycle")
                if v not in state:
                    visit(v)
            state[u] = 2

        for u in range(n):
            if u not in state:
                visit(u)


@dataclass(frozen=True)
class PlanningJudgment:
    pred: PlanDag
    gt: PlanDag
    task_completion: float

    def __post_init__(self):
        if not 0 <= self.task_completion <= 1:
            raise SchemaError(
                f"task_completion {self.task_completion} not in [0,1]"
            )


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def load_caption_judgment(path) -> CaptionJudgment:
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected an object")
    return CaptionJudgment(components=doc)


def load_sequence_exec_judgment(path) -> SequenceExecJudgment:
    doc = _load_json(path)
    try:
        return SequenceExecJudgment(
            sequence_match=doc["sequence_match"],
            exec_quality=tuple(doc["exec_quality"]),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def load_physical_judgment(path) -> PhysicalJudgment:
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected an object")
    return PhysicalJudgment(dims=doc)


def _parse_dag(doc) -> PlanDag:
    try:
        nodes = tuple(
            (n["skill"], n["object"], tuple(n.get("args", ())))
            for n in doc["nodes"]
        )
        edges = tuple((a, b) for a, b in doc.get("edges", ()))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad DAG document: {exc}") from exc
    return PlanDag(nodes=nodes, edges=edges)


def load_planning_judgment(path) -> PlanningJudgment:
    doc = _load_json(path)
    try:
        return PlanningJudgment(
            pred=_parse_dag(doc["pred"]),
            gt=_parse_dag(doc["gt"]),
            task_completion=doc["task_completion"],
        )
    except KeyError as exc:
        raise SchemaError(f"{path}: missing key {exc}") from exc


# ---------------------------------------------------------------------------
# Score arithmetic
# ---------------------------------------------------------------------------

def caption_score(j: CaptionJudgment) -> float:
    """100 times the mean of the five component values."""
    return 100.0 * sum(j.components.values()) / len(CAPTION_COMPONENTS)


def sequence_exec_scores(j: SequenceExecJudgment):
    """(sequence score, execution score), both on the 0..100 scale."""
    seq = 100.0 * j.sequence_match
    mean_q = sum(j.exec_quality) / len(j.exec_quality)
    execq = 100.0 * (mean_q - 1.0) / 4.0
    return seq, execq


def physical_score(j: PhysicalJudgment) -> float:
    """Mean over non-null dims, mapped linearly from 1..5 onto 0..100."""
    vals = [v for v in j.dims.values() if v is not None]
    if not vals:
        raise AllNull("every physical dimension is null")
    return 100.0 * (sum(vals) / len(vals) - 1.0) / 4.0


def grpo_alignment_reward(out, gt) -> float:
    """Stage-2 alignment reward: 1 minus the mean normalized absolute error.

    Scores are clipped to [1,5]; errors divide by 4; the reward clamps to
    [0,1] and is 0 when parsing fails or no keys match.
    """
    if not isinstance(out, dict) or not isinstance(gt, dict):
        return 0.0
    errors = []
    for k in GRPO_KEYS:
        if k in out and k in gt:
            try:
                so = min(5.0, max(1.0, float(out[k])))
                sg = min(5.0, max(1.0, float(gt[k])))
            except (TypeError, ValueError):
                return 0.0
            errors.append(abs(sg - so) / 4.0)
    if not errors:
        return 0.0
    mean_err = sum(errors) / len(errors)
    return max(0.0, min(1.0, 1.0 - mean_err))


def _node_key(node, match_args: bool):
    skill, obj, args = node
    key = (skill.lower(), obj.lower())
    if match_args:
        key = key + (tuple(a.lower() for a in args),)
    return key


def _lcs_length(a, b) -> int:
    n, m = len(a), len(b)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                dp[i][j] = dp[i - 1][j - 1] + 1
            else:
                dp[i][j] = max(dp[i - 1][j], dp[i][j - 1])
    return dp[n][m]


def dag_node_correctness(pred: PlanDag, gt: PlanDag,
                         match_args: bool = False) -> float:
    """|LCS(pred nodes, gt nodes)| / |gt nodes|.

    Node equality is case-insensitive on (skill, object); args participate
    only when match_args is set.
    """
    if not gt.nodes:
        raise EmptyGroundTruth("ground-truth DAG has no nodes")
    a = [_node_key(n, match_args) for n in pred.nodes]
    b = [_node_key(n, match_args) for n in gt.nodes]
    return _lcs_length(a, b) / len(b)


def long_horizon_score(node_correctness: float, task_completion: float) -> float:
    """(node correctness + task completion) * 50, on the 0..100 scale."""
    if not (0 <= node_correctness <= 1 and 0 <= task_completion <= 1):
        raise OutOfRange(
            f"inputs ({node_correctness}, {task_completion}) must lie in [0,1]"
        )
    return (node_correctness + task_completion) * 50.0


def planning_score(j: PlanningJudgment, match_args: bool = False) -> float:
    """Long-horizon score straight from a planning judgment."""
    nc = dag_node_correctness(j.pred, j.gt, match_args=match_args)
    return long_horizon_score(nc, j.task_completion)
