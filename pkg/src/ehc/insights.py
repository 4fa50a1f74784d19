"""Experience learning: contrast pairs, cross-category groups, and the weighted insight pool.

The LLM edits the pool through a line-oriented op grammar::

    ADD <text>
    EDIT <id> <text>
    UPVOTE <id>
    DOWNVOTE <id>

Keywords are case-insensitive. Anything else is skipped with a warning.
A new insight starts at the pool's initial weight; an insight whose weight
reaches zero is removed immediately.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ehc.errors import BackendError, UsageError
from ehc.llm import CompletionBackend
from ehc.memory import MemoryRecord
from ehc.prompts import INSIGHT_SLOTS, render
from ehc.trajectory import Step, Trajectory, parse_trajectory, render_steps

log = logging.getLogger(__name__)

OP_KINDS = ("ADD", "EDIT", "UPVOTE", "DOWNVOTE")
SUCCESS_KINDS = ("success", "seed")


@dataclass(frozen=True)
class ContrastPair:
    category: str
    success_segment: tuple[Step, ...]
    failure_trajectory: Trajectory
    failure_reflections: str
    success_id: int = 0
    failure_id: int = 0
    segment_start: int = 0


@dataclass(frozen=True)
class CrossGroup:
    category: str
    own_success: Trajectory
    other_category: str
    other_success: Trajectory

    def __post_init__(self) -> None:
        if self.category == self.other_category:
            raise UsageError("a cross-category group needs two distinct categories")


@dataclass
class Insight:
    id: int
    category: str
    text: str
    weight: int


@dataclass(frozen=True)
class InsightOp:
    kind: str
    insight_id: Optional[int] = None
    text: Optional[str] = None

    @classmethod
    def add(cls, text: str) -> "InsightOp":
        return cls("ADD", text=text)

    @classmethod
    def edit(cls, insight_id: int, text: str) -> "InsightOp":
        return cls("EDIT", insight_id, text)

    @classmethod
    def upvote(cls, insight_id: int) -> "InsightOp":
        return cls("UPVOTE", insight_id)

    @classmethod
    def downvote(cls, insight_id: int) -> "InsightOp":
        return cls("DOWNVOTE", insight_id)


@dataclass
class ChangeReport:
    added: list[int] = field(default_factory=list)
    edited: list[int] = field(default_factory=list)
    upvoted: list[int] = field(default_factory=list)
    downvoted: list[int] = field(default_factory=list)
    removed: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def merge(self, other: "ChangeReport") -> None:
        for name in ("added", "edited", "upvoted", "downvoted", "removed", "warnings"):
            getattr(self, name).extend(getattr(other, name))


class InsightPool:
    """Insights for all categories. Ids are global and never reused."""

    def __init__(self, initial_weight: int = 2, max_per_category: int = 20):
        if initial_weight < 1:
            raise UsageError(f"initial insight weight must be >= 1, got {initial_weight}")
        if max_per_category < 1:
            raise UsageError(f"max insights per category must be >= 1, got {max_per_category}")
        self.initial_weight = initial_weight
        self.max_per_category = max_per_category
        self.insights: dict[int, Insight] = {}
        self.next_id = 1

    def __len__(self) -> int:
        return len(self.insights)

    def __contains__(self, insight_id: int) -> bool:
        return insight_id in self.insights

    def __getitem__(self, insight_id: int) -> Insight:
        return self.insights[insight_id]

    def for_category(self, category: str) -> list[Insight]:
        """Insights of one category, heaviest first (ties: smaller id first)."""
        found = [i for i in self.insights.values() if i.category == category]
        return sorted(found, key=lambda i: (-i.weight, i.id))

    def sizes(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for ins in self.insights.values():
            out[ins.category] = out.get(ins.category, 0) + 1
        return dict(sorted(out.items()))

    def snapshot(self) -> list[tuple[int, str, str, int]]:
        return [(i.id, i.category, i.text, i.weight) for i in sorted(self.insights.values(), key=lambda i: i.id)]

    def apply(self, op: InsightOp, category: str) -> ChangeReport:
        return apply_op(self, op, category)


def apply_op(pool: InsightPool, op: InsightOp, category: str) -> ChangeReport:
    """Apply one op on behalf of ``category``.

    Ops naming an id that is absent, or that belongs to another category,
    are skipped with a warning; LLMs do hallucinate ids.
    """
    report = ChangeReport()
    if op.kind == "ADD":
        if not op.text:
            report.warnings.append("ADD with empty text skipped")
            return report
        ins = Insight(pool.next_id, category, op.text, pool.initial_weight)
        pool.insights[ins.id] = ins
        pool.next_id += 1
        report.added.append(ins.id)
        _enforce_cap(pool, category, report)
        return report

    if op.kind not in OP_KINDS:
        report.warnings.append(f"unknown op {op.kind!r} skipped")
        return report
    target = pool.insights.get(op.insight_id)
    if target is None or target.category != category:
        msg = f"{op.kind} {op.insight_id}: no such insight in category {category!r}"
        log.warning(msg)
        report.warnings.append(msg)
        return report

    if op.kind == "EDIT":
        if not op.text:
            report.warnings.append(f"EDIT {op.insight_id} with empty text skipped")
            return report
        target.text = op.text
        report.edited.append(target.id)
    elif op.kind == "UPVOTE":
        target.weight += 1
        report.upvoted.append(target.id)
    else:
        target.weight -= 1
        report.downvoted.append(target.id)
        if target.weight <= 0:
            del pool.insights[target.id]
            report.removed.append(target.id)
    return report


def _enforce_cap(pool: InsightPool, category: str, report: ChangeReport) -> None:
    members = [i for i in pool.insights.values() if i.category == category]
    while len(members) > pool.max_per_category:
        # lowest weight goes first; among equals, the newest (largest id)
        victim = min(members, key=lambda i: (i.weight, -i.id))
        del pool.insights[victim.id]
        members.remove(victim)
        report.removed.append(victim.id)


_OP_RE = re.compile(r"^(ADD|EDIT|UPVOTE|DOWNVOTE)\b:?\s*(.*)$", re.IGNORECASE)
_BULLET_RE = re.compile(r"^(?:[-*]\s+|\d+[.)]\s+)")
_ID_RE = re.compile(r"^(\d+)\s*[.,;]?$")
_EDIT_RE = re.compile(r"^(\d+)[:.,]?\s+(\S.*)$")


def parse_insight_ops(llm_text: str) -> tuple[list[InsightOp], list[str]]:
    """Parse LLM output into ops. Returns (ops, warnings); never raises."""
    ops: list[InsightOp] = []
    warnings: list[str] = []
    for n, raw in enumerate(llm_text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        line = _BULLET_RE.sub("", line, count=1)
        m = _OP_RE.match(line)
        op = None
        if m:
            kind, rest = m.group(1).upper(), m.group(2).strip()
            if kind == "ADD":
                op = InsightOp.add(rest) if rest else None
            elif kind == "EDIT":
                em = _EDIT_RE.match(rest)
                op = InsightOp.edit(int(em.group(1)), em.group(2).strip()) if em else None
            else:
                im = _ID_RE.match(rest)
                op = InsightOp(kind, int(im.group(1))) if im else None
        if op is None:
            warnings.append(f"line {n}: unparseable insight op {raw.strip()!r}")
        else:
            ops.append(op)
    return ops, warnings


def _successes(records: Iterable[MemoryRecord]) -> list[MemoryRecord]:
    return sorted((r for r in records if r.kind in SUCCESS_KINDS), key=lambda r: r.id)


def build_intra_pairs(
    records: Sequence[MemoryRecord],
    L: int = 3,
    max_pairs: int = 8,
    seed: int = 0,
) -> list[ContrastPair]:
    """Pair each failure of a category with a length-L success segment.

    ``records`` is one category's view of memory. Seed exemplars count as
    successes. Failures are visited in id order; for each, a success record
    and then a segment start are drawn from ``random.Random(seed)``.
    """
    if L < 1:
        raise UsageError(f"segment length must be >= 1, got {L}")
    successes = _successes(records)
    failures = sorted((r for r in records if r.kind == "failure"), key=lambda r: r.id)
    if not successes or not failures or max_pairs <= 0:
        return []
    rng = random.Random(seed)
    pairs = []
    for fail in failures[:max_pairs]:
        src = successes[rng.randrange(len(successes))]
        _, traj = parse_trajectory(src.content)
        seg_len = min(L, len(traj.steps))
        start = rng.randrange(len(traj.steps) - seg_len + 1)
        _, fail_traj = parse_trajectory(fail.content)
        pairs.append(ContrastPair(
            category=fail.category,
            success_segment=traj.steps[start:start + seg_len],
            failure_trajectory=fail_traj,
            failure_reflections=fail.reflections or "",
            success_id=src.id,
            failure_id=fail.id,
            segment_start=start,
        ))
    return pairs


def build_cross_groups(
    records: Sequence[MemoryRecord],
    category: str,
    categories: Sequence[str],
    max_groups: int = 4,
    seed: int = 0,
) -> list[CrossGroup]:
    """Pair successes of ``category`` with successes of other categories.

    Partner categories rotate round-robin in ``categories`` order, skipping
    those without successes. Which trajectories are used is drawn from
    ``random.Random(seed)``.
    """
    if max_groups <= 0:
        return []
    by_cat: dict[str, list[MemoryRecord]] = {}
    for rec in _successes(records):
        by_cat.setdefault(rec.category, []).append(rec)
    own = by_cat.get(category, [])
    partners = [c for c in categories if c != category and by_cat.get(c)]
    if not own or not partners:
        return []
    rng = random.Random(seed)
    groups = []
    for i in range(max_groups):
        other = partners[i % len(partners)]
        mine = own[rng.randrange(len(own))]
        theirs = by_cat[other][rng.randrange(len(by_cat[other]))]
        groups.append(CrossGroup(
            category=category,
            own_success=parse_trajectory(mine.content)[1],
            other_category=other,
            other_success=parse_trajectory(theirs.content)[1],
        ))
    return groups


def render_pool(insights: Sequence[Insight]) -> str:
    if not insights:
        return "(no insights)"
    return "\n".join(f"[id={i.id} weight={i.weight}] {i.text}" for i in insights)


def render_pairs(pairs: Sequence[ContrastPair]) -> str:
    if not pairs:
        return "(none)"
    blocks = []
    for n, p in enumerate(pairs, 1):
        lines = [f"Pair {n}:", "Successful segment:"]
        lines += ["  " + s for s in render_steps(p.success_segment, p.segment_start + 1)]
        lines.append("Failed trajectory:")
        lines += ["  " + s for s in p.failure_trajectory.render().splitlines()]
        lines.append("Reflections:")
        lines += ["  " + s for s in p.failure_reflections.splitlines()]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def render_groups(groups: Sequence[CrossGroup]) -> str:
    if not groups:
        return "(none)"
    blocks = []
    for n, g in enumerate(groups, 1):
        lines = [f"Group {n}: {g.category} vs {g.other_category}", f"{g.category} success:"]
        lines += ["  " + s for s in g.own_success.render().splitlines()]
        lines.append(f"{g.other_category} success:")
        lines += ["  " + s for s in g.other_success.render().splitlines()]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def generate_insights(
    category: str,
    pairs: Sequence[ContrastPair],
    groups: Sequence[CrossGroup],
    pool: InsightPool,
    llm: CompletionBackend,
    rounds: int = 2,
    template: Optional[str] = None,
    max_tokens: int = 512,
    temperature: float = 0.0,
) -> ChangeReport:
    """Run ``rounds`` prompt/parse/apply cycles for one category, mutating ``pool``.

    Round r sees the pairs and groups whose index is congruent to r modulo
    ``rounds``, so every item is shown once across the run.
    """
    if rounds < 1:
        raise UsageError(f"rounds must be >= 1, got {rounds}")
    if template is None:
        from ehc.prompts import default_template

        template = default_template("insight")
    total = ChangeReport()
    for r in range(rounds):
        prompt = render(template, {
            "category": category,
            "insights": render_pool(pool.for_category(category)),
            "pairs": render_pairs(pairs[r::rounds]),
            "groups": render_groups(groups[r::rounds]),
        }, INSIGHT_SLOTS)
        try:
            reply = llm.complete(prompt, max_tokens, temperature)
        except BackendError as exc:
            raise type(exc)(f"insight round {r}: {exc}", exc.status, exc.body) from exc
        ops, warnings = parse_insight_ops(reply)
        total.warnings.extend(warnings)
        for op in ops:
            total.merge(apply_op(pool, op, category))
    return total
