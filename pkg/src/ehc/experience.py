"""Experience collection and classification.

``run_task`` gives the agent up to T attempts at a task. Each failed attempt
appends one LLM reflection to the running reflection text, which is fed
into the next attempt. The final outcome is labeled by the LLM, mapped onto
the fixed category set by embedding similarity, and stored in memory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

from ehc.embedding import Embedder, HashEmbedder, cosine_sim
from ehc.errors import BackendError, ConfigError, UsageError
from ehc.llm import CompletionBackend
from ehc.memory import HierarchicalMemory, MemoryRecord, RetrievalResult
from ehc.prompts import (
    LABEL_SLOTS,
    REFLECTION_SLOTS,
    TRAJECTORY_SLOTS,
    Templates,
    render,
)
from ehc.toy import Executor, ToyExecutor, to_trajectory
from ehc.trajectory import Step, Trajectory

log = logging.getLogger(__name__)

DEFAULT_CATEGORIES = (
    "judgment",
    "counting",
    "recognition",
    "comparison",
    "addition",
    "removal",
    "replacement",
)


@dataclass(frozen=True)
class Task:
    """A task instance.

    ``category`` is the generator's ground-truth category, kept only for
    per-category reporting; the agent never reads it.
    """

    id: str
    content: str
    payload: Any = None
    truth: Optional[str] = None
    category: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.content:
            raise UsageError(f"task {self.id}: content must be non-empty")


@dataclass
class Experience:
    task_id: str
    category: str
    trajectory: Trajectory
    reflections: str
    outcome: str
    attempts_used: int
    record_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.outcome not in ("success", "failure"):
            raise UsageError(f"outcome must be success or failure, got {self.outcome!r}")
        if self.outcome == "success" and self.reflections:
            raise UsageError("a success experience carries no reflections")


class CategorySet:
    """Ordered, distinct category labels with their embeddings precomputed."""

    def __init__(self, labels: Sequence[str] = DEFAULT_CATEGORIES, embedder: Optional[Embedder] = None):
        labels = tuple(labels)
        if len(labels) < 2:
            raise ConfigError("a category set needs at least two labels")
        if len(set(labels)) != len(labels):
            raise ConfigError(f"category labels must be distinct: {labels}")
        self.labels = labels
        self.embedder = embedder or HashEmbedder()
        self.embeddings = tuple(self.embedder.embed(label) for label in labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class Classification:
    category: str
    index: int
    scores: tuple[float, ...]
    degenerate: bool


def classify_detailed(candidate_label: str, categories: CategorySet) -> Classification:
    vec = categories.embedder.embed(candidate_label)
    scores = tuple(cosine_sim(vec, c) for c in categories.embeddings)
    degenerate = not any(vec)
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return Classification(categories.labels[best], best, scores, degenerate)


def classify(candidate_label: str, categories: CategorySet) -> str:
    """Map a free-form label onto the closest category (ties: lowest index)."""
    result = classify_detailed(candidate_label, categories)
    if result.degenerate:
        log.warning("candidate label %r has no tokens; defaulting to %r", candidate_label, result.category)
    return result.category


_QUOTES = "\"'`"


def extract_label(completion: str) -> str:
    for line in completion.splitlines():
        line = line.strip()
        if line:
            break
    else:
        return ""
    while len(line) >= 2 and line[0] in _QUOTES and line[-1] == line[0]:
        line = line[1:-1].strip()
    return line.strip(_QUOTES).strip()


def label_candidate(
    task_content: str,
    llm: CompletionBackend,
    categories: Optional[CategorySet] = None,
    template: Optional[str] = None,
    max_tokens: int = 32,
    temperature: float = 0.0,
) -> str:
    if template is None:
        from ehc.prompts import default_template

        template = default_template("label")
    labels = categories.labels if categories is not None else DEFAULT_CATEGORIES
    prompt = render(template, {"task": task_content, "categories": ", ".join(labels)}, LABEL_SLOTS)
    return extract_label(llm.complete(prompt, max_tokens, temperature))


@dataclass
class Agent:
    """Collaborators shared by collection and inference."""

    categories: CategorySet = field(default_factory=CategorySet)
    executor: Executor = field(default_factory=ToyExecutor)
    templates: Templates = field(default_factory=Templates.load)
    k: int = 3
    theta: float = 0.7
    max_tokens: int = 512
    temperature: float = 0.0

    @property
    def embedder(self) -> Embedder:
        return self.categories.embedder


@dataclass
class RunTrace:
    """Ordered log of pipeline events; each event is a plain dict."""

    events: list[dict] = field(default_factory=list)

    def add(self, stage: str, **data: Any) -> None:
        self.events.append({"stage": stage, **data})

    def of(self, stage: str) -> list[dict]:
        return [e for e in self.events if e["stage"] == stage]


def render_history(result: RetrievalResult) -> str:
    if not result.entries:
        return "(no examples)"
    blocks = []
    for n, entry in enumerate(result.entries, 1):
        rec = entry.record
        block = f"Example {n} ({rec.category}, {rec.kind}):\n{rec.content}"
        if rec.reflections:
            block += f"\nReflections: {rec.reflections}"
        blocks.append(block)
    return "\n\n".join(blocks)


def _one_line(text: str) -> str:
    return " ".join(text.split())


def run_task(
    task: Task,
    memory: HierarchicalMemory,
    llm: CompletionBackend,
    evaluator,
    T: int = 3,
    *,
    agent: Optional[Agent] = None,
    trace: Optional[RunTrace] = None,
    store: bool = True,
) -> Experience:
    """Collect one experience for ``task`` and store it in ``memory``.

    Reflections are flattened to one line each and joined with newlines, so
    after t failures the reflection text has exactly t lines.
    """
    if T < 1:
        raise UsageError(f"T must be >= 1, got {T}")
    agent = agent or Agent()
    trace = trace if trace is not None else RunTrace()
    tpl = agent.templates
    query = agent.embedder.embed(task.content)
    reflections: list[str] = []
    category: Optional[str] = None
    trajectory: Optional[Trajectory] = None
    success = False
    attempts = 0

    for t in range(T):
        attempts = t + 1
        history = render_history(memory.retrieve(query, category, agent.k, agent.theta))
        prompt = render(tpl.trajectory, {
            "task": task.content,
            "history": history,
            "reflections": "\n".join(reflections) or "(none)",
        }, TRAJECTORY_SLOTS)
        try:
            program = llm.complete(prompt, agent.max_tokens, agent.temperature)
        except BackendError as exc:
            raise type(exc)(f"task {task.id} attempt {t}: {exc}", exc.status, exc.body) from exc
        trajectory = to_trajectory(agent.executor.run(program, task.payload))
        verdict = evaluator.judge(task, trajectory)
        success = verdict.success
        trace.add("attempt", attempt=t, category_filter=category, program=program,
                  answer=trajectory.final_answer, success=success, feedback=verdict.feedback)

        if category is None:
            label = label_candidate(task.content, llm, agent.categories, tpl.label)
            category = classify(label, agent.categories)
            trace.add("label", attempt=t, candidate=label, category=category)

        if success:
            break
        reflect_prompt = render(tpl.reflection, {
            "task": task.content,
            "history": history,
            "trajectory": trajectory.render(task.content) + f"\nFeedback: {verdict.feedback}",
            "reflections": "\n".join(reflections) or "(none)",
        }, REFLECTION_SLOTS)
        try:
            reflection = llm.complete(reflect_prompt, agent.max_tokens, agent.temperature)
        except BackendError as exc:
            raise type(exc)(f"task {task.id} reflection {t}: {exc}", exc.status, exc.body) from exc
        reflections.append(_one_line(reflection) or "(empty reflection)")
        trace.add("reflection", attempt=t, segment=reflections[-1], reflections="\n".join(reflections))

    exp = Experience(
        task_id=task.id,
        category=category,
        trajectory=trajectory,
        reflections="" if success else "\n".join(reflections),
        outcome="success" if success else "failure",
        attempts_used=attempts,
    )
    if store:
        rec = MemoryRecord(
            id=memory.next_id(),
            category=exp.category,
            kind=exp.outcome,
            content=exp.trajectory.render(task.content),
            embedding=query,
            reflections=exp.reflections or None,
            task_id=task.id,
        )
        memory.store(rec)
        exp.record_id = rec.id
        trace.add("store", record_id=rec.id, kind=rec.kind, category=rec.category)
    return exp


# -- seeding --------------------------------------------------------------


@dataclass(frozen=True)
class SeedExample:
    category: str
    task: str
    program: tuple[str, ...]
    answer: str

    def trajectory(self) -> Trajectory:
        return Trajectory(tuple(Step("", op, "") for op in self.program), self.answer)


def default_corpus_path() -> Path:
    return Path(str(resources.files("ehc").joinpath("data", "seed_corpus.tsv")))


def read_corpus(path: Optional[str | Path] = None) -> list[SeedExample]:
    """Parse a seed corpus: ``category<TAB>task<TAB>op ; op ; ...<TAB>answer`` per line."""
    path = Path(path) if path else default_corpus_path()
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read seed corpus {path}: {exc}") from exc
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 4:
            raise ConfigError(f"{path}:{n}: expected 4 tab-separated fields, got {len(parts)}")
        cat, task, program, answer = (p.strip() for p in parts)
        ops = tuple(op.strip() for op in program.split(";") if op.strip())
        if not cat or not task or not ops:
            raise ConfigError(f"{path}:{n}: empty category, task or program")
        out.append(SeedExample(cat, task, ops, answer))
    return out


def seed_memory(
    memory: HierarchicalMemory,
    categories: CategorySet,
    examples_per_category: int = 5,
    corpus_path: Optional[str | Path] = None,
) -> int:
    """Store the first ``examples_per_category`` corpus exemplars of each category."""
    if examples_per_category < 0:
        raise ConfigError("examples_per_category must be >= 0")
    if examples_per_category == 0:
        return 0
    by_cat: dict[str, list[SeedExample]] = {}
    for ex in read_corpus(corpus_path):
        by_cat.setdefault(ex.category, []).append(ex)
    for cat in categories:
        have = len(by_cat.get(cat, []))
        if have < examples_per_category:
            raise ConfigError(
                f"seed corpus has {have} examples for category {cat!r}, need {examples_per_category}"
            )
    count = 0
    for cat in categories:
        for ex in by_cat[cat][:examples_per_category]:
            memory.store(MemoryRecord(
                id=memory.next_id(),
                category=cat,
                kind="seed",
                content=ex.trajectory().render(ex.task),
                embedding=categories.embedder.embed(ex.task),
            ))
            count += 1
    return count
