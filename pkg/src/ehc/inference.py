"""Category-conditioned inference: label, classify, retrieve, prompt, generate, execute."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ehc.errors import BackendError
from ehc.experience import Agent, RunTrace, Task, classify, label_candidate
from ehc.insights import Insight, InsightPool
from ehc.llm import CompletionBackend
from ehc.memory import HierarchicalMemory, MemoryRecord
from ehc.prompts import INFERENCE_SLOTS, check_template, render


@dataclass
class PromptBundle:
    category: Optional[str]
    insights: list[Insight]
    exemplars: list[MemoryRecord]
    template: str
    rendered: str


@dataclass
class Answer:
    program: str
    result: str
    verdict: Optional[bool] = None
    category: Optional[str] = None
    diagnostic: str = ""


def render_insights(insights: Sequence[Insight]) -> str:
    if not insights:
        return "(no insights)"
    return "\n".join(f"{n}. {ins.text}" for n, ins in enumerate(insights, 1))


def render_exemplars(exemplars: Sequence[MemoryRecord]) -> str:
    if not exemplars:
        return "(no examples)"
    return "\n\n".join(f"Example {n}:\n{rec.content}" for n, rec in enumerate(exemplars, 1))


def assemble_prompt(
    task: Task,
    insights: Sequence[Insight],
    exemplars: Sequence[MemoryRecord],
    template: str,
    category: Optional[str] = None,
) -> PromptBundle:
    """Render the inference prompt.

    Insights are re-sorted heaviest first; exemplars keep the order given,
    which callers pass as retrieval order (similarity descending).
    """
    check_template(template, INFERENCE_SLOTS, "inference template")
    ordered = sorted(insights, key=lambda i: (-i.weight, i.id))
    rendered = render(template, {
        "task": task.content,
        "insights": render_insights(ordered),
        "exemplars": render_exemplars(exemplars),
    })
    return PromptBundle(category, list(ordered), list(exemplars), template, rendered)


def solve(
    task: Task,
    memory: HierarchicalMemory,
    categories=None,
    insight_pool: Optional[InsightPool] = None,
    llm: Optional[CompletionBackend] = None,
    executor=None,
    k: Optional[int] = None,
    theta: Optional[float] = None,
    *,
    agent: Optional[Agent] = None,
    trace: Optional[RunTrace] = None,
) -> Answer:
    """One-shot inference for ``task``: exactly one labeling and one program call."""
    if llm is None:
        raise TypeError("solve() needs an llm backend")
    agent = agent or Agent()
    categories = categories or agent.categories
    executor = executor or agent.executor
    k = agent.k if k is None else k
    theta = agent.theta if theta is None else theta
    trace = trace if trace is not None else RunTrace()

    label = label_candidate(task.content, llm, categories, agent.templates.label)
    category = classify(label, categories)
    trace.add("label", candidate=label, category=category)

    query = categories.embedder.embed(task.content)
    hits = memory.retrieve(query, category, k, theta)
    trace.add("retrieve", category=category, hits=hits.summary())

    insights = insight_pool.for_category(category) if insight_pool is not None else []
    bundle = assemble_prompt(task, insights, hits.records, agent.templates.inference, category)
    trace.add("prompt", rendered=bundle.rendered)

    try:
        program = llm.complete(bundle.rendered, agent.max_tokens, agent.temperature)
    except BackendError as exc:
        raise type(exc)(f"task {task.id}: {exc}", exc.status, exc.body) from exc
    trace.add("program", program=program)

    res = executor.run(program, task.payload)
    trace.add("execute", ok=res.ok, result=res.result, diagnostic=res.diagnostic)
    verdict = None
    if task.truth is not None:
        from ehc.toy import normalize_answer

        verdict = res.ok and normalize_answer(res.result) == normalize_answer(task.truth)
    return Answer(program=program, result=res.result, verdict=verdict, category=category,
                  diagnostic=res.diagnostic)
