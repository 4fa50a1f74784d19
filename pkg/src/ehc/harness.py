"""Synthetic task suites, benchmark runs and store inspection."""

from __future__ import annotations

import io
import json
import logging
import random
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, TextIO

from ehc.config import BenchmarkConfig
from ehc.embedding import make_embedder
from ehc.errors import ConfigError
from ehc.experience import DEFAULT_CATEGORIES, Agent, CategorySet, RunTrace, Task, run_task, seed_memory
from ehc.inference import solve
from ehc.insights import InsightPool, build_cross_groups, build_intra_pairs, generate_insights
from ehc.llm import EndpointConfig, HttpBackend, ScriptedBackend
from ehc.memory import HierarchicalMemory
from ehc.prompts import Templates
from ehc.store import load_store, save_store
from ehc.toy import VALUES, ToyEvaluator, ToyExecutor, render_scene

log = logging.getLogger(__name__)


# -- suite generation -----------------------------------------------------


def _random_object(rng: random.Random) -> dict:
    return {a: rng.choice(VALUES[a]) for a in ("size", "color", "shape")}


def _random_scene(rng: random.Random, lo: int = 4, hi: int = 7) -> list[dict]:
    return [_random_object(rng) for _ in range(rng.randint(lo, hi))]


def _judgment(rng):
    scene = _random_scene(rng)
    color, shape = rng.choice(VALUES["color"]), rng.choice(VALUES["shape"])
    found = any(o["color"] == color and o["shape"] == shape for o in scene)
    return f"Is there a {color} {shape}?", scene, "yes" if found else "no"


def _counting(rng):
    scene = _random_scene(rng)
    color = rng.choice(VALUES["color"])
    n = sum(1 for o in scene if o["color"] == color)
    return f"How many {color} objects are there?", scene, str(n)


def _recognition(rng):
    while True:
        scene = _random_scene(rng)
        keys = [(o["size"], o["shape"]) for o in scene]
        unique = [o for o, key in zip(scene, keys) if keys.count(key) == 1]
        if unique:
            target = rng.choice(unique)
            return f"What color is the {target['size']} {target['shape']}?", scene, target["color"]


def _comparison(rng, fewer: bool):
    while True:
        scene = _random_scene(rng)
        a, b = rng.sample(VALUES["color"], 2)
        na = sum(1 for o in scene if o["color"] == a)
        nb = sum(1 for o in scene if o["color"] == b)
        if na == nb:
            continue
        word = "fewer" if fewer else "more"
        truth = (na < nb) if fewer else (na > nb)
        return f"Are there {word} {a} objects than {b} objects?", scene, "yes" if truth else "no"


def _addition(rng):
    scene = _random_scene(rng)
    new = _random_object(rng)
    text = f"Add a {new['size']} {new['color']} {new['shape']} to the scene."
    return text, scene, render_scene(scene + [new])


def _removal(rng):
    while True:
        scene = _random_scene(rng)
        color = rng.choice(VALUES["color"])
        keep = [o for o in scene if o["color"] != color]
        if keep and len(keep) < len(scene):
            return f"Remove every {color} object.", scene, render_scene(keep)


def _replacement(rng):
    while True:
        scene = _random_scene(rng)
        shape, color = rng.choice(VALUES["shape"]), rng.choice(VALUES["color"])
        targets = [o for o in scene if o["shape"] == shape]
        others = [o for o in scene if o["shape"] != shape]
        if not targets or not any(o["color"] != color for o in targets):
            continue
        # a program that recolors everything must give a different answer
        if not any(o["color"] != color for o in others):
            continue
        after = [dict(o, color=color) if o["shape"] == shape else dict(o) for o in scene]
        return f"Make every {shape} {color}.", scene, render_scene(after)


def generate_suite(seed: int, tasks_per_category: int) -> list[Task]:
    """Deterministic toy tasks, ``tasks_per_category`` for each of the seven categories."""
    if tasks_per_category < 1:
        raise ConfigError(f"tasks_per_category must be >= 1, got {tasks_per_category}")
    rng = random.Random(seed)
    makers = {
        "judgment": lambda i: _judgment(rng),
        "counting": lambda i: _counting(rng),
        "recognition": lambda i: _recognition(rng),
        "comparison": lambda i: _comparison(rng, fewer=bool(i % 2)),
        "addition": lambda i: _addition(rng),
        "removal": lambda i: _removal(rng),
        "replacement": lambda i: _replacement(rng),
    }
    tasks = []
    for cat in DEFAULT_CATEGORIES:
        for i in range(tasks_per_category):
            content, scene, truth = makers[cat](i)
            tasks.append(Task(f"{cat}-{i:03d}", content, {"objects": scene}, truth, cat))
    return tasks


def task_to_json(task: Task) -> str:
    return json.dumps({
        "id": task.id,
        "category": task.category,
        "content": task.content,
        "payload": task.payload,
        "truth": task.truth,
    }, sort_keys=True, separators=(",", ":"))


def split_suite(tasks: list[Task], seed: int) -> tuple[list[Task], list[Task]]:
    """Per-category 50/50 train/test split by seeded shuffle (train gets the extra task)."""
    by_cat: dict[str, list[Task]] = {}
    for t in tasks:
        by_cat.setdefault(t.category or "", []).append(t)
    rng = random.Random(seed)
    train, test = [], []
    for group in by_cat.values():
        group = list(group)
        rng.shuffle(group)
        cut = (len(group) + 1) // 2
        train += group[:cut]
        test += group[cut:]
    return train, test


# -- benchmark ------------------------------------------------------------


@dataclass
class MetricsReport:
    mode: str
    seed: int
    per_category: dict[str, tuple[int, int]]
    pool_stats: dict[str, int]
    insight_sizes: dict[str, int]
    collection: dict[str, int] = field(default_factory=dict)
    duration_s: float = 0.0

    @property
    def correct(self) -> int:
        return sum(c for c, _ in self.per_category.values())

    @property
    def total(self) -> int:
        return sum(n for _, n in self.per_category.values())

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def category_accuracy(self, category: str) -> float:
        c, n = self.per_category[category]
        return c / n if n else 0.0

    def to_lines(self) -> list[str]:
        """Report file lines. Wall-clock duration is left out so files are reproducible."""
        lines = [
            f"mode={self.mode}",
            f"seed={self.seed}",
            f"tasks_total={self.total}",
            f"correct={self.correct}",
            f"accuracy={self.accuracy!r}",
        ]
        for cat, (c, n) in self.per_category.items():
            acc = c / n if n else 0.0
            lines.append(f"category.{cat}.correct={c}")
            lines.append(f"category.{cat}.total={n}")
            lines.append(f"category.{cat}.accuracy={acc!r}")
        lines += [f"pool.{k}={v}" for k, v in self.pool_stats.items()]
        lines += [f"collection.{k}={v}" for k, v in self.collection.items()]
        lines += [f"insights.{k}={v}" for k, v in self.insight_sizes.items()]
        return lines

    def render(self) -> str:
        return "".join(line + "\n" for line in self.to_lines())


def make_backend(cfg: BenchmarkConfig, trace: bool = False):
    if cfg.llm_backend == "scripted":
        path = cfg.llm_script_path or str(resources.files("ehc").joinpath("data", "demo_script.json"))
        return ScriptedBackend.from_file(path)
    return HttpBackend(
        EndpointConfig(
            endpoint=cfg.llm_endpoint,
            model=cfg.llm_model,
            retries=cfg.llm_retries,
            backoff=cfg.llm_backoff,
            timeout=cfg.llm_timeout,
            trace=trace,
        ),
        max_tokens=cfg.llm_max_tokens,
        temperature=cfg.llm_temperature,
    )


def make_agent(cfg: BenchmarkConfig) -> Agent:
    embedder = make_embedder(
        cfg.embedder, cfg.embedder_dim,
        **({"endpoint": cfg.embedder_endpoint, "model": cfg.embedder_model} if cfg.embedder == "external" else {}),
    )
    return Agent(
        categories=CategorySet(cfg.categories, embedder),
        executor=ToyExecutor(),
        templates=Templates.load(cfg.templates),
        k=cfg.k,
        theta=cfg.theta,
        max_tokens=cfg.llm_max_tokens,
        temperature=cfg.llm_temperature,
    )


def run_benchmark(
    cfg: BenchmarkConfig,
    llm=None,
    out: Optional[TextIO] = None,
    report_path: Optional[str | Path] = None,
    trace: Optional[RunTrace] = None,
) -> MetricsReport:
    """Run one ablation mode end to end.

    baseline: solve every test task with empty memory and no insights.
    hmr: seed memory, collect experiences on the training split, then solve.
    hmr_toel: as hmr, plus insight generation per category before solving.
    """
    started = time.perf_counter()
    agent = make_agent(cfg)
    llm = llm or make_backend(cfg)
    evaluator = ToyEvaluator()
    trace = trace if trace is not None else RunTrace()

    tasks = generate_suite(cfg.seed, cfg.tasks_per_category)
    train, test = split_suite(tasks, cfg.seed)
    memory = HierarchicalMemory(capacity=cfg.capacity, dim=agent.embedder.dim,
                                deep_theta_gate=cfg.deep_theta_gate)
    pool = InsightPool(cfg.W0, cfg.insight_max_per_category)
    collection = {}

    if cfg.mode in ("hmr", "hmr_toel"):
        seeded = seed_memory(memory, agent.categories, cfg.examples_per_category, cfg.seed_corpus or None)
        outcomes = {"success": 0, "failure": 0}
        for task in train:
            exp = run_task(task, memory, llm, evaluator, cfg.T, agent=agent, trace=trace)
            outcomes[exp.outcome] += 1
        collection = {"seeded": seeded, "successes": outcomes["success"], "failures": outcomes["failure"]}

    if cfg.mode == "hmr_toel":
        everything = memory.records()
        for idx, cat in enumerate(agent.categories.labels):
            pairs = build_intra_pairs(memory.records(cat), cfg.L, cfg.max_pairs, seed=cfg.seed + idx)
            groups = build_cross_groups(everything, cat, agent.categories.labels, cfg.max_groups,
                                        seed=cfg.seed + idx)
            rep = generate_insights(cat, pairs, groups, pool, llm, cfg.rounds, agent.templates.insight,
                                    cfg.llm_max_tokens, cfg.llm_temperature)
            trace.add("insights", category=cat, pairs=len(pairs), groups=len(groups),
                      added=rep.added, removed=rep.removed, warnings=rep.warnings)

    per_category = {cat: [0, 0] for cat in DEFAULT_CATEGORIES}
    stored_tasks = {r.task_id for r in memory.records() if r.task_id is not None}
    for task in test:
        if task.id in stored_tasks:
            raise RuntimeError(f"test task {task.id} leaked into memory before being solved")
        answer = solve(task, memory, agent.categories, pool if cfg.mode == "hmr_toel" else None,
                       llm, agent=agent, trace=trace)
        per_category[task.category][1] += 1
        per_category[task.category][0] += int(bool(answer.verdict))
        trace.add("solved", task_id=task.id, category=answer.category, result=answer.result,
                  correct=bool(answer.verdict))

    report = MetricsReport(
        mode=cfg.mode,
        seed=cfg.seed,
        per_category={c: (v[0], v[1]) for c, v in per_category.items()},
        pool_stats=memory.stats().as_dict(),
        insight_sizes=pool.sizes(),
        collection=collection,
        duration_s=time.perf_counter() - started,
    )
    target = report_path if report_path is not None else cfg.report_path
    if target:
        Path(str(target).replace("{mode}", cfg.mode)).write_text(report.render(), encoding="utf-8")
    if cfg.store_path:
        save_store(cfg.store_path.replace("{mode}", cfg.mode), memory, pool)
    if out is not None:
        out.write(report.render())
        out.write(f"duration_s={report.duration_s:.3f}\n")
    return report


# -- inspection -----------------------------------------------------------


def inspect_memory(
    store_path: str | Path,
    query: Optional[str] = None,
    k: int = 5,
    category: Optional[str] = None,
    theta: float = 0.7,
    embedder=None,
    out: Optional[TextIO] = None,
) -> str:
    """Tally a store file, or dry-run a retrieval against it. Never mutates the file."""
    memory, pool = load_store(store_path)
    buf = io.StringIO()
    if query is None:
        recs = memory.records()
        stats = memory.stats()
        buf.write(f"records={len(recs)}\n")
        buf.write(f"fast={stats.fast_count} deep={stats.deep_count} capacity={memory.capacity}\n")
        kinds: dict[str, int] = {}
        cats: dict[tuple[str, str], int] = {}
        for r in recs:
            kinds[r.kind] = kinds.get(r.kind, 0) + 1
            key = (r.category, memory.tier_of(r.id))
            cats[key] = cats.get(key, 0) + 1
        for kind in sorted(kinds):
            buf.write(f"kind.{kind}={kinds[kind]}\n")
        for (cat, tier), n in sorted(cats.items()):
            buf.write(f"category.{cat}.{tier}={n}\n")
        if pool is not None:
            for cat, n in pool.sizes().items():
                buf.write(f"insights.{cat}={n}\n")
    else:
        embedder = embedder or make_embedder("reference", memory.dim)
        result = memory.search(embedder.embed(query), category, k, theta)
        buf.write(f"query={query!r} k={k} theta={theta}\n")
        for n, e in enumerate(result.entries, 1):
            first = e.record.content.splitlines()[0] if e.record.content else ""
            buf.write(f"{n}. id={e.record.id} sim={e.similarity:.6f} tier={e.tier} "
                      f"category={e.record.category} kind={e.record.kind} | {first}\n")
        if not result.entries:
            buf.write("(no matches)\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
