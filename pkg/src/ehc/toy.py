"""Symbolic scene domain used for end-to-end runs without a vision stack.

A scene is ``{"objects": [{"size": ..., "color": ..., "shape": ...}, ...]}``.
Programs are one op per line; blank lines, code fences and ``#`` comments
are skipped (a comment becomes the thought of the next step)::

    FILTER attr=value          narrow the current selection
    COUNT                      number of selected objects
    EXISTS                     "yes" if the selection is non-empty
    COMPARE attr=a attr=b      "yes" if the selection holds more a than b
    QUERY attr                 attribute of the first selected object
    ADD attr=value ...         add an object (size, color and shape required)
    REMOVE                     delete the selected objects from the scene
    REPLACE attr=value         set an attribute on the selected objects

Edits reset the selection to the whole scene. The answer is the output of
the last query op, or the rendered scene if an edit came after it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Protocol

from ehc.trajectory import Step, Trajectory

ATTRIBUTES = ("size", "color", "shape")
VALUES = {
    "size": ("small", "large"),
    "color": ("red", "blue", "green", "yellow"),
    "shape": ("cube", "sphere", "cylinder"),
}


class ProgramError(Exception):
    pass


@dataclass
class ExecResult:
    result: str
    ok: bool
    diagnostic: str = ""
    steps: list[Step] = field(default_factory=list)


class Executor(Protocol):
    def run(self, program: str, payload: Any) -> ExecResult: ...


@dataclass(frozen=True)
class Verdict:
    success: bool
    feedback: str = ""


def describe(obj: dict) -> str:
    return " ".join(obj[a] for a in ATTRIBUTES)


def render_scene(objects: list[dict]) -> str:
    if not objects:
        return "(empty)"
    return ", ".join(sorted(describe(o) for o in objects))


def normalize_answer(text: str) -> str:
    return " ".join(text.strip().lower().split())


def _pair(arg: str) -> tuple[str, str]:
    attr, sep, value = arg.partition("=")
    attr, value = attr.strip().lower(), value.strip().lower()
    if not sep or attr not in ATTRIBUTES or not value:
        raise ProgramError(f"expected attr=value with attr in {ATTRIBUTES}, got {arg!r}")
    return attr, value


class ToyExecutor:
    def run(self, program: str, payload: Any) -> ExecResult:
        scene = [dict(o) for o in (payload or {}).get("objects", [])]
        selection = list(range(len(scene)))
        answer: Optional[str] = None
        steps: list[Step] = []
        thought = ""
        for raw in program.splitlines():
            line = raw.strip()
            if not line or line.startswith("```"):
                continue
            if line.startswith("#"):
                thought = line.lstrip("#").strip()
                continue
            op, *args = line.split()
            op = op.upper()
            try:
                if op == "FILTER":
                    if len(args) != 1:
                        raise ProgramError("FILTER takes one attr=value argument")
                    attr, value = _pair(args[0])
                    selection = [i for i in selection if scene[i][attr] == value]
                    obs = f"{len(selection)} selected"
                elif op == "COUNT":
                    answer = obs = str(len(selection))
                elif op == "EXISTS":
                    answer = obs = "yes" if selection else "no"
                elif op == "COMPARE":
                    if len(args) != 2:
                        raise ProgramError("COMPARE takes two attr=value arguments")
                    (a1, v1), (a2, v2) = _pair(args[0]), _pair(args[1])
                    n1 = sum(1 for i in selection if scene[i][a1] == v1)
                    n2 = sum(1 for i in selection if scene[i][a2] == v2)
                    answer = obs = "yes" if n1 > n2 else "no"
                elif op == "QUERY":
                    if len(args) != 1 or args[0].lower() not in ATTRIBUTES:
                        raise ProgramError(f"QUERY takes one attribute name from {ATTRIBUTES}")
                    if not selection:
                        raise ProgramError("QUERY on an empty selection")
                    answer = obs = scene[selection[0]][args[0].lower()]
                elif op == "ADD":
                    obj = dict(_pair(a) for a in args)
                    missing = [a for a in ATTRIBUTES if a not in obj]
                    if missing:
                        raise ProgramError(f"ADD is missing {', '.join(missing)}")
                    scene.append(obj)
                    answer = None
                    obs = f"added {describe(obj)}"
                elif op == "REMOVE":
                    gone = set(selection)
                    scene = [o for i, o in enumerate(scene) if i not in gone]
                    answer = None
                    obs = f"removed {len(gone)}"
                elif op == "REPLACE":
                    if len(args) != 1:
                        raise ProgramError("REPLACE takes one attr=value argument")
                    attr, value = _pair(args[0])
                    for i in selection:
                        scene[i][attr] = value
                    answer = None
                    obs = f"updated {len(selection)}"
                else:
                    raise ProgramError(f"unknown op {op!r}")
            except ProgramError as exc:
                steps.append(Step(thought, line, f"error: {exc}"))
                return ExecResult("", False, str(exc), steps)
            if op in ("ADD", "REMOVE", "REPLACE"):
                selection = list(range(len(scene)))
            steps.append(Step(thought, line, obs))
            thought = ""
        if not steps:
            return ExecResult("", False, "empty program", [Step(thought, "", "error: empty program")])
        if answer is None:
            answer = render_scene(scene)
        return ExecResult(answer, True, "", steps)


def to_trajectory(res: ExecResult) -> Trajectory:
    steps = res.steps or [Step("", "", res.diagnostic or "no steps")]
    return Trajectory(tuple(steps), res.result if res.ok else "")


class ToyEvaluator:
    """Success means the final answer equals the task's truth after normalization."""

    def judge(self, task, trajectory: Trajectory) -> Verdict:
        if task.truth is None:
            return Verdict(False, "task has no ground truth")
        got = normalize_answer(trajectory.final_answer)
        want = normalize_answer(task.truth)
        if got == want:
            return Verdict(True, "correct")
        return Verdict(False, f"expected {want!r}, got {got!r}")
