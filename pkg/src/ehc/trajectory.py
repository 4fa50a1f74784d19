"""Trajectories and their text form.

A trajectory renders to the block stored as a memory record's ``content``::

    Task: How many red objects are there?
    Step 1: FILTER color=red => 2 selected
    Step 2: COUNT => 2
    Answer: 2

``parse_trajectory`` inverts ``Trajectory.render`` so learning code can work
on steps recovered from stored records.
"""

from __future__ import annotations

from dataclasses import dataclass

from ehc.errors import UsageError

_ARROW = " => "


@dataclass(frozen=True)
class Step:
    thought: str
    action: str
    observation: str


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    final_answer: str

    def __post_init__(self) -> None:
        if not self.steps:
            raise UsageError("a trajectory needs at least one step")
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def render(self, task: str = "") -> str:
        lines = [f"Task: {task}"] if task else []
        lines += render_steps(self.steps)
        lines.append(f"Answer: {self.final_answer}")
        return "\n".join(lines)


def render_steps(steps, start: int = 1) -> list[str]:
    lines = []
    for n, step in enumerate(steps, start):
        if step.thought:
            lines.append(f"Thought: {step.thought}")
        line = f"Step {n}: {step.action}"
        if step.observation:
            line += _ARROW + step.observation
        lines.append(line)
    return lines


def parse_trajectory(text: str) -> tuple[str, Trajectory]:
    """Recover (task, trajectory) from rendered content.

    Unknown lines are ignored. Content without any ``Step`` line yields a
    single empty step, so callers always get a valid trajectory.
    """
    task = ""
    answer = ""
    steps: list[Step] = []
    thought = ""
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("Task:") and not steps and not task:
            task = line[5:].strip()
        elif line.startswith("Thought:"):
            thought = line[8:].strip()
        elif line.startswith("Step ") and ":" in line:
            body = line.split(":", 1)[1].strip()
            action, _, obs = body.partition(_ARROW.strip())
            steps.append(Step(thought, action.strip(), obs.strip()))
            thought = ""
        elif line.startswith("Answer:"):
            answer = line[7:].strip()
    if not steps:
        steps.append(Step("", "", ""))
    return task, Trajectory(tuple(steps), answer)
