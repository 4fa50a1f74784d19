"""Line-delimited store file for a HierarchicalMemory and its insight pool.

Line 1 is a JSON header::

    {"type":"header","format_version":1,"dim":256,"capacity":16,...}

followed by one JSON object per record (``"type":"record"``, ordered by
``created_at`` then id) and one per insight (``"type":"insight"``, ordered by
id). Floats use Python's shortest round-trip repr, so save/load/save is
byte-stable.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Optional

from ehc.errors import EHCError, FormatError
from ehc.insights import Insight, InsightPool
from ehc.memory import DEEP, FAST, HierarchicalMemory, MemoryRecord, PoolStats

FORMAT_VERSION = 1

_RECORD_FIELDS = ("id", "category", "kind", "content", "embedding", "created_at", "last_access")


def _dumps(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def _record_line(rec: MemoryRecord, tier: str) -> str:
    obj: dict[str, Any] = {
        "type": "record",
        "tier": tier,
        "id": rec.id,
        "category": rec.category,
        "kind": rec.kind,
        "content": rec.content,
        "embedding": list(rec.embedding),
    }
    if rec.reflections:
        obj["reflections"] = rec.reflections
    if rec.task_id is not None:
        obj["task_id"] = rec.task_id
    obj["created_at"] = rec.created_at
    obj["last_access"] = rec.last_access
    return _dumps(obj)


def dump_lines(memory: HierarchicalMemory, pool: Optional[InsightPool] = None) -> list[str]:
    counters = memory._counters
    header: dict[str, Any] = {
        "type": "header",
        "format_version": FORMAT_VERSION,
        "dim": memory.dim,
        "capacity": memory.capacity,
        "deep_theta_gate": memory.deep_theta_gate,
        "clock": memory.clock,
        "evictions_total": counters.evictions_total,
        "promotions_total": counters.promotions_total,
        "fast_hits": counters.fast_hits,
        "deep_hits": counters.deep_hits,
    }
    if pool is not None:
        header["insight_initial_weight"] = pool.initial_weight
        header["insight_max_per_category"] = pool.max_per_category
        header["insight_next_id"] = pool.next_id
    lines = [_dumps(header)]
    tagged = [(r, FAST) for r in memory._fast.values()] + [(r, DEEP) for r in memory._deep.values()]
    tagged.sort(key=lambda t: (t[0].created_at, t[0].id))
    lines += [_record_line(r, tier) for r, tier in tagged]
    if pool is not None:
        for ins in sorted(pool.insights.values(), key=lambda i: i.id):
            lines.append(_dumps({
                "type": "insight",
                "id": ins.id,
                "category": ins.category,
                "text": ins.text,
                "weight": ins.weight,
            }))
    return lines


def save_store(path: str | Path, memory: HierarchicalMemory, pool: Optional[InsightPool] = None) -> None:
    """Write the store atomically (temp file + rename)."""
    path = Path(path)
    data = "".join(line + "\n" for line in dump_lines(memory, pool))
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(obj: dict, key: str, kind: type | tuple, lineno: int, path: str):
    if key not in obj:
        raise FormatError(f"missing field {key!r}", lineno, path)
    val = obj[key]
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise FormatError(f"field {key!r} has wrong type {type(val).__name__}", lineno, path)
    return val


def load_store(path: str | Path) -> tuple[HierarchicalMemory, Optional[InsightPool]]:
    """Parse a store file. Errors name the first offending line."""
    spath = str(path)
    try:
        text = Path(path).read_text("utf-8")
    except FileNotFoundError:
        raise FormatError("store file does not exist", path=spath) from None
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot read store: {exc}", path=spath) from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        return HierarchicalMemory(), None

    def parse(lineno: int, raw: str) -> dict:
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", lineno, spath) from None
        if not isinstance(obj, dict):
            raise FormatError("line is not a JSON object", lineno, spath)
        return obj

    header = parse(1, lines[0])
    if header.get("type") != "header":
        raise FormatError("first line must be the store header", 1, spath)
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {header.get('format_version')!r}", 1, spath)
    try:
        memory = HierarchicalMemory(
            capacity=_require(header, "capacity", int, 1, spath),
            dim=_require(header, "dim", int, 1, spath),
            deep_theta_gate=bool(header.get("deep_theta_gate", False)),
        )
    except EHCError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(str(exc), 1, spath) from exc
    memory.clock = int(header.get("clock", 0))
    memory._counters = PoolStats(
        evictions_total=int(header.get("evictions_total", 0)),
        promotions_total=int(header.get("promotions_total", 0)),
        fast_hits=int(header.get("fast_hits", 0)),
        deep_hits=int(header.get("deep_hits", 0)),
    )
    pool = None
    if "insight_next_id" in header:
        pool = InsightPool(
            initial_weight=int(header.get("insight_initial_weight", 2)),
            max_per_category=int(header.get("insight_max_per_category", 20)),
        )
        pool.next_id = int(header["insight_next_id"])

    for lineno, raw in enumerate(lines[1:], 2):
        obj = parse(lineno, raw)
        kind = obj.get("type")
        if kind == "record":
            for key in _RECORD_FIELDS:
                if key not in obj:
                    raise FormatError(f"missing field {key!r}", lineno, spath)
            rid = _require(obj, "id", int, lineno, spath)
            if rid in memory:
                raise FormatError(f"duplicate record id {rid}", lineno, spath)
            emb = _require(obj, "embedding", list, lineno, spath)
            if len(emb) != memory.dim or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in emb
            ):
                raise FormatError(f"embedding must be {memory.dim} numbers", lineno, spath)
            tier = obj.get("tier")
            if tier not in (FAST, DEEP):
                raise FormatError(f"bad tier {tier!r}", lineno, spath)
            try:
                rec = MemoryRecord(
                    id=rid,
                    category=_require(obj, "category", str, lineno, spath),
                    kind=_require(obj, "kind", str, lineno, spath),
                    content=_require(obj, "content", str, lineno, spath),
                    embedding=tuple(emb),
                    reflections=obj.get("reflections"),
                    created_at=_require(obj, "created_at", int, lineno, spath),
                    last_access=_require(obj, "last_access", int, lineno, spath),
                    task_id=obj.get("task_id"),
                )
            except EHCError as exc:
                if isinstance(exc, FormatError):
                    raise
                raise FormatError(str(exc), lineno, spath) from exc
            (memory._fast if tier == FAST else memory._deep)[rid] = rec
        elif kind == "insight":
            if pool is None:
                raise FormatError("insight line in a store without an insight pool header", lineno, spath)
            iid = _require(obj, "id", int, lineno, spath)
            if iid in pool:
                raise FormatError(f"duplicate insight id {iid}", lineno, spath)
            weight = _require(obj, "weight", int, lineno, spath)
            if weight < 1:
                raise FormatError(f"insight {iid} has non-positive weight", lineno, spath)
            pool.insights[iid] = Insight(
                id=iid,
                category=_require(obj, "category", str, lineno, spath),
                text=_require(obj, "text", str, lineno, spath),
                weight=weight,
            )
        else:
            raise FormatError(f"unknown line type {kind!r}", lineno, spath)
    if len(memory._fast) > memory.capacity:
        raise FormatError(
            f"{len(memory._fast)} fast records exceed capacity {memory.capacity}", path=spath
        )
    return memory, pool
