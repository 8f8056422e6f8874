"""Task pool and append-only vote log for the pairwise caption study.

Raters are opaque tokens. Captions are shown in a per-task randomized order
that is assigned once (at first serve), persisted to the log, and never
changes; votes are recorded in display coordinates and canonicalized to
method ids only at aggregation time. The whole service state is a pure fold
over the pairs file plus the log, so a restart loses nothing.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from vfc.errors import (
    ConfigError,
    DuplicateVote,
    NoTasks,
    TaskClosed,
    UnknownTask,
)
from vfc.metrics import aggregate_majority

INSTRUCTION_TEXT = (
    "Select the better caption describing the image based on 3 aspects: "
    "correctness, detailness, and fluency."
)

CHOICES = ("first_shown", "second_shown")
DEFAULT_REQUIRED_VOTES = 3


@dataclass
class PairTask:
    task_id: str
    item_id: str
    image: str
    method_a: str
    caption_a: str
    method_b: str
    caption_b: str
    required_votes: int = DEFAULT_REQUIRED_VOTES
    display_order: str | None = None  # "AB" | "BA", assigned at first serve
    votes: dict[str, str] = field(default_factory=dict)  # rater_id -> choice

    @property
    def closed(self) -> bool:
        return len(self.votes) >= self.required_votes

    def canonical_choice(self, choice: str) -> str:
        """Map a display-coordinate choice to the underlying method id."""
        first_is_a = self.display_order != "BA"
        if choice == "first_shown":
            return self.method_a if first_is_a else self.method_b
        return self.method_b if first_is_a else self.method_a


class VoteStore:
    def __init__(
        self,
        pairs_path: str | Path,
        log_path: str | Path,
        seed: int = 0,
        required_votes: int = DEFAULT_REQUIRED_VOTES,
    ):
        if required_votes % 2 == 0:
            raise ConfigError("required_votes must be odd for majority voting")
        self.seed = seed
        self.log_path = Path(log_path)
        self._lock = threading.RLock()
        self.tasks: dict[str, PairTask] = {}
        self._load_pairs(Path(pairs_path), required_votes)
        self._replay_log()

    def _load_pairs(self, pairs_path: Path, required_votes: int) -> None:
        with open(pairs_path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                if not line.strip():
                    continue
                raw = json.loads(line)
                task = PairTask(
                    task_id=raw.get("task_id") or f"task{i:05d}",
                    item_id=raw["item_id"],
                    image=raw.get("image", ""),
                    method_a=raw["method_a"],
                    caption_a=raw["caption_a"],
                    method_b=raw["method_b"],
                    caption_b=raw["caption_b"],
                    required_votes=int(raw.get("required_votes", required_votes)),
                )
                if task.task_id in self.tasks:
                    raise ConfigError(f"duplicate task_id {task.task_id!r} in pairs file")
                self.tasks[task.task_id] = task

    def _replay_log(self) -> None:
        if not self.log_path.exists():
            return
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    continue  # trailing partial line after a crash
                task = self.tasks.get(record.get("task_id"))
                if task is None:
                    continue
                if record.get("type") == "assign":
                    task.display_order = record["display_order"]
                elif record.get("type") == "vote":
                    task.votes.setdefault(record["rater_id"], record["choice"])

    def _append_log(self, record: dict) -> None:
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            fh.flush()

    def _assign_order(self, task: PairTask) -> None:
        digest = hashlib.sha256(f"{self.seed}:{task.task_id}".encode()).digest()
        task.display_order = "AB" if digest[0] % 2 == 0 else "BA"
        self._append_log(
            {"type": "assign", "task_id": task.task_id, "display_order": task.display_order}
        )

    # -- API -------------------------------------------------------------------

    def next_task(self, rater_id: str) -> PairTask:
        """Least-voted open task this rater has not voted on; NoTasks otherwise."""
        if not rater_id:
            raise ValueError("rater_id must be non-empty")
        with self._lock:
            candidates = [
                t
                for t in self.tasks.values()
                if not t.closed and rater_id not in t.votes
            ]
            if not candidates:
                raise NoTasks(f"no open tasks for rater {rater_id}")
            task = min(candidates, key=lambda t: (len(t.votes), t.task_id))
            if task.display_order is None:
                self._assign_order(task)
            return task

    def task_payload(self, task: PairTask) -> dict:
        """Display-ordered payload: captions in serve order, instruction verbatim."""
        first_is_a = task.display_order != "BA"
        caption_1 = task.caption_a if first_is_a else task.caption_b
        caption_2 = task.caption_b if first_is_a else task.caption_a
        return {
            "task_id": task.task_id,
            "item_id": task.item_id,
            "image": task.image,
            "caption_1": caption_1,
            "caption_2": caption_2,
            "instruction": INSTRUCTION_TEXT,
            "required_votes": task.required_votes,
            "votes_so_far": len(task.votes),
        }

    def submit_vote(self, task_id: str, rater_id: str, choice: str) -> dict:
        """Durably append one vote; the task closes at required_votes."""
        if choice not in CHOICES:
            raise ValueError(f"choice must be one of {CHOICES}, got {choice!r}")
        if not rater_id:
            raise ValueError("rater_id must be non-empty")
        with self._lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise UnknownTask(task_id)
            if rater_id in task.votes:
                raise DuplicateVote(f"rater {rater_id} already voted on {task_id}")
            if task.closed:
                raise TaskClosed(task_id)
            if task.display_order is None:
                # Vote without a prior serve (scripted client); fix the order now.
                self._assign_order(task)
            self._append_log(
                {
                    "type": "vote",
                    "task_id": task_id,
                    "rater_id": rater_id,
                    "choice": choice,
                    "submitted_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                }
            )
            task.votes[rater_id] = choice
            return {"ok": True, "closed": task.closed}

    def results(self) -> dict:
        """Majority tallies per method pair over closed tasks only."""
        with self._lock:
            pairs: dict[str, dict[str, int]] = {}
            for task in self.tasks.values():
                key = f"{task.method_a} vs {task.method_b}"
                tally = pairs.setdefault(
                    key,
                    {"ours_preferred": 0, "baseline_preferred": 0, "open_tasks": 0},
                )
                if not task.closed:
                    tally["open_tasks"] += 1
                    continue
                canonical = [task.canonical_choice(c) for c in task.votes.values()]
                winner = aggregate_majority(canonical, task.required_votes)
                if winner == task.method_a:
                    tally["ours_preferred"] += 1
                else:
                    tally["baseline_preferred"] += 1
            return {"pairs": pairs, "n_tasks": len(self.tasks)}
