"""RL training-data preparation: rollout grouping, dynamic pass-rate
filtering, batch composition, overlong reward shaping and group-mean
advantages. No gradient optimization lives here; the export is consumed by
an external trainer.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from .errors import DegenerateGroup, InsufficientPool

DEFAULT_GROUP_SIZE = 8
DEFAULT_MAX_RESPONSE_LEN = 24_000
DEFAULT_OVERLONG_BUFFER = 4_000

TASK_KINDS = ("whole_proof", "correction_round_1")


@dataclass(frozen=True)
class Rollout:
    response_len: int
    passed: bool
    reward: float


@dataclass(frozen=True)
class RLGroup:
    input_id: str
    task_kind: str
    prompt: str
    rollouts: tuple[Rollout, ...]

    def __post_init__(self):
        assert self.task_kind in TASK_KINDS
        assert self.rollouts

    @property
    def group_size(self) -> int:
        return len(self.rollouts)

    @property
    def pass_rate(self) -> float:
        return sum(r.passed for r in self.rollouts) / len(self.rollouts)


def dynamic_filter(groups: list[RLGroup], lo: float = 0.0,
                   hi: float = 0.75) -> list[RLGroup]:
    """Keep groups with pass rate in (lo, hi]; stable order."""
    return [g for g in groups if lo < g.pass_rate <= hi]


def compose_batch(whole_pool: list[RLGroup], correction_pool: list[RLGroup],
                  batch_size: int, mix: float = 0.5, seed: int = 0) -> list[RLGroup]:
    """Draw ceil(mix*B) whole-proof and the rest correction groups, without
    replacement, deterministically under `seed`."""
    n_whole = math.ceil(mix * batch_size)
    n_corr = batch_size - n_whole
    if len(whole_pool) < n_whole:
        raise InsufficientPool("whole_proof", n_whole, len(whole_pool))
    if len(correction_pool) < n_corr:
        raise InsufficientPool("correction_round_1", n_corr, len(correction_pool))
    rng = random.Random(seed)
    batch = rng.sample(whole_pool, n_whole) + rng.sample(correction_pool, n_corr)
    return batch


def oversample_plan(train_batch: int) -> int:
    """Over-sample three times the train batch to survive dynamic filtering."""
    assert train_batch >= 1
    return 3 * train_batch


def overlong_penalty(length: int, max_len: int = DEFAULT_MAX_RESPONSE_LEN,
                     buffer: int = DEFAULT_OVERLONG_BUFFER,
                     factor: float = 1.0) -> float:
    """0 below the buffer, linear ramp to -factor at the cap, -factor beyond."""
    assert length >= 0
    ramp_start = max_len - buffer
    if length <= ramp_start:
        return 0.0
    if length >= max_len:
        return -factor
    return -factor * (length - ramp_start) / buffer


def reward(passed: bool, length: int, max_len: int = DEFAULT_MAX_RESPONSE_LEN,
           buffer: int = DEFAULT_OVERLONG_BUFFER, factor: float = 1.0) -> float:
    return (1.0 if passed else 0.0) + overlong_penalty(length, max_len, buffer, factor)


def advantages(group: RLGroup) -> list[float]:
    """Mean-centered rewards; deliberately no division by the group std."""
    if group.group_size < 2:
        raise DegenerateGroup(f"group {group.input_id} has size {group.group_size}")
    mean = sum(r.reward for r in group.rollouts) / group.group_size
    return [r.reward - mean for r in group.rollouts]


def build_group(input_id: str, task_kind: str, prompt: str,
                rollouts: list[tuple[int, bool]], **reward_kwargs) -> RLGroup:
    """Assemble a group from (response_len, passed) pairs, scoring rewards."""
    scored = tuple(
        Rollout(length, passed, reward(passed, length, **reward_kwargs))
        for length, passed in rollouts
    )
    return RLGroup(input_id, task_kind, prompt, scored)


def export_groups(groups: list[RLGroup], path) -> None:
    """JSON-lines export with per-rollout rewards and advantages."""
    with open(path, "w", encoding="utf-8") as fh:
        for g in groups:
            advs = advantages(g)
            fh.write(json.dumps({
                "input_id": g.input_id,
                "task": g.task_kind,
                "prompt": g.prompt,
                "rollouts": [
                    {"len": r.response_len, "passed": r.passed,
                     "reward": r.reward, "advantage": a}
                    for r, a in zip(g.rollouts, advs)
                ],
            }, ensure_ascii=False) + "\n")


def load_rollout_groups(path, **reward_kwargs) -> list[RLGroup]:
    """Read groups from JSON-lines of {input_id, task, prompt, rollouts:[{len, passed}]}."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(build_group(
                rec["input_id"], rec["task"], rec.get("prompt", ""),
                [(r["len"], r["passed"]) for r in rec["rollouts"]],
                **reward_kwargs,
            ))
    return out
