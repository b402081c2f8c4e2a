"""Evaluation targets: built-in benchmark subjects and a subprocess bridge.

A target maps a fixed-length byte genome to a finite tick total,
deterministically.  Built-ins decode the genome into small integer arrays
and count loop iterations, comparisons, or probe steps of the subject
algorithm; the exact tick placement of each subject is frozen by golden
tests.  External programs plug in through a line-oriented hex protocol.
"""

from __future__ import annotations

import math
import os
import select
import subprocess
import time
from dataclasses import dataclass, field
from typing import Callable

__all__ = [
    "Target",
    "TargetError",
    "decode_int_array",
    "insertion_sort_target",
    "ordered_pairs_target",
    "quicksort_target",
    "tree_sort_target",
    "hash_table_target",
    "popcount_target",
    "SubprocessTargetConfig",
    "subprocess_target",
    "SUBJECTS",
    "make_subject",
    "subject_help",
]


class TargetError(RuntimeError):
    """Evaluation failed and the failure policy is 'error'."""


def _noop() -> None:
    return None


@dataclass(slots=True)
class Target:
    """Black-box evaluator: genome bytes -> tick total.

    ``evaluate`` must be pure and deterministic; weight caching and MH
    acceptance both rely on a genome always producing the same tick.
    """

    name: str
    genome_length: int
    evaluate: Callable[[bytes], float]
    close: Callable[[], None] = field(default=_noop)


def decode_int_array(genome: bytes, n: int, lo: int, hi: int) -> list[int]:
    """Decode an n-byte genome into n integers in [lo, hi], bytewise modulo."""
    if len(genome) != n:
        raise ValueError(f"genome length {len(genome)} != expected {n}")
    if lo > hi:
        raise ValueError(f"lo {lo} > hi {hi}")
    span = hi - lo + 1
    if span > 256:
        raise ValueError(f"value span {span} exceeds one byte")
    if span == 256:
        return [lo + b for b in genome]
    return [lo + (b % span) for b in genome]


def insertion_sort_target(n: int, lo: int = 0, hi: int = 255) -> Target:
    """Insertion sort counting one tick per outer and per inner loop iteration."""

    def evaluate(genome: bytes) -> float:
        a = decode_int_array(genome, n, lo, hi)
        ticks = 0
        for i in range(1, len(a)):
            ticks += 1
            x = a[i]
            j = i - 1
            while j >= 0 and a[j] > x:
                ticks += 1
                a[j + 1] = a[j]
                j -= 1
            a[j + 1] = x
        return float(ticks)

    return Target(f"insertion-sort(n={n},lo={lo},hi={hi})", n, evaluate)


def ordered_pairs_target(n: int, lo: int = 0, hi: int = 255) -> Target:
    """One tick for every index pair i < j with a[i] <= a[j]; max C(n, 2)."""
    if n < 2:
        raise ValueError(f"ordered pairs needs n >= 2, got {n}")

    def evaluate(genome: bytes) -> float:
        a = decode_int_array(genome, n, lo, hi)
        ticks = 0
        for i in range(n):
            ai = a[i]
            for j in range(i + 1, n):
                if ai <= a[j]:
                    ticks += 1
        return float(ticks)

    return Target(f"ordered-pairs(n={n},lo={lo},hi={hi})", n, evaluate)


def quicksort_target(n: int, lo: int = 0, hi: int = 255) -> Target:
    """Last-element-pivot quicksort counting one tick per partition comparison.

    Worst case n(n-1)/2 on already-sorted input.  Iterative so large n cannot
    hit the recursion limit.
    """

    def evaluate(genome: bytes) -> float:
        a = decode_int_array(genome, n, lo, hi)
        ticks = 0
        stack = [(0, len(a) - 1)]
        while stack:
            first, last = stack.pop()
            if first >= last:
                continue
            pivot = a[last]
            i = first
            for j in range(first, last):
                ticks += 1
                if a[j] < pivot:
                    a[i], a[j] = a[j], a[i]
                    i += 1
            a[i], a[last] = a[last], a[i]
            stack.append((first, i - 1))
            stack.append((i + 1, last))
        return float(ticks)

    return Target(f"quicksort(n={n},lo={lo},hi={hi})", n, evaluate)


_RED, _BLACK = 0, 1


class _RBNode:
    __slots__ = ("key", "color", "left", "right", "parent")

    def __init__(self, key: int, color: int):
        self.key = key
        self.color = color
        self.left = self
        self.right = self
        self.parent = self


class _RBTree:
    """Red-black tree instrumented for tree-sort tick counting.

    Tick placement, frozen by golden tests: one tick per key comparison
    during descent, one per rotation, one per recolor event in the insert
    fix-up (a case-1 parent/uncle/grandparent recolor counts once, as does
    the recolor preceding a case-3 rotation).  The final root blackening is
    not ticked.
    """

    def __init__(self):
        self.nil = _RBNode(0, _BLACK)
        self.root = self.nil
        self.ticks = 0

    def _rotate_left(self, x: _RBNode) -> None:
        self.ticks += 1
        y = x.right
        x.right = y.left
        if y.left is not self.nil:
            y.left.parent = x
        y.parent = x.parent
        if x.parent is self.nil:
            self.root = y
        elif x is x.parent.left:
            x.parent.left = y
        else:
            x.parent.right = y
        y.left = x
        x.parent = y

    def _rotate_right(self, x: _RBNode) -> None:
        self.ticks += 1
        y = x.left
        x.left = y.right
        if y.right is not self.nil:
            y.right.parent = x
        y.parent = x.parent
        if x.parent is self.nil:
            self.root = y
        elif x is x.parent.right:
            x.parent.right = y
        else:
            x.parent.left = y
        y.right = x
        x.parent = y

    def insert(self, key: int) -> None:
        parent = self.nil
        node = self.root
        while node is not self.nil:
            self.ticks += 1
            parent = node
            node = node.left if key < node.key else node.right
        z = _RBNode(key, _RED)
        z.left = z.right = self.nil
        z.parent = parent
        if parent is self.nil:
            self.root = z
        elif key < parent.key:
            parent.left = z
        else:
            parent.right = z
        self._fixup(z)

    def _fixup(self, z: _RBNode) -> None:
        while z.parent.color == _RED:
            gp = z.parent.parent
            if z.parent is gp.left:
                uncle = gp.right
                if uncle.color == _RED:
                    self.ticks += 1
                    z.parent.color = _BLACK
                    uncle.color = _BLACK
                    gp.color = _RED
                    z = gp
                else:
                    if z is z.parent.right:
                        z = z.parent
                        self._rotate_left(z)
                    self.ticks += 1
                    z.parent.color = _BLACK
                    gp.color = _RED
                    self._rotate_right(gp)
            else:
                uncle = gp.left
                if uncle.color == _RED:
                    self.ticks += 1
                    z.parent.color = _BLACK
                    uncle.color = _BLACK
                    gp.color = _RED
                    z = gp
                else:
                    if z is z.parent.left:
                        z = z.parent
                        self._rotate_right(z)
                    self.ticks += 1
                    z.parent.color = _BLACK
                    gp.color = _RED
                    self._rotate_left(gp)
        self.root.color = _BLACK


def tree_sort_target(n: int, lo: int = 0, hi: int = 255) -> Target:
    """Insert decoded values into a red-black tree, counting descent
    comparisons and fix-up steps (see _RBTree for the exact placement)."""

    def evaluate(genome: bytes) -> float:
        values = decode_int_array(genome, n, lo, hi)
        tree = _RBTree()
        for v in values:
            tree.insert(v)
        return float(tree.ticks)

    return Target(f"tree-sort(n={n},lo={lo},hi={hi})", n, evaluate)


def hash_table_target(n_keys: int, key_len: int) -> Target:
    """Chained hash table, 16 buckets, hash = sum of key bytes mod 16.

    One tick per chain node traversed at insert; duplicate keys are appended
    like any other, so n identical keys cost 0 + 1 + ... + (n-1) ticks.
    """
    if n_keys < 1 or key_len < 1:
        raise ValueError("n_keys and key_len must be >= 1")
    genome_length = n_keys * key_len

    def evaluate(genome: bytes) -> float:
        if len(genome) != genome_length:
            raise ValueError(
                f"genome length {len(genome)} != expected {genome_length}"
            )
        chain_lengths = [0] * 16
        ticks = 0
        for k in range(n_keys):
            key = genome[k * key_len : (k + 1) * key_len]
            b = sum(key) % 16
            ticks += chain_lengths[b]
            chain_lengths[b] += 1
        return float(ticks)

    return Target(f"hash-table(n_keys={n_keys},key_len={key_len})", genome_length, evaluate)


_POPCOUNT = [bin(i).count("1") for i in range(256)]


def popcount_target(n_bytes: int = 1) -> Target:
    """Tick = number of set bits in the genome.  Smooth landscape with a
    single global maximum (all ones); used heavily by the test suite."""

    def evaluate(genome: bytes) -> float:
        if len(genome) != n_bytes:
            raise ValueError(f"genome length {len(genome)} != expected {n_bytes}")
        return float(sum(_POPCOUNT[b] for b in genome))

    return Target(f"popcount(n_bytes={n_bytes})", n_bytes, evaluate)


# --------------------------------------------------------------------------
# Subprocess bridge
# --------------------------------------------------------------------------

@dataclass(slots=True)
class SubprocessTargetConfig:
    """External evaluator launched once and reused line-per-evaluation.

    Wire protocol (bit-exact): request = lowercase hex of the genome + LF;
    response = decimal tick + LF, one response per request, in order.  The
    child must flush after each line.

    ``failure_policy`` is "error" (abort the run) or "penalty" (record
    ``penalty_tick``, which must sit below any tick of interest).
    """

    command: list[str]
    timeout_ms: int = 5000
    failure_policy: str = "error"
    penalty_tick: float = -1e18

    def validate(self) -> None:
        if not self.command:
            raise ValueError("command must be non-empty")
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be > 0, got {self.timeout_ms}")
        if self.failure_policy not in ("error", "penalty"):
            raise ValueError(f"unknown failure policy {self.failure_policy!r}")


class _ChildBroken(Exception):
    pass


class _SubprocessEvaluator:
    def __init__(self, cfg: SubprocessTargetConfig):
        cfg.validate()
        self.cfg = cfg
        self.proc: subprocess.Popen | None = None
        self.buf = bytearray()

    def _spawn(self) -> None:
        self.buf.clear()
        self.proc = subprocess.Popen(
            self.cfg.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            bufsize=0,
        )

    def close(self) -> None:
        if self.proc is None:
            return
        try:
            self.proc.kill()
            self.proc.wait(timeout=5)
        except OSError:
            pass
        self.proc = None

    def _roundtrip(self, request: bytes) -> bytes:
        """Send one request line, return one response line (no trailing LF)."""
        if self.proc is None or self.proc.poll() is not None:
            self._spawn()
        try:
            self.proc.stdin.write(request)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise _ChildBroken(f"write failed: {e}") from e
        deadline = time.monotonic() + self.cfg.timeout_ms / 1000.0
        while b"\n" not in self.buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise _ChildBroken(f"no response within {self.cfg.timeout_ms} ms")
            ready, _, _ = select.select([self.proc.stdout], [], [], remaining)
            if not ready:
                raise _ChildBroken(f"no response within {self.cfg.timeout_ms} ms")
            chunk = os.read(self.proc.stdout.fileno(), 4096)
            if not chunk:
                raise _ChildBroken("child closed its output stream")
            self.buf += chunk
        i = self.buf.index(b"\n")
        line = bytes(self.buf[:i])
        del self.buf[: i + 1]
        return line

    def evaluate(self, genome: bytes) -> float:
        request = genome.hex().encode("ascii") + b"\n"
        failure = "unknown failure"
        for attempt in range(2):  # crash or timeout gets one relaunch
            try:
                response = self._roundtrip(request)
            except _ChildBroken as e:
                self.close()
                failure = str(e)
                continue
            try:
                tick = float(response.strip())
                if not math.isfinite(tick):
                    raise ValueError(f"non-finite tick {tick!r}")
                return tick
            except ValueError:
                # Unparsable response: the stream is out of sync, so resync by
                # relaunching, but do not retry the evaluation.
                self.close()
                failure = f"unparsable response {response[:64]!r}"
                break
        if self.cfg.failure_policy == "error":
            raise TargetError(f"subprocess target failed: {failure}")
        return self.cfg.penalty_tick


def subprocess_target(cfg: SubprocessTargetConfig, genome_length: int) -> Target:
    """Target backed by a persistent child speaking the hex line protocol."""
    if genome_length < 0:
        raise ValueError("genome_length must be >= 0")
    ev = _SubprocessEvaluator(cfg)

    def evaluate(genome: bytes) -> float:
        if len(genome) != genome_length:
            raise ValueError(
                f"genome length {len(genome)} != expected {genome_length}"
            )
        return ev.evaluate(genome)

    return Target(f"subprocess({cfg.command[0]})", genome_length, evaluate, ev.close)


# --------------------------------------------------------------------------
# Built-in subject registry
# --------------------------------------------------------------------------

SUBJECTS: dict[str, tuple[Callable[..., Target], dict[str, int], str]] = {
    "insertion-sort": (
        insertion_sort_target,
        {"n": 16, "lo": 0, "hi": 255},
        "insertion sort; ticks outer and inner loop iterations",
    ),
    "ordered-pairs": (
        ordered_pairs_target,
        {"n": 16, "lo": 0, "hi": 255},
        "count of index pairs i<j with a[i] <= a[j]",
    ),
    "quicksort": (
        quicksort_target,
        {"n": 16, "lo": 0, "hi": 255},
        "last-pivot quicksort; ticks partition comparisons",
    ),
    "tree-sort": (
        tree_sort_target,
        {"n": 16, "lo": 0, "hi": 255},
        "red-black tree inserts; ticks comparisons and fix-up steps",
    ),
    "hash-table": (
        hash_table_target,
        {"n_keys": 8, "key_len": 4},
        "chained hash inserts; ticks chain nodes traversed",
    ),
    "popcount": (
        popcount_target,
        {"n_bytes": 1},
        "number of set bits in the genome",
    ),
}


def make_subject(spec: str) -> Target:
    """Build a built-in subject from ``name`` or ``name:k=v,k=v`` syntax."""
    name, _, argstr = spec.partition(":")
    name = name.strip()
    if name not in SUBJECTS:
        known = ", ".join(sorted(SUBJECTS))
        raise ValueError(f"unknown subject {name!r}; known subjects: {known}")
    builder, defaults, _ = SUBJECTS[name]
    kwargs = dict(defaults)
    if argstr:
        for item in argstr.split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or key not in defaults:
                raise ValueError(
                    f"bad subject parameter {item!r} for {name!r};"
                    f" accepted: {', '.join(defaults)}"
                )
            kwargs[key] = int(value)
    return builder(**kwargs)


def subject_help() -> str:
    """One line per built-in subject, for the CLI listing."""
    lines = []
    for name, (_, defaults, desc) in sorted(SUBJECTS.items()):
        params = ",".join(f"{k}={v}" for k, v in defaults.items())
        lines.append(f"{name:<16} {desc}  [defaults: {params}]")
    return "\n".join(lines)
