"""Rendering latency against memories of growing length."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autograd import no_grad
from .model import MemoryState, ModelConfig, MultiViewNet

CSV_HEADER = ("n", "s", "latency_ms_p50", "mem_tokens")


@dataclass
class BenchRow:
    n: int
    s: int
    latency_ms_p50: float
    mem_tokens: int


def filled_memory(net: MultiViewNet, n: int, image_size: int, seed: int = 0, n_distinct: int = 4) -> MemoryState:
    """A memory of ``n`` frames: a few real insertions, then their entries re-used under new ids."""
    rng = np.random.default_rng(seed)
    k = min(n, n_distinct)
    imgs = rng.random((k, image_size, image_size, 3)).astype(np.float32)
    with no_grad():
        toks = net.encode(imgs, list(range(k)))
        mem = net.empty_memory()
        for t in toks:
            mem, _ = net.extend_memory(mem, [t])
    L = net.n_memory_layers
    for fid in range(k, n):
        src = fid % k
        mem = mem.append([fid], [[mem.entry(src, l) for l in range(L)]])
    return mem


def run_bench(
    ns: Sequence[int] = (2, 8, 32, 128),
    ss: Sequence[int] = (1, 2, 4, 8),
    reps: int = 20,
    image_size: int = 128,
    cfg: ModelConfig | None = None,
    seed: int = 0,
) -> list[BenchRow]:
    """Median per-frame render latency for each memory length ``n`` and batch size ``s``."""
    net = MultiViewNet(cfg or ModelConfig(seed=seed))
    rng = np.random.default_rng(seed + 1)
    s_max = max(ss)
    imgs = rng.random((s_max, image_size, image_size, 3)).astype(np.float32)
    with no_grad():
        queries = net.encode(imgs, [10_000 + i for i in range(s_max)])
    rows = []
    for n in ns:
        mem = filled_memory(net, n, image_size, seed)
        for l in range(net.n_memory_layers):
            mem.context(l)  # warm the concatenation cache
        for s in ss:
            frames = queries[:s]
            times = []
            with no_grad():
                net.render(mem, frames, batch_size=s)
                for _ in range(reps):
                    t0 = time.perf_counter()
                    net.render(mem, frames, batch_size=s)
                    times.append((time.perf_counter() - t0) / s)
            rows.append(BenchRow(n, s, float(np.median(times)) * 1000.0, mem.n_tokens()))
    return rows


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.n, r.s, f"{r.latency_ms_p50:.4f}", r.mem_tokens])
    return buf.getvalue()
