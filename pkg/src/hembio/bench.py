"""Median wall-time benchmarks for the circuits (table1) and the protocol (table2).

Backends:

* ``clear``: the plaintext reference circuits from :mod:`hembio.oracle`
* ``mock``: the encrypted code path over the keyed-mask stand-in backend
* ``fhe``: the encrypted code path over gate-bootstrapped TFHE

Timed sections exclude key generation and input encryption, except for
the ``*_encdec`` rows, which also include client-side encryption and
decryption.
"""

from __future__ import annotations

import csv
import io
import os
import platform
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable

from . import arith, oracle
from .config import Config
from .gates import BackendHandle, encrypt_bit, keygen
from .matcher import (
    BiometricVector,
    encrypt_vector,
    generate_pair,
    manhattan,
    match_f,
    squared_euclidean,
)
from .protocol import Client, ClientIdentity, Server, client_respond, construct_token, draw_tokens

TABLE1 = ("nbit_add", "twos_complement", "abs_value", "nbit_sub", "nbit_mult", "nbit_gt", "manhattan", "euclidean")
TABLE2 = ("f", "g", "protocol", "protocol_encdec")
BENCH_BACKENDS = ("clear", "mock", "fhe")
DEFAULT_TRIALS = {"clear": 1000, "mock": 20, "fhe": 5}
CSV_COLUMNS = ("name", "backend", "n", "w", "trials", "median_ns")

# (faster, slower) pairs that must hold on every backend
ORDERINGS = {
    "table1": (("nbit_add", "nbit_sub"), ("nbit_sub", "nbit_mult"), ("manhattan", "euclidean")),
    "table2": (("g", "f"),),
}


@dataclass
class BenchRow:
    name: str
    backend: str
    n: int
    w: int
    trials: int
    median_ns: int | None
    status: str = "ok"


@dataclass
class BenchReport:
    profile: str
    rows: list[BenchRow] = field(default_factory=list)
    env: dict = field(default_factory=dict)

    def row(self, name: str) -> BenchRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def median(self, name: str) -> int:
        r = self.row(name)
        if r.median_ns is None:
            raise ValueError(f"{name}: {r.status}")
        return r.median_ns

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(CSV_COLUMNS)
        for r in self.rows:
            median = r.median_ns if r.status == "ok" else r.status
            out.writerow((r.name, r.backend, r.n, r.w, r.trials, median))
        return buf.getvalue() if fh is None else ""

    def render(self) -> str:
        lines = [f"profile {self.profile}  cpu {self.env.get('cpu', '?')}  cores {self.env.get('cores', '?')}"]
        lines.append(f"{'name':<18}{'backend':<8}{'n':>5}{'w':>4}{'trials':>8}{'median':>16}")
        for r in self.rows:
            shown = _human(r.median_ns) if r.status == "ok" else r.status
            lines.append(f"{r.name:<18}{r.backend:<8}{r.n:>5}{r.w:>4}{r.trials:>8}{shown:>16}")
        return "\n".join(lines)

    def orderings(self) -> list[tuple[str, bool]]:
        """Check the hardware-independent orderings that apply to this profile."""
        results = []
        for fast, slow in ORDERINGS[self.profile]:
            try:
                ok = self.median(fast) < self.median(slow)
            except ValueError:
                ok = False
            results.append((f"{fast} < {slow}", ok))
        return results


def gap(slow: BenchReport, fast: BenchReport) -> dict[str, float]:
    """Per-row ratio of ``slow`` over ``fast`` medians for rows both reports timed."""
    ratios = {}
    for r in slow.rows:
        try:
            ratios[r.name] = slow.median(r.name) / max(fast.median(r.name), 1)
        except (KeyError, ValueError):
            continue
    return ratios


def _human(ns: int | None) -> str:
    if ns is None:
        return "-"
    for unit, scale in (("s", 1e9), ("ms", 1e6), ("us", 1e3)):
        if ns >= scale:
            return f"{ns / scale:.3f} {unit}"
    return f"{ns} ns"


def environment() -> dict:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return {"cpu": cpu, "cores": os.cpu_count(), "python": platform.python_version(), "platform": platform.platform()}


def _time(fn: Callable[[], object], trials: int, timeout: float | None) -> tuple[list[int], bool]:
    samples = []
    start = time.perf_counter()
    for _ in range(trials):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
        if timeout is not None and time.perf_counter() - start > timeout and len(samples) < trials:
            return samples, True
    return samples, False


def _row(name, backend, n, w, trials, fn, timeout) -> BenchRow:
    samples, timed_out = _time(fn, trials, timeout)
    if timed_out:
        return BenchRow(name, backend, n, w, len(samples), None, "TIMEOUT")
    return BenchRow(name, backend, n, w, len(samples), int(statistics.median(samples)))


def _clear_table1(n, w, rng):
    a, b = rng.randrange(1 << w), rng.randrange(1 << w)
    x = [rng.randrange(1 << w) for _ in range(n)]
    y = [rng.randrange(1 << w) for _ in range(n)]
    return {
        "nbit_add": lambda: oracle.plain_add(a, b, w),
        "twos_complement": lambda: oracle.plain_twos(a, w),
        "abs_value": lambda: oracle.plain_abs(a, w),
        "nbit_sub": lambda: oracle.plain_sub(a, b, w),
        "nbit_mult": lambda: oracle.plain_mult(a, b, w),
        "nbit_gt": lambda: oracle.plain_gt(a, b, w),
        "manhattan": lambda: oracle.plain_manhattan(x, y, w),
        "euclidean": lambda: oracle.plain_euclid2(x, y, w),
    }


def _enc_table1(keys, n, w, rng, workers):
    sk = keys.secret_key
    h = BackendHandle(keys.cloud_key)
    a = arith.encrypt_word(sk, rng.randrange(1 << w), w)
    b = arith.encrypt_word(sk, rng.randrange(1 << w), w)
    x = encrypt_vector(sk, BiometricVector([rng.randrange(1 << w) for _ in range(n)], w))
    y = encrypt_vector(sk, BiometricVector([rng.randrange(1 << w) for _ in range(n)], w))
    return {
        "nbit_add": lambda: arith.nbit_add(h, a, b),
        "twos_complement": lambda: arith.twos_complement(h, a),
        "abs_value": lambda: arith.abs_value(h, a),
        "nbit_sub": lambda: arith.nbit_sub(h, a, b),
        "nbit_mult": lambda: arith.nbit_mult(h, a, b),
        "nbit_gt": lambda: arith.nbit_gt(h, a, b),
        "manhattan": lambda: manhattan(h, x, y, workers),
        "euclidean": lambda: squared_euclidean(h, x, y, workers),
    }


def _clear_table2(cfg: Config, rng):
    t, s = generate_pair(cfg.n, cfg.w, 1, 1, seed=rng.randrange(1 << 32))
    r0, r1 = draw_tokens(cfg.token_bits)
    return {
        "f": lambda: oracle.plain_f(s.components, t.components, cfg.threshold, cfg.w),
        "g": lambda: oracle.plain_g(1, r0, r1),
        "protocol": lambda: oracle.plain_protocol_run(
            t.components, s.components, cfg.threshold, cfg.w, cfg.token_bits
        ),
    }


def _enc_table2(keys, cfg: Config, rng, trials, timeout, workers) -> list[BenchRow]:
    sk = keys.secret_key
    h = BackendHandle(keys.cloud_key)
    backend = keys.cloud_key.backend
    label = "mock" if backend == "clear" else backend
    t, s = generate_pair(cfg.n, cfg.w, 1, 1, seed=rng.randrange(1 << 32))
    t_enc, s_enc = encrypt_vector(sk, t), encrypt_vector(sk, s)
    b_enc = encrypt_bit(sk, 1)
    r0, r1 = draw_tokens(cfg.token_bits)
    rows = [
        _row("f", label, cfg.n, cfg.w, trials, lambda: match_f(h, s_enc, t_enc, cfg.match, workers), timeout),
        _row("g", label, cfg.n, cfg.w, trials, lambda: construct_token(h, b_enc, r0, r1, cfg.token_bits), timeout),
    ]

    # one registered identity; each trial is a full authentication
    server = Server(cfg, workers=workers)
    client = Client(ClientIdentity("bench", keys, t), cfg)
    server.register(client.register())
    core, total = [], []
    start = time.perf_counter()
    timed_out = False
    for _ in range(trials):
        t0 = time.perf_counter_ns()
        init = client.initiate(s)
        t1 = time.perf_counter_ns()
        challenge = server.challenge(init)
        t2 = time.perf_counter_ns()
        response = client_respond(client.identity, challenge)
        t3 = time.perf_counter_ns()
        server.verify(response)
        t4 = time.perf_counter_ns()
        core.append((t2 - t1) + (t4 - t3))
        total.append(t4 - t0)
        if timeout is not None and time.perf_counter() - start > timeout and len(core) < trials:
            timed_out = True
            break
    for name, samples in (("protocol", core), ("protocol_encdec", total)):
        if timed_out:
            rows.append(BenchRow(name, label, cfg.n, cfg.w, len(samples), None, "TIMEOUT"))
        else:
            rows.append(BenchRow(name, label, cfg.n, cfg.w, len(samples), int(statistics.median(samples))))
    return rows


def run_bench(
    profile: str = "table1",
    backend: str = "clear",
    n: int = 8,
    w: int = 8,
    trials: int | None = None,
    timeout: float | None = None,
    workers: int = 1,
    token_bits: int = 128,
    threshold: int = 4096,
    params: str = "default",
    seed: int = 0,
) -> BenchReport:
    if profile not in ORDERINGS:
        raise ValueError(f"unknown profile {profile!r}")
    if backend not in BENCH_BACKENDS:
        raise ValueError(f"unknown bench backend {backend!r}")
    trials = trials or DEFAULT_TRIALS[backend]
    rng = random.Random(seed)
    report = BenchReport(profile, env=environment())
    if backend == "clear":
        if profile == "table1":
            table = _clear_table1(n, w, rng)
        else:
            cfg = Config(n=n, w=w, token_bits=token_bits, threshold=threshold, backend="clear")
            table = _clear_table2(cfg, rng)
        report.rows = [_row(name, "clear", n, w, trials, fn, timeout) for name, fn in table.items()]
        return report

    keys = keygen(params, "clear" if backend == "mock" else "fhe")
    if profile == "table1":
        table = _enc_table1(keys, n, w, rng, workers)
        report.rows = [_row(name, backend, n, w, trials, fn, timeout) for name, fn in table.items()]
    else:
        cfg = Config(
            n=n,
            w=w,
            token_bits=token_bits,
            threshold=threshold,
            backend=keys.cloud_key.backend,
            params=params,
        )
        report.rows = _enc_table2(keys, cfg, rng, trials, timeout, workers)
    return report
