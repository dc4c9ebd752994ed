"""Test-protocol evaluation, fault injection and model files."""
from __future__ import annotations

import csv
import hashlib
import io
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .circuit import ArchitectureSpec, build_network, forward
from .codes import AmbiguousCodebookError, Codebook, decode_indices, min_pairwise_distance
from .evolution import EVALUATION, FAULTS, DEFAULT_RANGE, TrainedModel, derive_rng
from .imaging import TEST_DIST, DeformationDistribution, GlyphSet, bitmap_to_inputs, deformed_batch

MAGIC = "MEMNET-MODEL"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TestProtocol:
    __test__ = False  # not a pytest class

    dist: DeformationDistribution = TEST_DIST
    n_sets: int = 10_000
    mode: str | None = None  # overrides dist.mode when given

    def __post_init__(self):
        if self.n_sets < 1:
            raise ValueError("n_sets must be >= 1")
        if self.mode is not None:
            object.__setattr__(self, "dist", replace(self.dist, mode=self.mode))


IDENTITY_PROTOCOL = TestProtocol(DeformationDistribution(), n_sets=1)


@dataclass
class EvalReport:
    accuracy: float
    abe: float
    max_bit_error: int
    rejects: int
    n_samples: int
    confusion: np.ndarray = field(repr=False)  # (true, predicted + reject column)
    letters: tuple[str, ...] = ()
    runtime: float = 0.0
    seed: int = 0
    decode_radius: int = 1

    def to_text(self) -> str:
        lines = [
            f"samples        {self.n_samples}",
            f"accuracy       {self.accuracy:.6f}",
            f"abe            {self.abe:.6f}",
            f"max_bit_error  {self.max_bit_error}",
            f"rejects        {self.rejects}",
            f"decode_radius  {self.decode_radius}",
            f"seed           {self.seed}",
            f"runtime_s      {self.runtime:.2f}",
            "",
            "per-character: correct / rejects / misread",
        ]
        for i, ch in enumerate(self.letters):
            row = self.confusion[i]
            lines.append(f"{ch}  {row[i]:7d} {row[-1]:7d} {row[:-1].sum() - row[i]:7d}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true"] + list(self.letters) + ["reject"])
        for ch, row in zip(self.letters, self.confusion):
            w.writerow([ch] + [int(v) for v in row])
        w.writerow([])
        w.writerow(["accuracy", "abe", "max_bit_error", "rejects", "decode_radius", "n_samples",
                    "seed", "runtime_s"])
        w.writerow([f"{self.accuracy:.6f}", f"{self.abe:.6f}", self.max_bit_error, self.rejects,
                    self.decode_radius, self.n_samples, self.seed, f"{self.runtime:.2f}"])
        return buf.getvalue()


def _evaluate_sets(net, glyphs, cb, dist, seed, indices, radius):
    """Bit errors and decoded indices for a run of test-set indices."""
    errs, preds = [], []
    for k in indices:
        batch = deformed_batch(glyphs, dist, 1, derive_rng(seed, EVALUATION, k))[0]
        out = forward(net, bitmap_to_inputs(batch, net.arch.n_inputs))
        errs.append(np.count_nonzero(out != cb.main_codes, axis=-1))
        preds.append(decode_indices(cb, out, radius))
    return np.array(errs), np.array(preds)


def evaluate(model: TrainedModel, glyphs: GlyphSet, protocol: TestProtocol, seed: int = 0,
             workers: int = 1, rset: np.ndarray | None = None) -> EvalReport:
    """Deform, classify and decode ``n_sets`` copies of the alphabet.

    Test set ``k`` draws from its own stream, so the report does not depend on
    ``workers``.  Rejected codes count as misclassifications.  ``rset``
    substitutes a modified genome (e.g. with injected faults) while keeping the
    model's codebook as the reference.

    Codebooks with spacing below 3 cannot decode at radius 1; they are
    decoded by exact match instead (``decode_radius`` records which).
    """
    t0 = time.perf_counter()
    net = build_network(model.arch, model.rset if rset is None else rset)
    cb = model.codebook
    if not cb.is_unique:
        raise AmbiguousCodebookError("model main codes are not unique")
    radius = 1 if min_pairwise_distance(cb) >= 3 else 0
    n = protocol.n_sets
    chunks = np.array_split(np.arange(n), max(1, min(n, workers * 4)))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda idx: _evaluate_sets(net, glyphs, cb, protocol.dist, seed, idx, radius),
                                  chunks))
    else:
        parts = [_evaluate_sets(net, glyphs, cb, protocol.dist, seed, idx, radius) for idx in chunks]
    errs = np.concatenate([p[0] for p in parts if len(p[0])])
    preds = np.concatenate([p[1] for p in parts if len(p[1])])
    n_chars = len(glyphs)
    truth = np.broadcast_to(np.arange(n_chars), preds.shape)
    confusion = np.zeros((n_chars, n_chars + 1), dtype=np.int64)
    np.add.at(confusion, (truth.ravel(), np.where(preds < 0, n_chars, preds).ravel()), 1)
    return EvalReport(
        accuracy=float(np.mean(preds == truth)),
        abe=float(errs.mean()),
        max_bit_error=int(errs.max()),
        rejects=int(np.count_nonzero(preds < 0)),
        n_samples=int(preds.size),
        confusion=confusion,
        letters=tuple(glyphs.letters),
        runtime=time.perf_counter() - t0,
        seed=seed,
        decode_radius=radius,
    )


# --- faults ---------------------------------------------------------------

FAULT_KINDS = ("open", "short", "random")


@dataclass(frozen=True)
class FaultModel:
    kind: str = "open"
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"fault kind must be one of {FAULT_KINDS}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("fault rate must lie in [0, 1]")


def inject_faults(rset, fm: FaultModel, rng, value_range=DEFAULT_RANGE) -> np.ndarray:
    """Fault each resistor independently with probability ``fm.rate``.

    open: infinite resistance (zero conductance); short: the range minimum;
    random: a fresh log-uniform value.
    """
    out = np.array(rset, dtype=float)
    hit = rng.random(out.shape) < fm.rate
    if fm.kind == "open":
        out[hit] = np.inf
    elif fm.kind == "short":
        out[hit] = value_range[0]
    else:
        lo, hi = np.log(value_range[0]), np.log(value_range[1])
        out[hit] = np.exp(rng.uniform(lo, hi, size=int(hit.sum())))
    return out


@dataclass
class SweepRow:
    rate: float
    mean_acc: float
    std_acc: float
    reps: int


def fault_sweep(model: TrainedModel, glyphs: GlyphSet, protocol: TestProtocol,
                rates: Sequence[float], reps: int, seed: int = 0, kind: str = "open",
                workers: int = 1) -> list[SweepRow]:
    """Accuracy mean and spread over ``reps`` independent fault draws per rate.

    Evaluation uses the same test stream as :func:`evaluate` with ``seed``, so
    the rate-0 row reproduces its accuracy.
    """
    rates = [float(r) for r in rates]
    if any(b < a for a, b in zip(rates, rates[1:])):
        raise ValueError("fault rates must be sorted ascending")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rows = []
    for i, rate in enumerate(rates):
        fm = FaultModel(kind, rate)
        accs = []
        for r in range(reps):
            faulty = inject_faults(model.rset, fm, derive_rng(seed, FAULTS, i, r), model.value_range)
            accs.append(evaluate(model, glyphs, protocol, seed, workers, rset=faulty).accuracy)
        rows.append(SweepRow(rate, float(np.mean(accs)), float(np.std(accs)), reps))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rate", "mean_acc", "std_acc", "reps"])
    for row in rows:
        w.writerow([repr(row.rate), f"{row.mean_acc:.6f}", f"{row.std_acc:.6f}", row.reps])
    return buf.getvalue()


# --- model files ----------------------------------------------------------

class ModelFormatError(ValueError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


class MalformedModelError(ModelFormatError):
    pass


def _num(v: float) -> str:
    return format(float(v), ".17g")


def dumps_model(model: TrainedModel) -> str:
    a = model.arch
    lines = [
        f"{MAGIC} {FORMAT_VERSION}",
        f"arch {a.n_inputs} {','.join(map(str, a.fan_ins))}",
        f"logic_high {_num(a.logic_high)}",
        f"threshold {_num(a.threshold)}",
        f"value_range {_num(model.value_range[0])} {_num(model.value_range[1])}",
        f"seed {model.seed}",
        f"iterations {model.iterations}",
        f"accepted_moves {model.accepted_moves}",
        f"final_abe {_num(model.final_abe)}",
        f"converged {int(model.converged)}",
        f"codebook {len(model.codebook.letters)}",
    ]
    lines += model.codebook.to_text().splitlines()
    lines.append(f"rset {len(model.rset)}")
    lines += [_num(v) for v in model.rset]
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    return body + f"checksum sha256 {digest}\n"


def loads_model(text: str) -> TrainedModel:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise MalformedModelError("not a memnet model file (bad magic)")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise MalformedModelError("unreadable format version") from None
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model format version {version}, expected {FORMAT_VERSION}")
    last = lines[-1].split()
    if len(last) != 3 or last[:2] != ["checksum", "sha256"]:
        raise ChecksumError("checksum line missing (truncated file?)")
    body = "\n".join(lines[:-1]) + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != last[2]:
        raise ChecksumError("checksum mismatch")

    it = iter(lines[1:-1])

    def field_(name, n=1):
        try:
            parts = next(it).split()
        except StopIteration:
            raise MalformedModelError(f"missing {name!r} line") from None
        if parts[0] != name or len(parts) != n + 1:
            raise MalformedModelError(f"expected {name!r} line, got {' '.join(parts)!r}")
        return parts[1:] if n > 1 else parts[1]

    try:
        n_inputs, fans = field_("arch", 2)
        logic_high = float(field_("logic_high"))
        threshold = float(field_("threshold"))
        vr = tuple(float(v) for v in field_("value_range", 2))
        seed = int(field_("seed"))
        iterations = int(field_("iterations"))
        accepted = int(field_("accepted_moves"))
        final_abe = float(field_("final_abe"))
        converged = bool(int(field_("converged")))
        n_codes = int(field_("codebook"))
        cb = Codebook.from_text("\n".join(next(it) for _ in range(n_codes)))
        n_genes = int(field_("rset"))
        rset = np.array([float(next(it)) for _ in range(n_genes)])
        arch = ArchitectureSpec(int(n_inputs), tuple(int(f) for f in fans.split(",")), logic_high, threshold)
    except ModelFormatError:
        raise
    except (ValueError, StopIteration) as exc:
        raise MalformedModelError(f"malformed model file: {exc}") from None
    if next(it, None) is not None:
        raise MalformedModelError("trailing data after rset block")
    build_network(arch, rset)
    return TrainedModel(arch, rset, cb, seed, iterations, accepted, final_abe, converged, vr)


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(dumps_model(model))


def load_model(path) -> TrainedModel:
    return loads_model(Path(path).read_text())
