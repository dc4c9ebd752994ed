"""Three-level evolutionary training: selection, genetic and refine stages.

Every stochastic step draws from a stream derived from ``(seed, stage, index)``
so results do not depend on evaluation order.  Fitness is the average bit
error per character (ABE): the mean Hamming distance, in bits, between the
network's output for a deformed glyph and that glyph's main code.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .circuit import (
    ArchitectureSpec, build_network, forward, forward_population,
    output_tree_gene_indices, rset_len,
)
from .codes import Codebook, extract_main_codes, spacing_of
from .imaging import (
    TRAIN_DIST, DeformationDistribution, GlyphSet, apply_salt_pepper,
    bitmap_to_inputs, deformed_batch,
)

logger = logging.getLogger(__name__)

DEFAULT_RANGE = (1.0, 1e4)

# stream keys
SELECTION, GENETIC, REFINE, EVALUATION, FAULTS = 1, 2, 3, 4, 5


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    # The key count is mixed in because SeedSequence pads entropy with zeros,
    # which would make (k,) and (k, 0) the same stream.
    return np.random.default_rng(np.random.SeedSequence([int(seed), len(keys), *map(int, keys)]))


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class SelectionStarvation(StageError):
    def __init__(self, drawn: int, passed: int, target: int):
        rate = passed / drawn if drawn else 0.0
        super().__init__(
            "selection",
            f"selection starvation: {passed}/{target} unique-code Rsets after "
            f"{drawn} draws (pass rate {rate:.3g})",
        )
        self.drawn, self.passed, self.target = drawn, passed, target


@dataclass(frozen=True)
class SelectionConfig:
    pool_target: int = 400
    keep: int = 5
    noise_p: float = 0.12
    trials_per_char: int = 4
    sample_cap: int = 2_000_000
    chunk: int = 1000

    def __post_init__(self):
        if not 1 <= self.keep <= self.pool_target:
            raise ValueError("selection keep must be in [1, pool_target]")
        if self.sample_cap < self.pool_target:
            raise ValueError("sample_cap must be >= pool_target")
        if not 0 <= self.noise_p <= 1 or self.trials_per_char < 1 or self.chunk < 1:
            raise ValueError("invalid selection noise/trials/chunk")


@dataclass(frozen=True)
class GeneticConfig:
    offspring: int = 800
    keep: int = 5
    generations: int = 1

    def __post_init__(self):
        if not 1 <= self.keep <= self.offspring:
            raise ValueError("genetic keep must be in [1, offspring]")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")


@dataclass(frozen=True)
class RefineConfig:
    train_dist: DeformationDistribution = TRAIN_DIST
    batch: int = 4
    resample_prob: float = 0.25
    immune_batches: int = 3
    immune_trials: int = 16
    min_spacing: int = 3
    max_iters: int = 5000

    def __post_init__(self):
        if self.min_spacing < 1 or self.max_iters < 1:
            raise ValueError("min_spacing and max_iters must be >= 1")
        if not 0 < self.resample_prob <= 1:
            raise ValueError("resample_prob must be in (0, 1]")
        if self.batch < 1 or self.immune_batches < 1 or self.immune_trials < 1:
            raise ValueError("batch sizes must be >= 1")


@dataclass
class Candidate:
    rset: np.ndarray
    abe: float
    codebook: Codebook
    index: int = 0
    parents: tuple[int, int] | None = None
    points: tuple[int, int] | None = None


@dataclass
class TrainedModel:
    arch: ArchitectureSpec
    rset: np.ndarray
    codebook: Codebook
    seed: int = 0
    iterations: int = 0
    accepted_moves: int = 0
    final_abe: float = 0.0
    converged: bool = True
    value_range: tuple[float, float] = DEFAULT_RANGE
    log: list[str] = field(default_factory=list, repr=False)

    @property
    def network(self):
        return build_network(self.arch, self.rset)

    @property
    def min_spacing(self) -> int:
        return spacing_of(self.codebook.main_codes)


def log_record(stage: str, iteration: int, abe: float, min_spacing: int, seed: int, **extra) -> str:
    fields = [f"stage={stage}", f"iter={iteration}", f"abe={abe:.6f}",
              f"min_spacing={min_spacing}", f"seed={seed}"]
    fields += [f"{k}={v}" for k, v in extra.items()]
    return " ".join(fields)


# --- genomes --------------------------------------------------------------

def _check_range(value_range):
    lo, hi = value_range
    if not 0 < lo < hi or not math.isfinite(hi):
        raise ValueError(f"invalid resistance range {value_range}")
    return math.log(lo), math.log(hi)


def random_rsets(arch: ArchitectureSpec, n: int, value_range, rng) -> np.ndarray:
    lo, hi = _check_range(value_range)
    return np.exp(rng.uniform(lo, hi, size=(n, rset_len(arch))))


def random_rset(arch: ArchitectureSpec, value_range=DEFAULT_RANGE, rng=None) -> np.ndarray:
    """Independent log-uniform resistances over ``value_range``."""
    rng = np.random.default_rng() if rng is None else rng
    return random_rsets(arch, 1, value_range, rng)[0]


def crossover_points(length: int, rng) -> tuple[int, int]:
    i, j = sorted(int(v) for v in rng.integers(0, length + 1, size=2))
    return i, j


def two_point_crossover(a, b, rng=None, points: tuple[int, int] | None = None) -> np.ndarray:
    """``a[:i] + b[i:j] + a[j:]``; no value is created, only copied by locus."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"parent lengths differ: {a.shape} vs {b.shape}")
    i, j = points if points is not None else crossover_points(len(a), rng)
    if not 0 <= i <= j <= len(a):
        raise ValueError(f"bad crossover points {(i, j)}")
    child = a.copy()
    child[i:j] = b[i:j]
    return child


# --- fitness --------------------------------------------------------------

def _unique_rows(codes: np.ndarray) -> np.ndarray:
    """Per genome, whether its ``(n_chars, bits)`` codes are all distinct."""
    weights = 1 << np.arange(codes.shape[-1], dtype=np.int64)
    packed = (codes.astype(np.int64) * weights).sum(-1)
    packed.sort(axis=-1)
    return ~np.any(packed[..., 1:] == packed[..., :-1], axis=-1)


def noisy_batch(glyphs: GlyphSet, p: float, trials: int, rng) -> np.ndarray:
    stack = np.broadcast_to(glyphs.bitmaps, (trials,) + glyphs.bitmaps.shape)
    return apply_salt_pepper(stack, p, rng)


def population_scores(arch, rsets, glyphs: GlyphSet, batch: np.ndarray, chunk: int = 50):
    """Main codes and ABE of each genome against one shared deformed batch."""
    clean = bitmap_to_inputs(glyphs.bitmaps, arch.n_inputs)
    x = bitmap_to_inputs(batch, arch.n_inputs).reshape(-1, arch.n_inputs)
    trials = batch.shape[0]
    mains, abes = [], []
    for s in range(0, len(rsets), chunk):
        part = rsets[s:s + chunk]
        main = forward_population(arch, part, clean)
        out = forward_population(arch, part, x).reshape(len(part), trials, len(glyphs), -1)
        mains.append(main)
        abes.append(np.count_nonzero(out != main[:, None], axis=-1).mean(axis=(1, 2)))
    return np.concatenate(mains), np.concatenate(abes)


def _errors(net, glyphs, cb, batch):
    x = bitmap_to_inputs(batch, net.arch.n_inputs)
    out = forward(net, x)
    return out != cb.main_codes  # (trials, chars, bits)


def per_output_bit_error(net, glyphs: GlyphSet, cb: Codebook, deformer: DeformationDistribution,
                         trials: int, rng) -> np.ndarray:
    """Error rate of each output bit over characters and trials; sums to the ABE."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    batch = deformed_batch(glyphs, deformer, trials, rng)
    return _errors(net, glyphs, cb, batch).mean(axis=(0, 1))


def abe(net, glyphs: GlyphSet, cb: Codebook, deformer: DeformationDistribution,
        trials_per_char: int, rng) -> float:
    """Average bit error per character, in bits (range ``[0, n_outputs]``)."""
    if trials_per_char < 1:
        raise ValueError("trials_per_char must be >= 1")
    batch = deformed_batch(glyphs, deformer, trials_per_char, rng)
    return float(_errors(net, glyphs, cb, batch).sum(-1).mean())


def _rank(abes: np.ndarray, eligible: np.ndarray | None = None) -> np.ndarray:
    order = np.argsort(abes, kind="stable")
    if eligible is not None:
        order = order[eligible[order]]
    return order


# --- stages ---------------------------------------------------------------

def selection_stage(arch: ArchitectureSpec, glyphs: GlyphSet, cfg: SelectionConfig, seed: int,
                    value_range=DEFAULT_RANGE, log: list[str] | None = None) -> list[Candidate]:
    """Keep the lowest-ABE Rsets among the first ``pool_target`` with unique codes."""
    draw_rng = derive_rng(seed, SELECTION, 0)
    clean = bitmap_to_inputs(glyphs.bitmaps, arch.n_inputs)
    pool: list[np.ndarray] = []
    drawn = 0
    while len(pool) < cfg.pool_target:
        if drawn >= cfg.sample_cap:
            raise SelectionStarvation(drawn, len(pool), cfg.pool_target)
        n = min(cfg.chunk, cfg.sample_cap - drawn)
        rsets = random_rsets(arch, n, value_range, draw_rng)
        drawn += n
        unique = _unique_rows(forward_population(arch, rsets, clean))
        pool.extend(rsets[unique][: cfg.pool_target - len(pool)])
    logger.info("selection: %d unique-code Rsets from %d draws", len(pool), drawn)

    batch = noisy_batch(glyphs, cfg.noise_p, cfg.trials_per_char, derive_rng(seed, SELECTION, 1))
    pool_arr = np.array(pool)
    mains, abes = population_scores(arch, pool_arr, glyphs, batch)
    picked = _rank(abes)[: cfg.keep]
    out = [Candidate(pool_arr[i].copy(), float(abes[i]), Codebook(mains[i], glyphs.letters), int(i))
           for i in picked]
    if log is not None:
        log.append(log_record("selection", 0, out[0].abe, spacing_of(out[0].codebook.main_codes),
                              seed, drawn=drawn, pass_rate=f"{cfg.pool_target / drawn:.3g}"))
        for rank, c in enumerate(out):
            log.append(log_record("selection", rank, c.abe, spacing_of(c.codebook.main_codes),
                                  seed, candidate=c.index))
    return out


def genetic_stage(parents: Sequence[Candidate], arch: ArchitectureSpec, glyphs: GlyphSet,
                  gcfg: GeneticConfig, scfg: SelectionConfig, seed: int,
                  log: list[str] | None = None) -> list[Candidate]:
    """Two-point crossover without mutation; rank the offspring by noisy ABE.

    Only offspring with unique main codes are eligible.  Should fewer than
    ``keep`` qualify, the best parents fill the remaining places.
    """
    lengths = {len(p.rset) for p in parents}
    if len(parents) < 2 or len(lengths) != 1:
        raise StageError("genetic", "need >= 2 parents of equal genome length")
    length = lengths.pop()
    current = list(parents)
    for gen in range(gcfg.generations):
        rng = derive_rng(seed, GENETIC, gen)
        children, pairs, points = [], [], []
        for _ in range(gcfg.offspring):
            ia, ib = (int(v) for v in rng.choice(len(current), size=2, replace=False))
            ij = crossover_points(length, rng)
            children.append(two_point_crossover(current[ia].rset, current[ib].rset, points=ij))
            pairs.append((ia, ib))
            points.append(ij)
        children = np.array(children)
        batch = noisy_batch(glyphs, scfg.noise_p, scfg.trials_per_char, derive_rng(seed, GENETIC, gen, 1))
        mains, abes = population_scores(arch, children, glyphs, batch)
        eligible = _unique_rows(mains)
        picked = _rank(abes, eligible)[: gcfg.keep]
        nxt = [Candidate(children[i], float(abes[i]), Codebook(mains[i], glyphs.letters), int(i),
                         pairs[i], points[i]) for i in picked]
        if len(nxt) < gcfg.keep:
            logger.warning("genetic: only %d eligible offspring, filling with parents", len(nxt))
            nxt += sorted(current, key=lambda c: c.abe)[: gcfg.keep - len(nxt)]
            nxt.sort(key=lambda c: c.abe)
        if log is not None:
            for rank, c in enumerate(nxt):
                log.append(log_record("genetic", rank, c.abe, spacing_of(c.codebook.main_codes),
                                      seed, generation=gen, eligible=int(eligible.sum())))
        current = nxt
    return current


def _key(abe_value: float, spacing: int, min_spacing: int) -> tuple[int, float]:
    return max(0, min_spacing - spacing), abe_value


def refine_stage(start: Candidate, arch: ArchitectureSpec, glyphs: GlyphSet, rcfg: RefineConfig,
                 seed: int, value_range=DEFAULT_RANGE, stream: int = 0,
                 log: list[str] | None = None,
                 callback: Callable[[int, np.ndarray, np.ndarray, np.ndarray, bool], None] | None = None,
                 ) -> TrainedModel:
    """Localised random updates of the worst output trees until immune.

    Each iteration draws a fresh deformed batch, finds the output bit(s) with
    the highest error rate, resamples a fraction of the genes in those output
    trees, and keeps the move unless ``(spacing deficit, ABE)`` on that batch
    gets worse.  Immunity means zero ABE on ``immune_batches`` consecutive
    fresh batches with spacing at least ``min_spacing``.

    ``callback(iteration, before, after, worst_outputs, accepted)`` is called
    after every move.
    """
    lo, hi = _check_range(value_range)
    rng = derive_rng(seed, REFINE, stream)
    trees = [output_tree_gene_indices(arch, k) for k in range(arch.n_outputs)]
    rset = np.array(start.rset, dtype=float)
    net = build_network(arch, rset)
    cb = extract_main_codes(net, glyphs)
    spacing = spacing_of(cb.main_codes)
    accepted = 0
    converged = False
    log = log if log is not None else []

    def immune() -> bool:
        for _ in range(rcfg.immune_batches):
            batch = deformed_batch(glyphs, rcfg.train_dist, rcfg.immune_trials, rng)
            if _errors(net, glyphs, cb, batch).any():
                return False
        return True

    it = 0
    for it in range(rcfg.max_iters):
        batch = deformed_batch(glyphs, rcfg.train_dist, rcfg.batch, rng)
        err = _errors(net, glyphs, cb, batch)
        cur_abe = float(err.sum(-1).mean())
        if cur_abe == 0 and spacing >= rcfg.min_spacing and immune():
            converged = True
            break
        rate = err.mean(axis=(0, 1))
        worst = np.flatnonzero(rate == rate.max())
        genes = np.concatenate([trees[k] for k in worst])
        mask = rng.random(genes.size) < rcfg.resample_prob
        if not mask.any():
            mask[rng.integers(genes.size)] = True
        cand = rset.copy()
        cand[genes[mask]] = np.exp(rng.uniform(lo, hi, size=int(mask.sum())))
        cand_net = build_network(arch, cand)
        cand_cb = extract_main_codes(cand_net, glyphs)
        cand_spacing = spacing_of(cand_cb.main_codes)
        cand_abe = float(_errors(cand_net, glyphs, cand_cb, batch).sum(-1).mean())
        ok = _key(cand_abe, cand_spacing, rcfg.min_spacing) <= _key(cur_abe, spacing, rcfg.min_spacing)
        if callback is not None:
            callback(it, rset, cand, worst, ok)
        if ok:
            accepted += 1
            log.append(log_record("refine", it, cand_abe, cand_spacing, seed, stream=stream,
                                  outputs=",".join(map(str, worst)), prev_abe=f"{cur_abe:.6f}",
                                  prev_spacing=spacing))
            rset, net, cb, spacing = cand, cand_net, cand_cb, cand_spacing
    else:
        it = rcfg.max_iters

    final = deformed_batch(glyphs, rcfg.train_dist, rcfg.immune_trials, rng)
    final_abe = float(_errors(net, glyphs, cb, final).sum(-1).mean())
    log.append(log_record("refine", it, final_abe, spacing, seed, stream=stream,
                          status="converged" if converged else "not-converged",
                          accepted=accepted))
    return TrainedModel(arch, rset, cb, seed, it, accepted, final_abe, converged,
                        tuple(value_range), log)


def train(arch: ArchitectureSpec, glyphs: GlyphSet, seed: int,
          selection: SelectionConfig = SelectionConfig(),
          genetic: GeneticConfig = GeneticConfig(),
          refine: RefineConfig = RefineConfig(),
          value_range=DEFAULT_RANGE) -> TrainedModel:
    """Selection, then genetic, then refine each survivor until one converges.

    Without a converged survivor the best by ``(spacing deficit, final ABE)``
    is returned with ``converged=False``.
    """
    log: list[str] = []
    chosen = selection_stage(arch, glyphs, selection, seed, value_range, log)
    survivors = genetic_stage(chosen, arch, glyphs, genetic, selection, seed, log)
    results = []
    for k, cand in enumerate(survivors):
        try:
            model = refine_stage(cand, arch, glyphs, refine, seed, value_range, stream=k, log=log)
        except ValueError as exc:
            raise StageError("refine", str(exc)) from exc
        results.append(model)
        logger.info("refine %d: converged=%s abe=%.4f spacing=%d", k, model.converged,
                    model.final_abe, model.min_spacing)
        if model.converged:
            break
    best = min(results, key=lambda m: (not m.converged,) + _key(m.final_abe, m.min_spacing, refine.min_spacing))
    return replace(best, log=log)
