"""Downstream propagation stack at desk scale.

Click prompt encoding, a bounded FIFO memory bank of pruned token grids
(with the first written frame pinned), a cost-faithful one-block
cross-attention decoder stub, the per-frame propagation loop, simulated
interactive refinement, and FLOP/byte accounting.

The decoder stub deliberately preserves the Q x K x d cost structure that
the efficiency claims rest on, while its mask quality comes from a simple
similarity head: each retained token is compared against content anchors
captured at click positions, with a bimodal threshold when only positive
clicks exist. Pruned-away grid cells receive logit -inf and can never
assert foreground.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from collections.abc import Callable, Sequence

import numpy as np
from scipy import ndimage

from .encoder import EncoderConfig, TokenGrid, encode, sinusoidal_point
from .errors import DataError
from .metrics import jf_frame
from .router import PruneConfig, RouterWeights, fuse, heuristic_score, prune, score
from .scenes import VideoSequence
from .semantic import (
    DEFAULT_RIDGE_LAMBDA,
    EmbedConfig,
    TextEmbedding,
    align_text,
    embed_text,
    fit_text_projection,
)
from .uncertainty import (
    fit_uncertainty_projection,
    mc_uncertainty,
    uncertainty_features,
)

BYTES_PER_VALUE = 4  # interchange width: tokens are stored as float32


@dataclass
class ClickPrompt:
    x: int
    y: int
    polarity: str = "positive"  # positive | negative
    frame_index: int = 0


@dataclass
class PromptEmbedding:
    """Encoded click. ``anchor`` carries the clicked cell's token content
    from the full (pre-pruning) grid so the similarity head can always see
    what was clicked, even when that cell's token was pruned."""

    z: np.ndarray  # (d_v,)
    polarity: str = "positive"
    anchor: np.ndarray | None = None


@dataclass
class BankEntry:
    frame_index: int
    grid: TokenGrid


@dataclass
class MemoryBank:
    capacity: int = 7
    entries: list[BankEntry] = field(default_factory=list)
    byte_count: int = 0

    @property
    def n_tokens(self) -> int:
        return sum(e.grid.n_tokens for e in self.entries)


@dataclass
class MaskPrediction:
    logits: np.ndarray  # (grid_h, grid_w)
    mask: np.ndarray  # (H, W) bool, nearest-neighbor upsampled
    frame_index: int


@dataclass
class CostLedger:
    flops_attention: int = 0
    flops_total: int = 0
    peak_memory_tokens: int = 0
    peak_memory_bytes: int = 0
    wall_clock_ms: dict[str, float] = field(default_factory=dict)

    def add_time(self, stage: str, seconds: float) -> None:
        self.wall_clock_ms[stage] = self.wall_clock_ms.get(stage, 0.0) + seconds * 1e3

    def to_dict(self) -> dict:
        return {
            "flops_attention": int(self.flops_attention),
            "flops_total": int(self.flops_total),
            "peak_memory_tokens": int(self.peak_memory_tokens),
            "peak_memory_bytes": int(self.peak_memory_bytes),
            "wall_clock_ms": dict(self.wall_clock_ms),
        }


@dataclass(frozen=True)
class RefineConfig:
    enabled: bool = True
    threshold: float = 0.80
    max_rounds: int = 10  # per sequence, including the seed-click round
    clicks_per_round: int = 3


def representative_click(mask: np.ndarray, frame_index: int = 0) -> ClickPrompt:
    """Foreground point maximizing the exact Euclidean distance transform
    (distance to nearest background or border pixel); row-major tie-break.

    Unlike the centroid, the returned point always lies on the mask, which
    matters for ring-shaped objects.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DataError("mask must be 2-D")
    if not mask.any():
        raise DataError("empty mask has no representative point")
    padded = np.pad(mask, 1, constant_values=False)
    edt = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    flat = int(np.argmax(edt))  # first max in C order = row-major tie-break
    y, x = divmod(flat, mask.shape[1])
    return ClickPrompt(x=x, y=y, polarity="positive", frame_index=frame_index)


@lru_cache(maxsize=8)
def _polarity_vectors(d_v: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 97])))
    return rng.standard_normal(d_v) * 0.25, rng.standard_normal(d_v) * 0.25


def encode_prompt(
    click: ClickPrompt,
    height: int,
    width: int,
    d_v: int = 768,
    seed: int = 0,
    anchor: np.ndarray | None = None,
) -> PromptEmbedding:
    """Sinusoidal 2-D encoding of the normalized click position plus a
    seeded polarity vector; deterministic."""
    if not (0 <= click.x < width and 0 <= click.y < height):
        raise DataError(f"click ({click.x}, {click.y}) outside {width}x{height} frame")
    pos, neg = _polarity_vectors(d_v, seed)
    if click.polarity not in ("positive", "negative"):
        raise DataError(f"unknown polarity {click.polarity!r}")
    z = sinusoidal_point(click.x / width, click.y / height, d_v)
    z = z + (pos if click.polarity == "positive" else neg)
    return PromptEmbedding(z=z, polarity=click.polarity, anchor=anchor)


class _DecoderWeights:
    """Frozen orthogonal projections: q/k share one rotation (inner
    products preserved) and the output projection inverts the value
    rotation, so the block does real Q/K/V/out work without scrambling
    content similarity."""

    def __init__(self, d_v: int, seed: int):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 131])))
        self.r_qk, _ = np.linalg.qr(rng.standard_normal((d_v, d_v)))
        self.r_v, _ = np.linalg.qr(rng.standard_normal((d_v, d_v)))


@lru_cache(maxsize=4)
def decoder_weights(d_v: int, seed: int) -> _DecoderWeights:
    return _DecoderWeights(d_v, seed)


def _bimodal_threshold(values: np.ndarray) -> float:
    """Exact 1-D Otsu split: the midpoint between the two clusters that
    maximizes between-class variance."""
    v = np.sort(values)
    n = v.size
    if n < 2:
        return v[0] - 1.0
    csum = np.cumsum(v)
    total = csum[-1]
    idx = np.arange(1, n)
    mu0 = csum[:-1] / idx
    mu1 = (total - csum[:-1]) / (n - idx)
    between = idx * (n - idx) * (mu0 - mu1) ** 2
    split = int(np.argmax(between))
    return 0.5 * (v[split] + v[split + 1])


def _cosine_to(anchors: list[np.ndarray], rows: np.ndarray) -> np.ndarray:
    """Max cosine similarity of each row against a set of anchor vectors."""
    a = np.stack(anchors)
    a_norm = np.linalg.norm(a, axis=1)
    r_norm = np.linalg.norm(rows, axis=1)
    denom = np.outer(r_norm, a_norm)
    sims = np.zeros_like(denom)
    ok = denom > 0
    raw = rows @ a.T
    sims[ok] = raw[ok] / denom[ok]
    return sims.max(axis=1)


def decode(
    pruned: TokenGrid,
    prompts: PromptEmbedding | Sequence[PromptEmbedding],
    bank: MemoryBank,
    ledger: CostLedger,
    patch: int = 16,
    seed: int = 0,
) -> MaskPrediction:
    """One cross-attention block over the memory bank plus a similarity
    head. Queries are the current pruned tokens and the prompt embeddings;
    keys/values are all bank tokens plus the prompts. Adds 2*Q*K*d_v
    attention FLOPs to the ledger per call."""
    if pruned.n_tokens == 0:
        raise DataError("decode requires a non-empty pruned grid")
    if isinstance(prompts, PromptEmbedding):
        prompts = [prompts]
    prompts = list(prompts)
    if not prompts:
        raise DataError("decode requires at least one prompt")
    if not bank.entries and pruned.frame_index > 0:
        raise DataError(
            f"empty memory bank at frame {pruned.frame_index} signals protocol misuse"
        )
    d = pruned.d_v
    zs = np.stack([p.z for p in prompts])
    xq = np.vstack([pruned.data, zs])
    xkv = np.vstack([e.grid.data for e in bank.entries] + [zs])
    n_q, n_k = xq.shape[0], xkv.shape[0]

    w = decoder_weights(d, seed)
    q = xq @ w.r_qk
    k = xkv @ w.r_qk
    v = xkv @ w.r_v
    scores = q @ k.T / np.sqrt(d)
    scores -= scores.max(axis=1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=1, keepdims=True)
    mixed = (probs @ v) @ w.r_v.T
    refined = xq + mixed

    ledger.flops_attention += 2 * n_q * n_k * d
    ledger.flops_total += 2 * n_q * n_k * d + 4 * (n_q + n_k) * d * d

    tokens = refined[: pruned.n_tokens]
    pos = [p.anchor if p.anchor is not None else p.z for p in prompts if p.polarity == "positive"]
    negs = [p.anchor if p.anchor is not None else p.z for p in prompts if p.polarity == "negative"]
    if not pos:
        raise DataError("decode requires at least one positive prompt")
    sim_pos = _cosine_to(pos, tokens)
    if negs:
        logits_ret = sim_pos - _cosine_to(negs, tokens)
    elif sim_pos.max() - sim_pos.min() < 1e-9:
        # No contrast: a single dominant cluster reads as all-foreground.
        logits_ret = np.ones_like(sim_pos)
    else:
        logits_ret = sim_pos - _bimodal_threshold(sim_pos)

    n_cells = pruned.grid_h * pruned.grid_w
    src = (
        pruned.source_indices
        if pruned.source_indices is not None
        else np.arange(pruned.n_tokens)
    )
    full = np.full(n_cells, -np.inf)
    full[src] = logits_ret
    logits_grid = full.reshape(pruned.grid_h, pruned.grid_w)
    mask = np.repeat(np.repeat(logits_grid > 0, patch, axis=0), patch, axis=1)
    return MaskPrediction(logits=logits_grid, mask=mask, frame_index=pruned.frame_index)


def memory_write(
    bank: MemoryBank, pruned: TokenGrid, ledger: CostLedger | None = None
) -> MemoryBank:
    """Append a pruned grid; FIFO-evict beyond capacity, never evicting
    the first written (prompt-frame) entry; update byte accounting."""
    bank.entries.append(BankEntry(frame_index=pruned.frame_index, grid=pruned))
    while len(bank.entries) > bank.capacity:
        del bank.entries[1]
    bank.byte_count = sum(
        e.grid.n_tokens * e.grid.d_v * BYTES_PER_VALUE for e in bank.entries
    )
    if ledger is not None:
        ledger.peak_memory_tokens = max(ledger.peak_memory_tokens, bank.n_tokens)
        ledger.peak_memory_bytes = max(ledger.peak_memory_bytes, bank.byte_count)
    return bank


@dataclass(frozen=True)
class PipelineConfig:
    encoder: EncoderConfig = EncoderConfig()
    prune: PruneConfig = PruneConfig()
    mc_passes: int = 5
    base_seed: int = 0
    embed: EmbedConfig = EmbedConfig()
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA
    router: RouterWeights | None = None
    heuristic_beta: float = 0.5
    bank_capacity: int = 7
    decode_seed: int = 0
    signals: str = "text+uncertainty"  # or "text"
    refine: RefineConfig = RefineConfig()

    def __post_init__(self):
        if self.mc_passes < 2:
            raise DataError("mc_passes must be at least 2")
        if self.signals not in ("text", "text+uncertainty"):
            raise DataError(f"unknown signal set {self.signals!r}")


@dataclass
class PropagateResult:
    masks: list[MaskPrediction]
    ledger: CostLedger
    refinement_log: list[dict]
    clicks: list[ClickPrompt]
    rounds_used: int
    retained: list[np.ndarray]
    sigma_norms: list[np.ndarray]
    fps: float = 0.0


def error_clicks(
    mask: np.ndarray, gt: np.ndarray, max_clicks: int, frame_index: int
) -> list[ClickPrompt]:
    """Corrective clicks: the EDT-representative point of each connected
    false-negative (positive click) and false-positive (negative click)
    region, largest area first, capped at max_clicks."""
    gt = np.asarray(gt, dtype=bool)
    fn = gt & ~mask
    fp = mask & ~gt
    candidates: list[tuple[int, int, str, np.ndarray]] = []
    for which, (region, polarity) in enumerate([(fn, "positive"), (fp, "negative")]):
        labels, count = ndimage.label(region)
        for lab in range(1, count + 1):
            comp = labels == lab
            candidates.append((int(comp.sum()), which, polarity, comp))
    candidates.sort(key=lambda c: (-c[0], c[1]))
    clicks = []
    for _, _, polarity, comp in candidates[:max_clicks]:
        pt = representative_click(comp, frame_index)
        clicks.append(ClickPrompt(x=pt.x, y=pt.y, polarity=polarity, frame_index=frame_index))
    return clicks


@dataclass
class RefinementOutcome:
    clicks: list[ClickPrompt]
    masks: list[np.ndarray]
    rounds_used: int
    log: list[dict]


def simulate_refinement(
    masks: Sequence[np.ndarray],
    ground_truth: Sequence[np.ndarray | None],
    cfg: RefineConfig,
    redecode: Callable[[int, list[ClickPrompt]], np.ndarray],
    rounds_used: int = 1,
) -> RefinementOutcome:
    """Threshold-triggered click injection over a run of frames.

    For each frame whose J&F falls below cfg.threshold, inject up to
    cfg.clicks_per_round corrective clicks, ask ``redecode`` for a new
    pixel mask, and repeat until the frame clears the threshold or the
    per-sequence round budget (which includes the seed-click round) runs
    out. Returns every injected click and the updated masks.
    """
    out_masks = [np.asarray(m, dtype=bool) for m in masks]
    clicks: list[ClickPrompt] = []
    log: list[dict] = []
    for t, gt in enumerate(ground_truth):
        if gt is None:
            continue
        jf = jf_frame(out_masks[t], gt)
        while jf < cfg.threshold and rounds_used < cfg.max_rounds:
            rounds_used += 1
            new = error_clicks(out_masks[t], gt, cfg.clicks_per_round, t)
            if not new:
                break
            clicks.extend(new)
            out_masks[t] = np.asarray(redecode(t, new), dtype=bool)
            new_jf = jf_frame(out_masks[t], gt)
            log.append(
                {
                    "frame": t,
                    "round": rounds_used,
                    "clicks": [
                        {"x": c.x, "y": c.y, "polarity": c.polarity} for c in new
                    ],
                    "jf_before": float(jf),
                    "jf_after": float(new_jf),
                }
            )
            jf = new_jf
    return RefinementOutcome(clicks=clicks, masks=out_masks, rounds_used=rounds_used, log=log)


def _cell_index(click: ClickPrompt, grid: TokenGrid, patch: int) -> int:
    return (click.y // patch) * grid.grid_w + (click.x // patch)


def propagate(
    video: VideoSequence,
    prompt: str | TextEmbedding,
    cfg: PipelineConfig = PipelineConfig(),
    seed_click: ClickPrompt | None = None,
) -> PropagateResult:
    """Full per-frame loop: embed text once, fit the semantic projection
    on the first frame, then per frame run the encoder, T stochastic
    passes, uncertainty projection, fusion, scoring, top-k pruning,
    decoding against the memory bank, optional refinement, and a memory
    write. Deterministic end to end given all seeds."""
    if len(video.frames) == 0:
        raise DataError("empty video")
    enc = cfg.encoder
    patch = enc.patch
    height, width = video.frames[0].shape[:2]
    ledger = CostLedger()
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    e_text = prompt if isinstance(prompt, TextEmbedding) else embed_text(prompt, cfg.embed)
    ledger.add_time("embed_text", time.perf_counter() - t0)

    t0 = time.perf_counter()
    first_grid = encode(video.frames[0], enc, frame_index=0)
    proj = fit_text_projection(first_grid, e_text, cfg.ridge_lambda)
    e_aligned = align_text(proj, e_text)
    ledger.add_time("fit_semantic", time.perf_counter() - t0)

    if seed_click is None:
        gt0 = video.gt_masks[0]
        if gt0 is None:
            raise DataError("first frame needs a ground-truth mask or an explicit seed click")
        seed_click = representative_click(gt0, frame_index=0)
    clicks: list[ClickPrompt] = [seed_click]
    anchor0 = first_grid.data[_cell_index(seed_click, first_grid, patch)]
    prompts: list[PromptEmbedding] = [
        encode_prompt(seed_click, height, width, enc.d_v, cfg.decode_seed, anchor=anchor0)
    ]

    bank = MemoryBank(capacity=cfg.bank_capacity)
    masks: list[MaskPrediction] = []
    retained: list[np.ndarray] = []
    sigma_norms: list[np.ndarray] = []
    refinement_log: list[dict] = []
    rounds_used = 1  # the seed click consumes the first round

    for t, frame in enumerate(video.frames):
        t0 = time.perf_counter()
        grid = first_grid if t == 0 else encode(frame, enc, frame_index=t)
        ledger.add_time("encode", time.perf_counter() - t0)

        t0 = time.perf_counter()
        if cfg.signals == "text+uncertainty":
            umap = mc_uncertainty(
                frame, enc, cfg.mc_passes, cfg.base_seed + t * cfg.mc_passes
            )
            sigma = umap.sigma_norm
        else:
            # Text-only runs never read the stochastic taps; skip the passes.
            sigma = np.zeros(grid.n_tokens)
        uproj = fit_uncertainty_projection(grid, sigma, cfg.ridge_lambda)
        u_feat = uncertainty_features(sigma, uproj)
        ledger.add_time("uncertainty", time.perf_counter() - t0)
        sigma_norms.append(sigma)

        t0 = time.perf_counter()
        if cfg.router is not None:
            alpha = score(fuse(grid, e_aligned, u_feat), cfg.router)
        else:
            beta = cfg.heuristic_beta if cfg.signals == "text+uncertainty" else 0.0
            alpha = heuristic_score(grid, e_aligned, sigma, beta)
        idx, pruned = prune(grid, alpha, cfg.prune)
        ledger.add_time("score_prune", time.perf_counter() - t0)
        retained.append(idx)

        t0 = time.perf_counter()
        pred = decode(pruned, prompts, bank, ledger, patch, cfg.decode_seed)
        ledger.add_time("decode", time.perf_counter() - t0)

        gt = video.gt_masks[t] if t < len(video.gt_masks) else None
        if cfg.refine.enabled and gt is not None:
            t0 = time.perf_counter()

            def redecode(_frame_idx: int, new_clicks: list[ClickPrompt]) -> np.ndarray:
                for c in new_clicks:
                    anchor = grid.data[_cell_index(c, grid, patch)]
                    prompts.append(
                        encode_prompt(c, height, width, enc.d_v, cfg.decode_seed, anchor=anchor)
                    )
                return decode(pruned, prompts, bank, ledger, patch, cfg.decode_seed).mask

            outcome = simulate_refinement([pred.mask], [gt], cfg.refine, redecode, rounds_used)
            rounds_used = outcome.rounds_used
            clicks.extend(outcome.clicks)
            for entry in outcome.log:
                entry["frame"] = t
                refinement_log.append(entry)
            pred = replace(pred, mask=outcome.masks[0])
            ledger.add_time("refine", time.perf_counter() - t0)
        masks.append(pred)

        t0 = time.perf_counter()
        memory_write(bank, pruned, ledger)
        ledger.add_time("memory_write", time.perf_counter() - t0)

    total = time.perf_counter() - t_start
    ledger.add_time("total", total)
    return PropagateResult(
        masks=masks,
        ledger=ledger,
        refinement_log=refinement_log,
        clicks=clicks,
        rounds_used=rounds_used,
        retained=retained,
        sigma_norms=sigma_norms,
        fps=len(video.frames) / total if total > 0 else 0.0,
    )
