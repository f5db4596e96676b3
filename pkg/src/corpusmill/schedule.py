"""Learning-rate schedules and transformer parameter accounting.

The pretraining schedule is trapezoidal over token counts: linear
warmup, constant plateau, linear anneal to a floor, then linear decay to
zero. The SFT schedule is linear warmup into a cosine half-wave over
steps. Parameter counts assume a SwiGLU decoder with grouped-query
attention, RMSNorm gains and untied embeddings, no biases.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .records import DataError


class RangeError(DataError):
    pass


class ArchError(DataError):
    pass


@dataclass(frozen=True)
class TrapezoidSchedule:
    peak_lr: float
    warmup_tokens: int
    constant_until_tokens: int
    anneal_tokens: int
    decay_tokens: int
    floor_fraction: float = 0.1
    # floor_lr normally derives from floor_fraction; pin it explicitly when
    # the target floor must be hit bit-exactly (0.1 * 1.5e-4 != 1.5e-5 in
    # binary floating point).
    floor_lr: float | None = None

    @property
    def floor(self) -> float:
        return self.peak_lr * self.floor_fraction if self.floor_lr is None else self.floor_lr

    @property
    def anneal_end(self) -> int:
        return self.constant_until_tokens + self.anneal_tokens

    @property
    def total_tokens(self) -> int:
        return self.anneal_end + self.decay_tokens

    def validate(self) -> list[str]:
        violations = []
        if self.peak_lr <= 0:
            violations.append("schedule.peak_lr")
        if self.warmup_tokens <= 0:
            violations.append("schedule.warmup_tokens")
        if self.constant_until_tokens < self.warmup_tokens:
            violations.append("schedule.constant_until_tokens")
        if self.anneal_tokens <= 0:
            violations.append("schedule.anneal_tokens")
        if self.decay_tokens <= 0:
            violations.append("schedule.decay_tokens")
        if not 0.0 < self.floor_fraction < 1.0:
            violations.append("schedule.floor_fraction")
        return violations


@dataclass(frozen=True)
class CosineSchedule:
    max_lr: float
    warmup_steps: int
    total_steps: int
    min_lr: float = 0.0

    def validate(self) -> list[str]:
        violations = []
        if self.max_lr <= 0:
            violations.append("cosine.max_lr")
        if self.warmup_steps <= 0:
            violations.append("cosine.warmup_steps")
        if self.total_steps <= self.warmup_steps:
            violations.append("cosine.total_steps")
        if self.min_lr < 0:
            violations.append("cosine.min_lr")
        return violations


def lr_at(s: TrapezoidSchedule, tokens: float) -> float:
    """Learning rate after `tokens` tokens, piecewise linear and continuous."""
    if tokens < 0 or tokens > s.total_tokens:
        raise RangeError(f"token position {tokens} outside [0, {s.total_tokens}]")
    if tokens <= s.warmup_tokens:
        return s.peak_lr * (tokens / s.warmup_tokens)
    if tokens <= s.constant_until_tokens:
        return s.peak_lr
    if tokens <= s.anneal_end:
        frac = (tokens - s.constant_until_tokens) / s.anneal_tokens
        return s.peak_lr + (s.floor - s.peak_lr) * frac
    frac = (tokens - s.anneal_end) / s.decay_tokens
    return s.floor * (1.0 - frac)


def cosine_lr_at(s: CosineSchedule, step: float) -> float:
    """Linear warmup to max_lr, then cosine half-wave down to min_lr."""
    if step < 0 or step > s.total_steps:
        raise RangeError(f"step {step} outside [0, {s.total_steps}]")
    if step <= s.warmup_steps:
        return s.max_lr * (step / s.warmup_steps)
    progress = (step - s.warmup_steps) / (s.total_steps - s.warmup_steps)
    return s.min_lr + 0.5 * (s.max_lr - s.min_lr) * (1.0 + math.cos(math.pi * progress))


def rope_theta_for_phase(phase: int) -> float:
    """RoPE base per training phase; raised for the long-context final phase."""
    if phase not in (1, 2, 3):
        raise RangeError(f"phase {phase} not in {{1,2,3}}")
    return 1e6 if phase == 3 else 1e4


def seq_len_for_phase(phase: int) -> int:
    if phase not in (1, 2, 3):
        raise RangeError(f"phase {phase} not in {{1,2,3}}")
    return 32768 if phase == 3 else 4096


def phase_at(s: TrapezoidSchedule, tokens: float) -> int:
    """Phase 1 = warmup+plateau, phase 2 = anneal, phase 3 = final decay."""
    if tokens < s.constant_until_tokens:
        return 1
    if tokens < s.anneal_end:
        return 2
    return 3


@dataclass(frozen=True)
class ArchConfig:
    layers: int
    d_model: int
    ffn_hidden: int
    n_heads: int
    n_kv_heads: int
    vocab: int
    tied_embeddings: bool = False
    rope_theta: float = 1e4
    seq_len: int = 4096

    def validate(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ArchError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.n_heads % self.n_kv_heads != 0:
            raise ArchError(f"n_heads {self.n_heads} not divisible by n_kv_heads {self.n_kv_heads}")


@dataclass(frozen=True)
class ParamBreakdown:
    embedding: int
    lm_head: int
    non_embedding: int

    @property
    def total(self) -> int:
        return self.embedding + self.lm_head + self.non_embedding


def param_count(a: ArchConfig) -> ParamBreakdown:
    """Exact parameter accounting for the GQA + gated-FFN decoder stack.

    Per layer: Q and output projections (2 d^2), K and V projections
    (2 d kv_dim), gated FFN (3 d ffn), two RMSNorm gains (2 d); plus one
    final gain. Embedding and LM head are vocab*d each when untied.
    """
    a.validate()
    head_dim = a.d_model // a.n_heads
    kv_dim = head_dim * a.n_kv_heads
    per_layer = (
        2 * a.d_model * a.d_model
        + 2 * a.d_model * kv_dim
        + 3 * a.d_model * a.ffn_hidden
        + 2 * a.d_model
    )
    non_embedding = a.layers * per_layer + a.d_model
    embedding = a.vocab * a.d_model
    lm_head = 0 if a.tied_embeddings else embedding
    return ParamBreakdown(embedding, lm_head, non_embedding)


# Table-of-presets for the three released model sizes.
ARCH_PRESETS: dict[str, ArchConfig] = {
    "1.7b": ArchConfig(layers=24, d_model=2048, ffn_hidden=5632, n_heads=16, n_kv_heads=8,
                       vocab=128000, rope_theta=1e4, seq_len=4096),
    "9b": ArchConfig(layers=42, d_model=4096, ffn_hidden=12288, n_heads=32, n_kv_heads=8,
                     vocab=128000, rope_theta=1e4, seq_len=4096),
    "22b": ArchConfig(layers=54, d_model=6144, ffn_hidden=16384, n_heads=48, n_kv_heads=8,
                      vocab=128000, rope_theta=1e6, seq_len=32768),
}

# Two trapezoid presets ship because the training report's prose and its
# hyperparameter table disagree on the peak LR (1.5e-4 vs 3e-4); the
# floor is pinned explicitly so the 10%-of-peak anchor is bit-exact.
TRAPEZOID_PRESETS: dict[str, TrapezoidSchedule] = {
    "pretrain-22b": TrapezoidSchedule(
        peak_lr=1.5e-4,
        warmup_tokens=int(3.6e11),
        constant_until_tokens=int(3.6e12),
        anneal_tokens=int(4.0e11),
        decay_tokens=int(4.0e11),
        floor_lr=1.5e-5,
    ),
    "pretrain-22b-tablemax": TrapezoidSchedule(
        peak_lr=3.0e-4,
        warmup_tokens=int(3.6e11),
        constant_until_tokens=int(3.6e12),
        anneal_tokens=int(4.0e11),
        decay_tokens=int(4.0e11),
        floor_lr=3.0e-5,
    ),
}


def sft_cosine_preset(total_steps: int = 1125) -> CosineSchedule:
    return CosineSchedule(max_lr=1e-5, warmup_steps=125, total_steps=total_steps)


def emit_schedule_table(s: TrapezoidSchedule, stride_tokens: int) -> list[tuple[int, float, int, float, int]]:
    """Rows (tokens, lr, phase, rope_theta, seq_len) at stride multiples plus breakpoints."""
    if stride_tokens <= 0:
        raise RangeError("stride must be positive")
    points = set(range(0, s.total_tokens + 1, stride_tokens))
    points.update([0, s.warmup_tokens, s.constant_until_tokens, s.anneal_end, s.total_tokens])
    rows = []
    for tokens in sorted(points):
        phase = phase_at(s, tokens)
        rows.append((tokens, lr_at(s, tokens), phase, rope_theta_for_phase(phase), seq_len_for_phase(phase)))
    return rows


def schedule_table_csv(rows: list[tuple[int, float, int, float, int]]) -> str:
    """CSV with lr written via repr so values parse back bit-exact."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tokens", "lr", "phase", "rope_theta", "seq_len"])
    for tokens, lr, phase, theta, seq_len in rows:
        writer.writerow([tokens, repr(lr), phase, repr(theta), seq_len])
    return buf.getvalue()
