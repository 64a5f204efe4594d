"""Bit-exact textual serialization of cascades and recognizer models.

Files start with the magic+version line "VJBP1" and a section name
(CASCADE or RECOGNIZER). Every real is written as C99 lowercase
hexadecimal floating point (via float.hex), so save/load round trips are
bitwise exact; integers are decimal; one record per line in a fixed
order.
"""

from __future__ import annotations

import numpy as np

from . import bpnn
from .boosting import (
    Cascade,
    CascadeTrainingMeta,
    StageRates,
    StrongClassifier,
    WeakClassifier,
)
from .haar import HaarFeature, WindowSpec, kind_from_token
from .recognizer import DescriptorConfig, IdentityCode, RecognizerModel

MAGIC = "VJBP"
VERSION = "1"


class ModelFormatError(ValueError):
    """Malformed model file; carries the 1-based offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class VersionMismatchError(ValueError):
    """File carries a VJBP version this build does not read."""


def _hex(x: float) -> str:
    return float(x).hex()


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    @property
    def line_no(self) -> int:
        return self.pos  # 1-based number of the line just read

    def next(self) -> list[str]:
        if self.pos >= len(self.lines):
            raise ModelFormatError("unexpected end of file", self.pos + 1)
        self.pos += 1
        return self.lines[self.pos - 1].split()

    def record(self, tag: str, n_fields: int | None = None) -> list[str]:
        fields = self.next()
        if not fields or fields[0] != tag:
            raise ModelFormatError(f"expected {tag!r} record", self.line_no)
        if n_fields is not None and len(fields) - 1 != n_fields:
            raise ModelFormatError(
                f"{tag!r} record wants {n_fields} fields, got {len(fields) - 1}",
                self.line_no,
            )
        return fields[1:]

    def int_fields(self, tag: str, n: int) -> list[int]:
        fields = self.record(tag, n)
        try:
            return [int(v) for v in fields]
        except ValueError:
            raise ModelFormatError(f"bad integer in {tag!r} record", self.line_no) from None

    def float_token(self, token: str) -> float:
        try:
            return float.fromhex(token)
        except ValueError:
            raise ModelFormatError(f"bad hex float {token!r}", self.line_no) from None

    def float_row(self, tag: str, n: int) -> np.ndarray:
        fields = self.record(tag, n)
        return np.array([self.float_token(t) for t in fields], dtype=np.float64)

    def done(self) -> None:
        while self.pos < len(self.lines):
            if self.lines[self.pos].strip():
                raise ModelFormatError("trailing data after model body", self.pos + 1)
            self.pos += 1


def _write_cascade(out: list[str], c: Cascade) -> None:
    out.append("CASCADE")
    out.append(f"window {c.window.base_size}")
    out.append(f"seed {c.training_meta.seed}")
    out.append(f"features {len(c.features)}")
    for f in c.features:
        out.append(f"feature {f.kind.value} {f.x} {f.y} {f.unit_w} {f.unit_h}")
    out.append(f"stages {len(c.stages)}")
    for stage, rates in zip(c.stages, c.training_meta.stage_rates):
        out.append(
            f"stage {len(stage.weaks)} {_hex(stage.stage_threshold)} "
            f"{_hex(rates.tpr)} {_hex(rates.fpr)}"
        )
        for w in stage.weaks:
            out.append(
                f"weak {w.feature_index} {_hex(w.threshold)} {w.polarity} {_hex(w.alpha)}"
            )


def _read_cascade(r: _Reader) -> Cascade:
    (base,) = r.int_fields("window", 1)
    (seed,) = r.int_fields("seed", 1)
    (n_features,) = r.int_fields("features", 1)
    features = []
    for _ in range(n_features):
        fields = r.record("feature", 5)
        try:
            kind = kind_from_token(fields[0])
            x, y, uw, uh = (int(v) for v in fields[1:])
        except ValueError as e:
            raise ModelFormatError(str(e), r.line_no) from None
        features.append(HaarFeature(kind, x, y, uw, uh))
    (n_stages,) = r.int_fields("stages", 1)
    stages = []
    rates = []
    for _ in range(n_stages):
        fields = r.record("stage", 4)
        try:
            n_weaks = int(fields[0])
        except ValueError:
            raise ModelFormatError("bad weak count", r.line_no) from None
        threshold = r.float_token(fields[1])
        rates.append(StageRates(r.float_token(fields[2]), r.float_token(fields[3])))
        weaks = []
        for _ in range(n_weaks):
            wf = r.record("weak", 4)
            try:
                fi = int(wf[0])
                polarity = int(wf[2])
            except ValueError:
                raise ModelFormatError("bad integer in 'weak' record", r.line_no) from None
            if polarity not in (-1, 1):
                raise ModelFormatError(f"polarity must be +-1, got {polarity}", r.line_no)
            if not 0 <= fi < n_features:
                raise ModelFormatError(f"feature index {fi} out of range", r.line_no)
            weaks.append(
                WeakClassifier(fi, r.float_token(wf[1]), polarity, r.float_token(wf[3]))
            )
        stages.append(StrongClassifier(tuple(weaks), threshold))
    return Cascade(
        window=WindowSpec(base),
        features=features,
        stages=tuple(stages),
        training_meta=CascadeTrainingMeta(seed, tuple(rates)),
    )


def _write_recognizer(out: list[str], m: RecognizerModel) -> None:
    cfg = m.descriptor_config
    out.append("RECOGNIZER")
    out.append(
        f"descriptor {cfg.crop_size} {cfg.grid[0]} {cfg.grid[1]} {cfg.bins_per_cell} {cfg.mode}"
    )
    out.append(f"accept_threshold {_hex(m.accept_threshold)}")
    n_bits = len(m.codebook[0].bits) if m.codebook else 0
    out.append(f"codes {len(m.codebook)} {n_bits}")
    for code in m.codebook:
        if any(ch.isspace() for ch in code.label):
            raise ValueError(f"label {code.label!r} contains whitespace")
        out.append(f"code {code.label} {''.join(str(b) for b in code.bits)}")
    out.append(f"norm {len(m.dim_min)}")
    for lo, hi in zip(m.dim_min, m.dim_max):
        out.append(f"range {_hex(lo)} {_hex(hi)}")
    net = m.network
    n_hidden, n_in = net.w1.shape
    n_out = net.w2.shape[0]
    out.append(f"network {n_in} {n_hidden} {n_out}")
    for row in net.w1:
        out.append("w1 " + " ".join(_hex(v) for v in row))
    out.append("b1 " + " ".join(_hex(v) for v in net.b1))
    for row in net.w2:
        out.append("w2 " + " ".join(_hex(v) for v in row))
    out.append("b2 " + " ".join(_hex(v) for v in net.b2))


def _read_recognizer(r: _Reader) -> RecognizerModel:
    fields = r.record("descriptor", 5)
    try:
        crop_size, rows, cols, bins_per_cell = (int(v) for v in fields[:4])
    except ValueError:
        raise ModelFormatError("bad integer in 'descriptor' record", r.line_no) from None
    try:
        cfg = DescriptorConfig(crop_size, (rows, cols), bins_per_cell, fields[4])
    except ValueError as e:
        raise ModelFormatError(str(e), r.line_no) from None
    (thr_tok,) = r.record("accept_threshold", 1)
    accept_threshold = r.float_token(thr_tok)
    n_codes, n_bits = r.int_fields("codes", 2)
    codebook = []
    for _ in range(n_codes):
        cf = r.record("code", 2)
        bits_str = cf[1]
        if len(bits_str) != n_bits or any(c not in "01" for c in bits_str):
            raise ModelFormatError(f"bad code bits {bits_str!r}", r.line_no)
        codebook.append(IdentityCode(cf[0], tuple(int(c) for c in bits_str)))
    (n_dims,) = r.int_fields("norm", 1)
    dim_min = np.empty(n_dims)
    dim_max = np.empty(n_dims)
    for i in range(n_dims):
        row = r.float_row("range", 2)
        dim_min[i], dim_max[i] = row
    n_in, n_hidden, n_out = r.int_fields("network", 3)
    w1 = np.stack([r.float_row("w1", n_in) for _ in range(n_hidden)])
    b1 = r.float_row("b1", n_hidden)
    w2 = np.stack([r.float_row("w2", n_hidden) for _ in range(n_out)])
    b2 = r.float_row("b2", n_out)
    if n_in != n_dims:
        raise ModelFormatError(
            f"network n_in {n_in} does not match norm dimensionality {n_dims}", r.line_no
        )
    return RecognizerModel(
        descriptor_config=cfg,
        network=bpnn.Network(w1, b1, w2, b2),
        codebook=codebook,
        dim_min=dim_min,
        dim_max=dim_max,
        accept_threshold=accept_threshold,
    )


def save_model(model: Cascade | RecognizerModel, path) -> None:
    """Write a model file; the same model always produces identical bytes."""
    out = [f"{MAGIC}{VERSION}"]
    if isinstance(model, Cascade):
        _write_cascade(out, model)
    elif isinstance(model, RecognizerModel):
        _write_recognizer(out, model)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(out) + "\n")


def load_model(path) -> Cascade | RecognizerModel:
    """Read a model file back; raises VersionMismatchError for foreign
    versions and ModelFormatError (with a line number) for anything
    structurally wrong."""
    with open(path, "r", encoding="utf-8") as f:
        r = _Reader(f.read())
    header = r.next()
    if len(header) != 1 or not header[0].startswith(MAGIC):
        raise ModelFormatError(f"bad magic (want {MAGIC}{VERSION})", r.line_no)
    version = header[0][len(MAGIC):]
    if version != VERSION:
        raise VersionMismatchError(
            f"unsupported model version {version!r} (this build reads {VERSION})"
        )
    section = r.next()
    if section == ["CASCADE"]:
        model = _read_cascade(r)
    elif section == ["RECOGNIZER"]:
        model = _read_recognizer(r)
    else:
        raise ModelFormatError(f"unknown section {' '.join(section)!r}", r.line_no)
    r.done()
    return model
