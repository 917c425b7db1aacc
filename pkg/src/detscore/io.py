"""Serialization of score matrices and trial keys.

Two interchangeable representations:

* a binary container (magic ``BXSC``), little-endian, byte-exact across
  platforms, with an explicit validity/label byte per cell and raw float64
  scores;
* a line-oriented UTF-8 text format, one trial per line,
  ``model<TAB>segment<TAB>payload``, where the payload is a decimal score or
  the literal ``target``/``nontarget``.

Text scores are rendered with shortest round-trip precision so that
parse(emit(x)) reproduces x bit-exactly.
"""

from __future__ import annotations

import struct
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DuplicateTrial, FormatError, InvalidCellValue, ParseError
from .trials import QualityMeasures, ScoreMatrix, TrialKey, TrialLabel

__all__ = [
    "MAGIC",
    "VERSION",
    "encode_scores",
    "decode_scores",
    "encode_key",
    "decode_key",
    "decode_any",
    "parse_text_scores",
    "emit_text_scores",
    "parse_text_key",
    "emit_text_key",
    "parse_text_quality",
    "emit_text_quality",
    "sniff_binary",
]

MAGIC = b"BXSC"
VERSION = 1
_KIND_SCORES = 0
_KIND_KEY = 1


def _encode_names(names: Sequence[str]) -> bytes:
    out = bytearray()
    for name in names:
        raw = name.encode("utf-8")
        out += struct.pack("<I", len(raw))
        out += raw
    return bytes(out)


def _header_and_names(kind: int, models: Sequence[str], segments: Sequence[str]) -> bytearray:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<B", kind)
    out += struct.pack("<QQ", len(models), len(segments))
    out += _encode_names(models)
    out += _encode_names(segments)
    return out


def encode_scores(scores: ScoreMatrix) -> bytes:
    """Serialize a score matrix to the binary container."""
    out = _header_and_names(_KIND_SCORES, scores.model_names, scores.segment_names)
    out += scores.valid.astype(np.uint8).tobytes(order="C")
    clean = np.where(scores.valid, scores.score, 0.0).astype("<f8")
    out += clean.tobytes(order="C")
    return bytes(out)


def encode_key(key: TrialKey) -> bytes:
    """Serialize a trial key to the binary container."""
    out = _header_and_names(_KIND_KEY, key.model_names, key.segment_names)
    out += key.label.astype(np.uint8).tobytes(order="C")
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated input: need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def names(self, count: int) -> tuple[str, ...]:
        out = []
        for _ in range(count):
            (ln,) = struct.unpack("<I", self.take(4))
            try:
                out.append(self.take(ln).decode("utf-8"))
            except UnicodeDecodeError as e:
                raise FormatError(f"name is not valid UTF-8: {e}") from None
        return tuple(out)


def _decode_header(r: _Reader, expect_kind: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    magic = r.take(4)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    (version,) = struct.unpack("<I", r.take(4))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    (kind,) = struct.unpack("<B", r.take(1))
    if kind not in (_KIND_SCORES, _KIND_KEY):
        raise FormatError(f"unknown kind byte {kind}")
    if kind != expect_kind:
        raise FormatError(
            f"kind byte {kind} does not match expected kind {expect_kind}"
        )
    m, s = struct.unpack("<QQ", r.take(16))
    models = r.names(m)
    segments = r.names(s)
    return models, segments


def decode_scores(data: bytes) -> ScoreMatrix:
    """Parse the binary container back into a score matrix."""
    r = _Reader(data)
    models, segments = _decode_header(r, _KIND_SCORES)
    m, s = len(models), len(segments)
    cells = np.frombuffer(r.take(m * s), dtype=np.uint8).reshape(m, s)
    if cells.size and cells.max() > 1:
        raise InvalidCellValue(
            f"score validity cell must be 0 or 1, found {int(cells.max())}"
        )
    score = np.frombuffer(r.take(m * s * 8), dtype="<f8").reshape(m, s)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after score block")
    try:
        return ScoreMatrix(models, segments, cells.astype(bool), score.astype(np.float64))
    except ValueError as e:
        raise FormatError(str(e)) from None


def decode_key(data: bytes) -> TrialKey:
    """Parse the binary container back into a trial key."""
    r = _Reader(data)
    models, segments = _decode_header(r, _KIND_KEY)
    m, s = len(models), len(segments)
    cells = np.frombuffer(r.take(m * s), dtype=np.uint8).reshape(m, s)
    if cells.size and cells.max() > 2:
        raise InvalidCellValue(f"key cell must be 0, 1 or 2, found {int(cells.max())}")
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after cell block")
    try:
        return TrialKey(models, segments, cells.astype(np.int64))
    except ValueError as e:
        raise FormatError(str(e)) from None


def decode_any(data: bytes) -> Union[ScoreMatrix, TrialKey]:
    """Parse a binary container whose kind is not known in advance."""
    if len(data) < 9:
        raise FormatError("truncated input: header is incomplete")
    kind = data[8]
    if kind == _KIND_SCORES:
        return decode_scores(data)
    if kind == _KIND_KEY:
        return decode_key(data)
    raise FormatError(f"unknown kind byte {kind}")


def sniff_binary(data: bytes) -> bool:
    """True when a byte string starts with the binary container magic."""
    return data[:4] == MAGIC


def _split_line(lineno: int, line: str, what: str) -> tuple[str, str, str]:
    parts = line.split("\t")
    if len(parts) != 3:
        raise ParseError(
            lineno, f"expected model<TAB>segment<TAB>{what}, got {len(parts)} fields"
        )
    return parts[0], parts[1], parts[2]


def _iter_lines(lines: Union[str, Iterable[str]]):
    if isinstance(lines, str):
        lines = lines.split("\n")
    for lineno, raw in enumerate(lines, start=1):
        line = raw
        if line.endswith("\n"):
            line = line[:-1]
        if line.endswith("\r"):
            line = line[:-1]
        if line == "":
            continue
        yield lineno, line


class _GridBuilder:
    """Accumulates (model, segment, payload) triples in first-appearance order."""

    def __init__(self):
        self.models: dict[str, int] = {}
        self.segments: dict[str, int] = {}
        self.entries: dict[tuple[int, int], object] = {}

    def add(self, lineno: int, model: str, segment: str, payload) -> None:
        mi = self.models.setdefault(model, len(self.models))
        si = self.segments.setdefault(segment, len(self.segments))
        if (mi, si) in self.entries:
            raise DuplicateTrial(lineno, f"trial ({model!r}, {segment!r}) seen twice")
        self.entries[(mi, si)] = payload


def parse_text_scores(lines: Union[str, Iterable[str]]) -> ScoreMatrix:
    """Parse text score lines (a blob or an iterable of lines) into a matrix.

    Name lists follow first appearance; cells never mentioned are invalid.
    Blank lines are skipped. Raises ParseError/DuplicateTrial with the
    offending 1-based line number.
    """
    g = _GridBuilder()
    for lineno, line in _iter_lines(lines):
        model, segment, payload = _split_line(lineno, line, "score")
        try:
            value = float(payload)
        except ValueError:
            raise ParseError(lineno, f"bad score {payload!r}") from None
        if not np.isfinite(value):
            raise ParseError(lineno, f"score must be finite, got {payload!r}")
        g.add(lineno, model, segment, value)
    m, s = len(g.models), len(g.segments)
    valid = np.zeros((m, s), dtype=bool)
    score = np.zeros((m, s), dtype=np.float64)
    for (mi, si), value in g.entries.items():
        valid[mi, si] = True
        score[mi, si] = value
    return ScoreMatrix(tuple(g.models), tuple(g.segments), valid, score)


def _check_emittable(name: str) -> str:
    if "\t" in name or "\n" in name or "\r" in name:
        raise ValueError(f"name {name!r} cannot be written to the text format")
    return name


def emit_text_scores(scores: ScoreMatrix) -> str:
    """One text line per valid trial, model-major, lossless score rendering."""
    for name in scores.model_names + scores.segment_names:
        _check_emittable(name)
    lines = []
    rows, cols = np.nonzero(scores.valid)
    for mi, si in zip(rows.tolist(), cols.tolist()):
        value = float(scores.score[mi, si])
        lines.append(f"{scores.model_names[mi]}\t{scores.segment_names[si]}\t{value!r}\n")
    return "".join(lines)


_LABEL_TOKENS = {"target": TrialLabel.TARGET, "nontarget": TrialLabel.NONTARGET}
_TOKEN_OF_LABEL = {TrialLabel.TARGET: "target", TrialLabel.NONTARGET: "nontarget"}


def parse_text_key(lines: Union[str, Iterable[str]]) -> TrialKey:
    """Parse text key lines; unmentioned cells are IGNORED."""
    g = _GridBuilder()
    for lineno, line in _iter_lines(lines):
        model, segment, payload = _split_line(lineno, line, "target|nontarget")
        label = _LABEL_TOKENS.get(payload)
        if label is None:
            raise ParseError(
                lineno, f"bad label {payload!r}, expected 'target' or 'nontarget'"
            )
        g.add(lineno, model, segment, label)
    m, s = len(g.models), len(g.segments)
    label = np.zeros((m, s), dtype=np.int64)
    for (mi, si), value in g.entries.items():
        label[mi, si] = int(value)
    return TrialKey(tuple(g.models), tuple(g.segments), label)


def emit_text_key(key: TrialKey) -> str:
    """One text line per labeled trial, model-major."""
    for name in key.model_names + key.segment_names:
        _check_emittable(name)
    lines = []
    rows, cols = np.nonzero(key.label != TrialLabel.IGNORED)
    for mi, si in zip(rows.tolist(), cols.tolist()):
        token = _TOKEN_OF_LABEL[TrialLabel(int(key.label[mi, si]))]
        lines.append(f"{key.model_names[mi]}\t{key.segment_names[si]}\t{token}\n")
    return "".join(lines)


def parse_text_quality(lines: Union[str, Iterable[str]]) -> QualityMeasures:
    """Parse quality-measure lines: ``id<TAB>v1<TAB>v2...``, one id per line.

    Every line must carry the same number of values.
    """
    ids: dict[str, int] = {}
    columns: list[list[float]] = []
    width = None
    for lineno, line in _iter_lines(lines):
        parts = line.split("\t")
        if len(parts) < 2:
            raise ParseError(lineno, "expected id<TAB>value...")
        name = parts[0]
        if name in ids:
            raise DuplicateTrial(lineno, f"quality id {name!r} seen twice")
        try:
            values = [float(p) for p in parts[1:]]
        except ValueError:
            raise ParseError(lineno, "bad quality value") from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(
                lineno, f"expected {width} quality values, got {len(values)}"
            )
        ids[name] = len(ids)
        columns.append(values)
    arr = np.array(columns, dtype=np.float64).T if columns else np.zeros((0, 0))
    return QualityMeasures(tuple(ids), arr)


def emit_text_quality(quality: QualityMeasures) -> str:
    """One text line per id, values with lossless rendering."""
    for name in quality.ids:
        _check_emittable(name)
    lines = []
    for j, name in enumerate(quality.ids):
        vals = "\t".join(repr(float(v)) for v in quality.values[:, j])
        lines.append(f"{name}\t{vals}\n")
    return "".join(lines)
