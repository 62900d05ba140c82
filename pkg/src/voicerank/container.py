"""Versioned binary container for the trained model stack.

Layout (all integers little-endian): magic "VRK1", u32 version, u32
section count, then a table of (4-byte tag, u64 offset, u64 length)
entries, then section payloads. Every section starts with its dims as
u32s followed by row-major float payloads (64-bit unless the section
records a narrower dtype). Round-trips are bit-exact.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedContainer
from .gmm import DiagonalGmm
from .embedding import PpcaModel
from .plda import IdentificationIndex, PldaModel

MAGIC = b"VRK1"
VERSION = 1

TAG_UBM = b"UBM "
TAG_PPCA = b"PPCA"
TAG_PLDA = b"PLDA"
TAG_INDEX = b"INDX"
TAG_GALLERY = b"GLRY"

_DTYPE_CODES = {0: np.float64, 1: np.float32}


@dataclass
class ModelSet:
    """Everything the identification pipeline loads into memory."""

    ubm: DiagonalGmm = None
    ppca: PpcaModel = None
    ivector_mean: np.ndarray = None
    plda: PldaModel = None
    index: IdentificationIndex = None
    gallery_jsonl: bytes = None


def _pack_array(buf, arr, dtype=np.float64):
    buf.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def _read_array(view, offset, count, dtype=np.float64):
    dt = np.dtype(dtype).newbyteorder("<")
    arr = np.frombuffer(view, dtype=dt, count=count, offset=offset)
    return arr.astype(dtype), offset + count * dt.itemsize


def _ubm_section(ubm: DiagonalGmm) -> bytes:
    buf = io.BytesIO()
    c, f = ubm.means.shape
    buf.write(struct.pack("<II", c, f))
    _pack_array(buf, ubm.weights)
    _pack_array(buf, ubm.means)
    _pack_array(buf, ubm.variances)
    return buf.getvalue()


def _parse_ubm(body: bytes) -> DiagonalGmm:
    c, f = struct.unpack_from("<II", body, 0)
    pos = 8
    weights, pos = _read_array(body, pos, c)
    means, pos = _read_array(body, pos, c * f)
    variances, pos = _read_array(body, pos, c * f)
    return DiagonalGmm(weights=weights, means=means.reshape(c, f),
                       variances=variances.reshape(c, f))


def _ppca_section(ppca: PpcaModel, ivector_mean) -> bytes:
    buf = io.BytesIO()
    q, d = ppca.basis.shape
    has_mean = 1 if ivector_mean is not None else 0
    buf.write(struct.pack("<III", q, d, has_mean))
    buf.write(struct.pack("<d", float(ppca.noise_variance)))
    _pack_array(buf, ppca.mean_sv)
    _pack_array(buf, ppca.basis)
    if has_mean:
        _pack_array(buf, ivector_mean)
    return buf.getvalue()


def _parse_ppca(body: bytes):
    q, d, has_mean = struct.unpack_from("<III", body, 0)
    (noise_var,) = struct.unpack_from("<d", body, 12)
    pos = 20
    mean_sv, pos = _read_array(body, pos, d)
    basis, pos = _read_array(body, pos, q * d)
    ivector_mean = None
    if has_mean:
        ivector_mean, pos = _read_array(body, pos, q)
    model = PpcaModel(mean_sv=mean_sv, basis=basis.reshape(q, d),
                      noise_variance=noise_var)
    return model, ivector_mean


def _plda_section(plda: PldaModel) -> bytes:
    buf = io.BytesIO()
    d, k = plda.V.shape
    buf.write(struct.pack("<II", d, k))
    buf.write(struct.pack("<d", float(plda.offset)))
    _pack_array(buf, plda.mu)
    _pack_array(buf, plda.V)
    _pack_array(buf, plda.Sigma)
    _pack_array(buf, plda.projection)
    _pack_array(buf, plda.quad_weight)
    _pack_array(buf, plda.cross_weight)
    return buf.getvalue()


def _parse_plda(body: bytes) -> PldaModel:
    d, k = struct.unpack_from("<II", body, 0)
    (offset_val,) = struct.unpack_from("<d", body, 8)
    pos = 16
    mu, pos = _read_array(body, pos, d)
    v, pos = _read_array(body, pos, d * k)
    sigma, pos = _read_array(body, pos, d * d)
    projection, pos = _read_array(body, pos, k * d)
    quad, pos = _read_array(body, pos, k * k)
    cross, pos = _read_array(body, pos, k * k)
    return PldaModel(mu=mu, V=v.reshape(d, k), Sigma=sigma.reshape(d, d),
                     projection=projection.reshape(k, d),
                     quad_weight=quad.reshape(k, k),
                     cross_weight=cross.reshape(k, k), offset=offset_val)


def _index_section(index: IdentificationIndex) -> bytes:
    buf = io.BytesIO()
    n, k = index.weighted_rows.shape
    dtype = index.weighted_rows.dtype
    code = 1 if dtype == np.float32 else 0
    buf.write(struct.pack("<III", n, k, code))
    _pack_array(buf, index.self_terms, _DTYPE_CODES[code])
    _pack_array(buf, index.weighted_rows, _DTYPE_CODES[code])
    ids_blob = "\n".join(index.utterance_ids).encode("utf-8")
    buf.write(struct.pack("<Q", len(ids_blob)))
    buf.write(ids_blob)
    return buf.getvalue()


def _parse_index(body: bytes) -> IdentificationIndex:
    n, k, code = struct.unpack_from("<III", body, 0)
    if code not in _DTYPE_CODES:
        raise MalformedContainer(f"unknown index dtype code {code}")
    dtype = _DTYPE_CODES[code]
    pos = 12
    self_terms, pos = _read_array(body, pos, n, dtype)
    rows, pos = _read_array(body, pos, n * k, dtype)
    (blob_len,) = struct.unpack_from("<Q", body, pos)
    pos += 8
    ids = body[pos:pos + blob_len].decode("utf-8")
    utterance_ids = tuple(ids.split("\n")) if ids else ()
    if len(utterance_ids) != n:
        raise MalformedContainer(f"{len(utterance_ids)} ids for {n} index rows")
    return IdentificationIndex(self_terms=self_terms,
                               weighted_rows=rows.reshape(n, k),
                               utterance_ids=utterance_ids)


def serialize(models: ModelSet) -> bytes:
    sections = []
    if models.ubm is not None:
        sections.append((TAG_UBM, _ubm_section(models.ubm)))
    if models.ppca is not None:
        sections.append((TAG_PPCA, _ppca_section(models.ppca,
                                                 models.ivector_mean)))
    if models.plda is not None:
        sections.append((TAG_PLDA, _plda_section(models.plda)))
    if models.index is not None:
        sections.append((TAG_INDEX, _index_section(models.index)))
    if models.gallery_jsonl is not None:
        sections.append((TAG_GALLERY, models.gallery_jsonl))

    header_len = 12 + 20 * len(sections)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(sections)))
    offset = header_len
    for tag, body in sections:
        buf.write(tag)
        buf.write(struct.pack("<QQ", offset, len(body)))
        offset += len(body)
    for _, body in sections:
        buf.write(body)
    return buf.getvalue()


def deserialize(data: bytes) -> ModelSet:
    if len(data) < 12 or data[0:4] != MAGIC:
        raise MalformedContainer("bad magic; not a model container")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise MalformedContainer(f"unsupported container version {version}")

    models = ModelSet()
    pos = 12
    for _ in range(count):
        tag = data[pos:pos + 4]
        offset, length = struct.unpack_from("<QQ", data, pos + 4)
        pos += 20
        body = data[offset:offset + length]
        if len(body) != length:
            raise MalformedContainer(f"section {tag!r} truncated")
        if tag == TAG_UBM:
            models.ubm = _parse_ubm(body)
        elif tag == TAG_PPCA:
            models.ppca, models.ivector_mean = _parse_ppca(body)
        elif tag == TAG_PLDA:
            models.plda = _parse_plda(body)
        elif tag == TAG_INDEX:
            models.index = _parse_index(body)
        elif tag == TAG_GALLERY:
            models.gallery_jsonl = bytes(body)
        # unknown tags are skipped for forward compatibility
    return models


def save(path, models: ModelSet):
    Path(path).write_bytes(serialize(models))


def load(path) -> ModelSet:
    return deserialize(Path(path).read_bytes())
