"""Read geomimu export files into plain numpy arrays.

The containers share one envelope: a 4-byte magic, a little-endian u32
header length, that many bytes of UTF-8 JSON, then raw little-endian
sections. ``load`` dispatches on the magic; ``iter_windows`` streams GIW1
archives record by record in constant memory. The parsers are written
directly against that byte layout and share no code with the writer
package, so they double as an independent check of the format contract.

Read-only by design: this package writes nothing, trains nothing, and
plots nothing.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

__version__ = "0.1.0"
__all__ = [
    "LoadedShard",
    "LoaderError",
    "load",
    "iter_windows",
    "load_tokens",
    "nearest_codes",
]

_WEIGHT_TRIPLE = np.dtype([("vertex", "<u4"), ("joint", "<u4"), ("weight", "<f4")])


class LoaderError(ValueError):
    pass


@dataclass
class LoadedShard:
    """One parsed file.

    kind: "gmc1" | "giw1" | "gpw1" | "gcb1".
    tensors: gmc1 -> dict of named arrays (only the sections present);
    giw1 -> (N, T, 6) float32; gpw1 -> (N, 2, T, S, 6) float32 with views
    A and B stacked on axis 1; gcb1 -> (P, K, dim) float32 codes.
    visibility: (N, 2, S) bool for gpw1, None otherwise.
    metadata: the file header, verbatim.
    items: per-record metadata dicts for giw1/gpw1, empty otherwise.
    """

    kind: str
    tensors: object
    visibility: object
    metadata: dict
    items: list = field(default_factory=list)


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise LoaderError(f"truncated {what}")
    return buf


def _read_header(f):
    magic = f.read(4)
    if len(magic) < 4:
        raise LoaderError("file too short for a container magic")
    (length,) = struct.unpack("<I", _read_exact(f, 4, "header length"))
    try:
        header = json.loads(_read_exact(f, length, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LoaderError(f"unreadable header: {exc}") from None
    if not isinstance(header, dict):
        raise LoaderError("header is not a JSON object")
    return magic, header


def _want(header: dict, *keys):
    for key in keys:
        if key not in header:
            raise LoaderError(f"header missing '{key}'")


def load(path) -> LoadedShard:
    """Parse one container file; the magic decides the layout."""
    with open(path, "rb") as f:
        magic, header = _read_header(f)
        if magic == b"GMC1":
            return _load_gmc1(f, header)
        if magic == b"GIW1":
            return _load_giw1(f, header)
        if magic == b"GPW1":
            return _load_gpw1(f, header)
        if magic == b"GCB1":
            return _load_gcb1(f, header)
    raise LoaderError(f"unknown magic {magic!r}")


def _load_gmc1(f, header) -> LoadedShard:
    _want(header, "F", "S", "V", "sections")
    F, S, V = int(header["F"]), int(header["S"]), int(header["V"])
    data = f.read()
    shapes = {
        "positions": ((F, S, 3), np.dtype("<f4")),
        "orientations": ((F, S, 4), np.dtype("<f4")),
        "rest_vertices": ((V, 3), np.dtype("<f4")),
        "faces": ((-1, 3), np.dtype("<u4")),
        "skin_weights": ((-1,), _WEIGHT_TRIPLE),
        "posed_vertices": ((F, V, 3), np.dtype("<f4")),
        "bind_pose": ((S, 7), np.dtype("<f4")),
    }
    tensors = {}
    for sec in header["sections"]:
        name, off, length = str(sec["name"]), int(sec["off"]), int(sec["len"])
        if name not in shapes:
            raise LoaderError(f"unknown section '{name}'")
        if off < 0 or off + length > len(data):
            raise LoaderError(f"section '{name}' runs past the end of the file")
        shape, dtype = shapes[name]
        if length % dtype.itemsize != 0:
            raise LoaderError(f"section '{name}' length not a multiple of its record size")
        arr = np.frombuffer(data[off : off + length], dtype=dtype)
        if name != "skin_weights":
            arr = arr.reshape(shape)
        tensors[name] = arr
    return LoadedShard(kind="gmc1", tensors=tensors, visibility=None, metadata=header)


def _load_giw1(f, header) -> LoadedShard:
    _want(header, "T", "count")
    T, count = int(header["T"]), int(header["count"])
    block = T * 6 * 4
    metas, windows = [], []
    for _ in range(count):
        (mlen,) = struct.unpack("<I", _read_exact(f, 4, "window metadata length"))
        metas.append(json.loads(_read_exact(f, mlen, "window metadata").decode("utf-8")))
        windows.append(np.frombuffer(_read_exact(f, block, "window samples"), dtype="<f4").reshape((T, 6)))
    tensors = np.stack(windows) if windows else np.zeros((0, T, 6), dtype="<f4")
    return LoadedShard(kind="giw1", tensors=tensors, visibility=None, metadata=header, items=metas)


def _load_gpw1(f, header) -> LoadedShard:
    _want(header, "T", "S", "pairs")
    T, S, count = int(header["T"]), int(header["S"]), int(header["pairs"])
    flag_bytes = (S + 7) // 8
    block = T * S * 6 * 4
    metas, tensors, flags = [], [], []
    for _ in range(count):
        (mlen,) = struct.unpack("<I", _read_exact(f, 4, "pair metadata length"))
        metas.append(json.loads(_read_exact(f, mlen, "pair metadata").decode("utf-8")))
        vis = [
            np.unpackbits(
                np.frombuffer(_read_exact(f, flag_bytes, f"visibility {side}"), dtype=np.uint8),
                bitorder="little",
            )[:S].astype(bool)
            for side in ("A", "B")
        ]
        pair = [
            np.frombuffer(_read_exact(f, block, f"view {side} tensor"), dtype="<f4").reshape((T, S, 6))
            for side in ("A", "B")
        ]
        flags.append(np.stack(vis))
        tensors.append(np.stack(pair))
    stacked = np.stack(tensors) if tensors else np.zeros((0, 2, T, S, 6), dtype="<f4")
    vis_all = np.stack(flags) if flags else np.zeros((0, 2, S), dtype=bool)
    return LoadedShard(kind="gpw1", tensors=stacked, visibility=vis_all, metadata=header, items=metas)


def _load_gcb1(f, header) -> LoadedShard:
    _want(header, "P", "K", "dim")
    P, K, dim = int(header["P"]), int(header["K"]), int(header["dim"])
    blob = _read_exact(f, P * K * dim * 4, "codes")
    codes = np.frombuffer(blob, dtype="<f4").reshape((P, K, dim))
    return LoadedShard(kind="gcb1", tensors=codes, visibility=None, metadata=header)


def iter_windows(path):
    """Yield (metadata, (T, 6) float32 array) from a GIW1 archive, file order."""
    with open(path, "rb") as f:
        magic, header = _read_header(f)
        if magic != b"GIW1":
            raise LoaderError(f"iter_windows needs a GIW1 archive, got magic {magic!r}")
        _want(header, "T", "count")
        T, count = int(header["T"]), int(header["count"])
        block = T * 6 * 4
        for _ in range(count):
            (mlen,) = struct.unpack("<I", _read_exact(f, 4, "window metadata length"))
            meta = json.loads(_read_exact(f, mlen, "window metadata").decode("utf-8"))
            data = np.frombuffer(_read_exact(f, block, "window samples"), dtype="<f4")
            yield meta, data.reshape((T, 6))


def load_tokens(path) -> list:
    """Parse a token JSON Lines file into a list of dicts."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoaderError(f"line {lineno}: {exc}") from None
            if not isinstance(rec, dict):
                raise LoaderError(f"line {lineno}: not a JSON object")
            records.append(rec)
    return records


def nearest_codes(latents: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Nearest code per latent chunk, squared-L2, ties to the lowest index.

    latents: (n, P*dim) float; codes: (P, K, dim) -> (n, P) int64. Useful to
    re-derive token indices from exported latents and a loaded codebook.
    """
    latents = np.asarray(latents, dtype=np.float64)
    codes = np.asarray(codes, dtype=np.float64)
    if codes.ndim != 3:
        raise LoaderError("codes must have shape (P, K, dim)")
    P, _, dim = codes.shape
    if latents.ndim != 2 or latents.shape[1] != P * dim:
        raise LoaderError(f"latents must have shape (n, {P * dim})")
    chunks = latents.reshape(latents.shape[0], P, dim)
    out = np.empty((latents.shape[0], P), dtype=np.int64)
    for p in range(P):
        diff = chunks[:, p, None, :] - codes[p][None, :, :]
        out[:, p] = np.argmin(np.einsum("nkd,nkd->nk", diff, diff), axis=1)
    return out
