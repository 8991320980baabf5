"""Binary container formats and token files.

Four containers share one envelope: a 4-byte magic, a little-endian u32
header length, then that many bytes of UTF-8 JSON (keys sorted, no spaces),
then raw little-endian sections. Writers always emit sections in a fixed
canonical order and re-serialize headers deterministically, so write -> read
-> write reproduces files byte for byte.

GMC1  body model + motion: f32 positions/quaternions, u32 faces, packed
      (u32 vertex, u32 joint, f32 weight) skin triples, optional f32
      rest/posed vertices and an S x 7 bind pose (position, wxyz quaternion).
GIW1  simulated sensor windows: per record a JSON metadata blob and a T x 6
      f32 block.
GPW1  paired graph views: per pair metadata, two S-bit visibility bitmaps
      (packed little-endian, padded to whole bytes), two T x S x 6 f32
      tensors. Masked segments are stored zero-filled; the flags say which.
GCB1  product-quantizer codebooks: P x K x dim f32 codes plus training log.

Token sequences travel as UTF-8 JSON Lines, one object per window.
"""

import json
import struct

import numpy as np

WEIGHT_TRIPLE_DTYPE = np.dtype([("vertex", "<u4"), ("joint", "<u4"), ("weight", "<f4")])


class FormatError(ValueError):
    pass


def _dump_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write_envelope(f, magic: bytes, header: dict) -> None:
    payload = _dump_header(header)
    f.write(magic)
    f.write(struct.pack("<I", len(payload)))
    f.write(payload)


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what}")
    return buf


def _read_envelope(f, expect_magic: bytes) -> dict:
    magic = f.read(4)
    if magic != expect_magic:
        raise FormatError(f"bad magic: expected {expect_magic.decode()}, got {magic!r}")
    (length,) = struct.unpack("<I", _read_exact(f, 4, "header length"))
    payload = _read_exact(f, length, "header")
    try:
        header = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}") from None
    if not isinstance(header, dict):
        raise FormatError("header is not a JSON object")
    return header


def sniff_magic(path) -> str:
    with open(path, "rb") as f:
        return f.read(4).decode("ascii", errors="replace")


def _f32(arr, shape, what: str) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float32)
    try:
        a = a.reshape(shape)
    except ValueError:
        raise FormatError(f"{what} has {a.size} values, expected shape {tuple(shape)}") from None
    if not np.all(np.isfinite(a)):
        raise FormatError(f"non-finite values in {what}")
    return np.ascontiguousarray(a)


# ---------------------------------------------------------------------------
# GMC1: body model + motion sequence


def write_gmc1(
    path,
    *,
    rate: float,
    segment_names,
    parent_index,
    positions,
    orientations,
    segment_to_joints=None,
    rest_vertices=None,
    faces=None,
    skin_weights=None,
    posed_vertices=None,
    bind_pose=None,
    winding: str = "ccw",
) -> None:
    """Write a motion container.

    positions: (F, S, 3); orientations: (F, S, 4) in w,x,y,z order;
    skin_weights: iterable of (vertex, joint, weight) or a structured array
    of WEIGHT_TRIPLE_DTYPE; bind_pose: (S, 7) rows [px,py,pz,qw,qx,qy,qz].
    """
    segment_names = [str(s) for s in segment_names]
    S = len(segment_names)
    parent_index = [int(p) for p in parent_index]
    if len(parent_index) != S:
        raise FormatError("parent_index length does not match segment count")
    if segment_to_joints is None:
        segment_to_joints = [[j] for j in range(S)]
    segment_to_joints = [[int(j) for j in js] for js in segment_to_joints]
    if len(segment_to_joints) != S:
        raise FormatError("segment_to_joints length does not match segment count")

    pos = _f32(positions, (-1, S, 3), "positions")
    F = pos.shape[0]
    quat = _f32(orientations, (F, S, 4), "orientations")

    joint_count = max((j for js in segment_to_joints for j in js), default=-1) + 1
    blobs: list[tuple[str, bytes]] = [
        ("positions", pos.tobytes()),
        ("orientations", quat.tobytes()),
    ]
    V = 0
    if rest_vertices is not None:
        rest = _f32(rest_vertices, (-1, 3), "rest_vertices")
        V = rest.shape[0]
        blobs.append(("rest_vertices", rest.tobytes()))
    if faces is not None:
        fc = np.ascontiguousarray(np.asarray(faces, dtype=np.uint32).reshape((-1, 3)))
        blobs.append(("faces", fc.tobytes()))
    if skin_weights is not None:
        sw = np.asarray(skin_weights)
        if sw.dtype != WEIGHT_TRIPLE_DTYPE:
            sw = np.array(
                [(int(v), int(j), float(w)) for v, j, w in sw],
                dtype=WEIGHT_TRIPLE_DTYPE,
            )
        joint_count = max(joint_count, int(sw["joint"].max(initial=0)) + 1 if len(sw) else 0)
        blobs.append(("skin_weights", np.ascontiguousarray(sw).tobytes()))
    if posed_vertices is not None:
        pv = _f32(posed_vertices, (F, -1, 3), "posed_vertices")
        if V == 0:
            V = pv.shape[1]
        elif pv.shape[1] != V:
            raise FormatError("posed_vertices vertex count does not match rest_vertices")
        blobs.append(("posed_vertices", pv.tobytes()))
    if bind_pose is not None:
        bp = _f32(bind_pose, (S, 7), "bind_pose")
        blobs.append(("bind_pose", bp.tobytes()))

    sections = []
    off = 0
    for name, blob in blobs:
        sections.append({"len": len(blob), "name": name, "off": off})
        off += len(blob)
    header = {
        "F": F,
        "J": joint_count,
        "S": S,
        "V": V,
        "parent_index": parent_index,
        "rate": float(rate),
        "sections": sections,
        "segment_names": segment_names,
        "segment_to_joints": segment_to_joints,
        "winding": winding,
    }
    with open(path, "wb") as f:
        _write_envelope(f, b"GMC1", header)
        for _, blob in blobs:
            f.write(blob)


def read_gmc1(path) -> dict:
    """Read a motion container into raw f32/u32 arrays plus the header.

    Keys mirror write_gmc1 arguments; absent optional sections come back as
    None. No normalization happens here; domain-level validation lives in
    the body module.
    """
    with open(path, "rb") as f:
        header = _read_envelope(f, b"GMC1")
        data = f.read()
    for key in ("F", "S", "V", "rate", "segment_names", "parent_index", "sections"):
        if key not in header:
            raise FormatError(f"header missing '{key}'")
    F, S, V = int(header["F"]), int(header["S"]), int(header["V"])
    out = {
        "rate": float(header["rate"]),
        "segment_names": [str(s) for s in header["segment_names"]],
        "parent_index": [int(p) for p in header["parent_index"]],
        "segment_to_joints": [
            [int(j) for j in js] for js in header.get("segment_to_joints", [[j] for j in range(S)])
        ],
        "winding": header.get("winding", "ccw"),
        "positions": None,
        "orientations": None,
        "rest_vertices": None,
        "faces": None,
        "skin_weights": None,
        "posed_vertices": None,
        "bind_pose": None,
        "header": header,
    }
    shapes = {
        "positions": ((F, S, 3), np.dtype("<f4")),
        "orientations": ((F, S, 4), np.dtype("<f4")),
        "rest_vertices": ((V, 3), np.dtype("<f4")),
        "faces": ((-1, 3), np.dtype("<u4")),
        "skin_weights": ((-1,), WEIGHT_TRIPLE_DTYPE),
        "posed_vertices": ((F, V, 3), np.dtype("<f4")),
        "bind_pose": ((S, 7), np.dtype("<f4")),
    }
    for sec in header["sections"]:
        name, off, length = sec["name"], int(sec["off"]), int(sec["len"])
        if name not in shapes:
            raise FormatError(f"unknown section '{name}'")
        if off < 0 or off + length > len(data):
            raise FormatError(f"truncated section '{name}'")
        shape, dtype = shapes[name]
        blob = data[off : off + length]
        if length % dtype.itemsize != 0:
            raise FormatError(f"section '{name}' length not a multiple of its record size")
        arr = np.frombuffer(blob, dtype=dtype)
        if name != "skin_weights":
            arr = arr.reshape(shape)
        out[name] = arr
    if out["positions"] is None or out["orientations"] is None:
        raise FormatError("missing positions/orientations sections")
    return out


# ---------------------------------------------------------------------------
# GIW1: simulated sensor window archive


def write_giw1(path, *, rate: float, window_len: int, windows) -> int:
    """Write (metadata, samples) windows; samples are (T, 6) per window."""
    records = []
    for meta, samples in windows:
        arr = _f32(samples, (int(window_len), 6), "window samples")
        records.append((_dump_header(dict(meta)), arr.tobytes()))
    header = {
        "T": int(window_len),
        "count": len(records),
        "meta_schema": "json",
        "rate": float(rate),
    }
    with open(path, "wb") as f:
        _write_envelope(f, b"GIW1", header)
        for meta_blob, data_blob in records:
            f.write(struct.pack("<I", len(meta_blob)))
            f.write(meta_blob)
            f.write(data_blob)
    return len(records)


def iter_giw1(path):
    """Yield (metadata, (T, 6) f32 array) in file order, constant memory."""
    with open(path, "rb") as f:
        header = _read_envelope(f, b"GIW1")
        T = int(header["T"])
        count = int(header["count"])
        block = T * 6 * 4
        for _ in range(count):
            (mlen,) = struct.unpack("<I", _read_exact(f, 4, "window metadata length"))
            meta = json.loads(_read_exact(f, mlen, "window metadata").decode("utf-8"))
            data = np.frombuffer(_read_exact(f, block, "window samples"), dtype="<f4")
            yield meta, data.reshape((T, 6))


def read_giw1(path) -> dict:
    with open(path, "rb") as f:
        header = _read_envelope(f, b"GIW1")
    return {
        "rate": float(header["rate"]),
        "T": int(header["T"]),
        "windows": list(iter_giw1(path)),
        "header": header,
    }


# ---------------------------------------------------------------------------
# GPW1: paired graph-view shards


def _pack_flags(flags, S: int) -> bytes:
    bits = np.asarray(flags, dtype=bool)
    if bits.shape != (S,):
        raise FormatError("visibility flags have wrong length")
    return np.packbits(bits, bitorder="little").tobytes()


def _unpack_flags(blob: bytes, S: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(blob, dtype=np.uint8), bitorder="little")[:S].astype(bool)


def write_gpw1(path, *, window_len: int, segments: int, pairs) -> int:
    """Write paired views.

    pairs: iterable of (metadata, vis_a, vis_b, tensor_a, tensor_b) where the
    tensors are (T, S, 6) and masked segments are already zero-filled.
    """
    T, S = int(window_len), int(segments)
    records = []
    for meta, vis_a, vis_b, ta, tb in pairs:
        records.append(
            (
                _dump_header(dict(meta)),
                _pack_flags(vis_a, S),
                _pack_flags(vis_b, S),
                _f32(ta, (T, S, 6), "view A tensor").tobytes(),
                _f32(tb, (T, S, 6), "view B tensor").tobytes(),
            )
        )
    header = {
        "S": S,
        "T": T,
        "layout": "T,S,6",
        "mask_fill": "zeros",
        "pairs": len(records),
    }
    with open(path, "wb") as f:
        _write_envelope(f, b"GPW1", header)
        for meta_blob, fa, fb, ba, bb in records:
            f.write(struct.pack("<I", len(meta_blob)))
            f.write(meta_blob)
            f.write(fa)
            f.write(fb)
            f.write(ba)
            f.write(bb)
    return len(records)


def read_gpw1(path) -> dict:
    """Read a shard; returns pairs of (meta, vis_a, vis_b, tensor_a, tensor_b)."""
    with open(path, "rb") as f:
        header = _read_envelope(f, b"GPW1")
        T, S = int(header["T"]), int(header["S"])
        count = int(header["pairs"])
        flag_bytes = (S + 7) // 8
        block = T * S * 6 * 4
        pairs = []
        for _ in range(count):
            (mlen,) = struct.unpack("<I", _read_exact(f, 4, "pair metadata length"))
            meta = json.loads(_read_exact(f, mlen, "pair metadata").decode("utf-8"))
            vis_a = _unpack_flags(_read_exact(f, flag_bytes, "visibility A"), S)
            vis_b = _unpack_flags(_read_exact(f, flag_bytes, "visibility B"), S)
            ta = np.frombuffer(_read_exact(f, block, "view A tensor"), dtype="<f4").reshape((T, S, 6))
            tb = np.frombuffer(_read_exact(f, block, "view B tensor"), dtype="<f4").reshape((T, S, 6))
            pairs.append((meta, vis_a, vis_b, ta, tb))
    return {"T": T, "S": S, "pairs": pairs, "header": header}


# ---------------------------------------------------------------------------
# GCB1: codebook file


def write_gcb1(path, *, codes, decay: float, seed: int, train_log=None) -> None:
    codes = np.ascontiguousarray(np.asarray(codes, dtype=np.float32))
    if codes.ndim != 3:
        raise FormatError("codes must have shape (P, K, dim)")
    P, K, dim = codes.shape
    header = {
        "K": int(K),
        "P": int(P),
        "decay": float(decay),
        "dim": int(dim),
        "seed": int(seed),
        "train_log": train_log if train_log is not None else {},
    }
    with open(path, "wb") as f:
        _write_envelope(f, b"GCB1", header)
        f.write(codes.tobytes())


def read_gcb1(path) -> dict:
    with open(path, "rb") as f:
        header = _read_envelope(f, b"GCB1")
        P, K, dim = int(header["P"]), int(header["K"]), int(header["dim"])
        blob = _read_exact(f, P * K * dim * 4, "codes")
    codes = np.frombuffer(blob, dtype="<f4").reshape((P, K, dim))
    return {
        "codes": codes,
        "P": P,
        "K": K,
        "dim": dim,
        "decay": float(header["decay"]),
        "seed": int(header["seed"]),
        "train_log": header.get("train_log", {}),
        "header": header,
    }


# ---------------------------------------------------------------------------
# Token JSON Lines


def write_tokens_jsonl(path, records) -> int:
    """records: iterable of dicts with window_id, visible_segments, tokens."""
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            row = {
                "tokens": [int(t) for t in rec["tokens"]],
                "visible_segments": [int(s) for s in rec["visible_segments"]],
                "window_id": str(rec["window_id"]),
            }
            f.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            f.write("\n")
            n += 1
    return n


def read_tokens_jsonl(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
