"""Binary forest files.

Layout, all little-endian: magic ``SANN``, u16 version, u32 length plus a
UTF-8 JSON parameter block, u64 n, u32 indexed dim, u32 input dim, f64
build seconds, the id array, the point array, u32 tree count, then each
tree's nodes in preorder.

Trees share leaves and arrays between sibling shells. A node or array
seen before is written as a back-reference to its first occurrence, which
keeps files small and makes a read-then-write round trip byte-identical.
"""
from __future__ import annotations

import io
import json
import struct
import sys

import numpy as np

from .index import (
    AnnulusChild,
    AnnulusSplit,
    BuildParams,
    ClusterSplit,
    Forest,
    LeafBaseLSH,
    LeafBruteForce,
    LeafStore,
    PseudoRandomSplit,
)

MAGIC = b"SANN"
VERSION = 1

_STORE, _BRUTE, _BASE, _SPLIT, _CLUSTER, _ANNULUS, _NODE_REF = range(1, 8)
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<i8"), 3: np.dtype("<u8")}
_DTYPE_CODES = {np.dtype(np.float64): 1, np.dtype(np.int64): 2, np.dtype(np.uint64): 3}
_FAMILIES = {"spherical": 1, "grid": 2}
_KINDS = {"ball": 1, "cap": 2}


class FormatError(ValueError):
    """Raised for malformed or unsupported forest files."""


class _Writer:
    def __init__(self, out):
        self.out = out
        self.nodes: dict = {}
        self.arrays: dict = {}

    def pack(self, fmt, *vals):
        self.out.write(struct.pack("<" + fmt, *vals))

    def array(self, a):
        key = id(a)
        if key in self.arrays:
            self.pack("BQ", 1, self.arrays[key])
            return
        self.arrays[key] = len(self.arrays)
        arr = np.ascontiguousarray(a)
        code = _DTYPE_CODES.get(arr.dtype)
        if code is None:
            raise FormatError(f"unsupported array dtype {arr.dtype}")
        self.pack("BBQ", 0, code, arr.size)
        self.out.write(arr.astype(_DTYPES[code], copy=False).tobytes())

    def opt_array(self, a):
        self.pack("B", a is not None)
        if a is not None:
            self.array(a)

    def node(self, node):
        key = id(node)
        if key in self.nodes:
            self.pack("BQ", _NODE_REF, self.nodes[key])
            return
        self.nodes[key] = len(self.nodes)
        if isinstance(node, LeafStore):
            self.pack("Bq", _STORE, node.row)
            self.array(node.covered)
        elif isinstance(node, LeafBruteForce):
            self.pack("B", _BRUTE)
            self.array(node.rows)
        elif isinstance(node, LeafBaseLSH):
            self.pack("BB", _BASE, _FAMILIES[node.family])
            self.opt_array(node.center)
            self.pack("dQI", node.radius, node.T, node.hash_dim)
            for a in (node.seeds, node.keys, node.key_ptr, node.table_ptr, node.rows):
                self.array(a)
        elif isinstance(node, PseudoRandomSplit):
            self.pack("BB", _SPLIT, _FAMILIES[node.family])
            self.opt_array(node.center)
            self.pack("dQQIQ", node.radius, node.seed, node.T, node.hash_dim, len(node.children))
            for key, child in node.children.items():
                self.pack("Q", key)
                self.node(child)
        elif isinstance(node, ClusterSplit):
            self.pack("BBddI", _CLUSTER, _KINDS[node.kind], node.r1, node.r2, len(node.clusters))
            for child in node.clusters:
                self.node(child)
            self.pack("B", node.remainder is not None)
            if node.remainder is not None:
                self.node(node.remainder)
        elif isinstance(node, AnnulusSplit):
            self.pack("B", _ANNULUS)
            self.array(node.center)
            self.pack("ddddQ", node.R, node.delta, node.r1, node.r2, len(node.children))
            for (i, j), child in node.children.items():
                self.pack("qqdd", i, j, child.r1, child.r2)
                self.node(child.node)
        else:
            raise FormatError(f"cannot serialize {type(node).__name__}")


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0
        self.nodes: list = []
        self.arrays: list = []

    def unpack(self, fmt):
        fmt = "<" + fmt
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise FormatError("truncated file")
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return vals

    def one(self, fmt):
        return self.unpack(fmt)[0]

    def array(self):
        if self.one("B") == 1:
            idx = self.one("Q")
            if idx >= len(self.arrays):
                raise FormatError("bad array reference")
            return self.arrays[idx]
        code, size = self.unpack("BQ")
        if code not in _DTYPES:
            raise FormatError("unknown array dtype")
        dt = _DTYPES[code]
        nbytes = size * dt.itemsize
        if self.pos + nbytes > len(self.buf):
            raise FormatError("truncated array")
        arr = np.frombuffer(self.buf[self.pos:self.pos + nbytes], dtype=dt).astype(dt.newbyteorder("="))
        self.pos += nbytes
        self.arrays.append(arr)
        return arr

    def opt_array(self):
        return self.array() if self.one("B") else None

    def node(self):
        tag = self.one("B")
        if tag == _NODE_REF:
            idx = self.one("Q")
            if idx >= len(self.nodes):
                raise FormatError("bad node reference")
            return self.nodes[idx]
        slot = len(self.nodes)
        self.nodes.append(None)
        families = {v: k for k, v in _FAMILIES.items()}
        if tag == _STORE:
            row = self.one("q")
            node = LeafStore(row, self.array())
        elif tag == _BRUTE:
            node = LeafBruteForce(self.array())
        elif tag == _BASE:
            family = families[self.one("B")]
            center = self.opt_array()
            radius, T, hash_dim = self.unpack("dQI")
            seeds, keys, key_ptr, table_ptr, rows = (self.array() for _ in range(5))
            node = LeafBaseLSH(family, center, radius, seeds, T, hash_dim, keys, key_ptr, table_ptr, rows)
        elif tag == _SPLIT:
            family = families[self.one("B")]
            center = self.opt_array()
            radius, seed, T, hash_dim, count = self.unpack("dQQIQ")
            node = PseudoRandomSplit(family, center, radius, seed, T, hash_dim)
            self.nodes[slot] = node
            for _ in range(count):
                key = self.one("Q")
                node.children[key] = self.node()
        elif tag == _CLUSTER:
            kind, r1, r2, count = self.unpack("BddI")
            node = ClusterSplit({v: k for k, v in _KINDS.items()}[kind], r1, r2, [])
            self.nodes[slot] = node
            node.clusters = [self.node() for _ in range(count)]
            if self.one("B"):
                node.remainder = self.node()
        elif tag == _ANNULUS:
            center = self.array()
            R, delta, r1, r2, count = self.unpack("ddddQ")
            node = AnnulusSplit(center, R, delta, r1, r2)
            self.nodes[slot] = node
            for _ in range(count):
                i, j, cr1, cr2 = self.unpack("qqdd")
                node.children[(i, j)] = AnnulusChild(cr1, cr2, self.node())
        else:
            raise FormatError(f"unknown node tag {tag}")
        self.nodes[slot] = node
        return node


def _deep(fn):
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 100_000))
    try:
        return fn()
    finally:
        sys.setrecursionlimit(old)


def dumps(forest: Forest) -> bytes:
    out = io.BytesIO()
    w = _Writer(out)
    params = json.dumps(forest.params.to_dict(), sort_keys=True).encode()
    w.pack("4sHI", MAGIC, VERSION, len(params))
    out.write(params)
    n, d = forest.points.shape
    w.pack("QIId", n, d, forest.input_dim, forest.build_seconds)
    w.array(np.asarray(forest.ids, dtype=np.int64))
    w.array(np.ascontiguousarray(forest.points, dtype=np.float64).ravel())
    w.pack("I", len(forest.trees))

    def trees():
        for tree in forest.trees:
            w.node(tree)
    _deep(trees)
    return out.getvalue()


def loads(buf: bytes) -> Forest:
    r = _Reader(buf)
    magic, version, plen = r.unpack("4sHI")
    if magic != MAGIC:
        raise FormatError("not a SANN file")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    params = BuildParams.from_dict(json.loads(bytes(r.buf[r.pos:r.pos + plen]).decode()))
    r.pos += plen
    n, d, input_dim, seconds = r.unpack("QIId")
    ids = r.array()
    points = r.array().reshape(n, d)
    count = r.one("I")
    trees = _deep(lambda: [r.node() for _ in range(count)])
    if r.pos != len(r.buf):
        raise FormatError("trailing bytes")
    return Forest(params, points, ids, trees, input_dim, seconds)


def save(forest: Forest, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(forest))


def load(path) -> Forest:
    with open(path, "rb") as fh:
        return loads(fh.read())
