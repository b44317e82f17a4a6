"""Versioned binary container for trained parsers.

Layout (all integers little-endian)::

    magic        8 bytes  b"CMXPARSE"
    version      u16
    header_len   u32
    header       UTF-8 JSON: estimator params, vocabulary, tensor manifest
    tensors      float64 little-endian blocks in manifest order
    checksum     32 bytes SHA-256 of everything above
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np
import torch

from ..exceptions import ModelFormatError
from .model import BiaffineNetwork, ParserVocab

MAGIC = b"CMXPARSE"
VERSION = 1
_NON_SERIALIZED_PARAMS = ("embeddings", "clusters")


def _read_source(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if hasattr(source, "read"):
        return source.read()
    with open(source, "rb") as fh:
        return fh.read()


def save_model(parser, target=None) -> bytes:
    parser._check_fitted()
    params = {
        k: v for k, v in parser.get_params(deep=False).items() if k not in _NON_SERIALIZED_PARAMS
    }
    state = parser.network_.state_dict()
    manifest = [[name, list(t.shape)] for name, t in state.items()]
    header = {
        "params": params,
        "vocab": parser.vocab_.to_dict(),
        "has_pretrained": getattr(parser.network_, "pretrained", None) is not None,
        "tensors": manifest,
        "history": list(parser.history_),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(header_bytes)), header_bytes]
    for tensor in state.values():
        chunks.append(tensor.detach().double().numpy().astype("<f8").tobytes())
    body = b"".join(chunks)
    data = body + hashlib.sha256(body).digest()
    if target is not None:
        if hasattr(target, "write"):
            target.write(data)
        else:
            with open(target, "wb") as fh:
                fh.write(data)
    return data


def load_model(source):
    from .estimator import _DTYPES, BiaffineParser

    data = _read_source(source)
    if len(data) < len(MAGIC) + 6 + 32 or not data.startswith(MAGIC):
        raise ModelFormatError("not a parser model file (bad magic or truncated)")
    body, checksum = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise ModelFormatError("model file is corrupt or truncated (checksum mismatch)")
    version, header_len = struct.unpack_from("<HI", body, len(MAGIC))
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}, expected {VERSION}")
    offset = len(MAGIC) + 6
    try:
        header = json.loads(body[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable model header: {exc}") from None
    offset += header_len

    parser = BiaffineParser(**header["params"])
    parser.vocab_ = ParserVocab.from_dict(header["vocab"])
    state = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(body):
            raise ModelFormatError("model file is truncated")
        values = np.frombuffer(body[offset:end], dtype="<f8").reshape(shape)
        state[name] = torch.from_numpy(values.copy())
        offset = end
    if offset != len(body):
        raise ModelFormatError("trailing bytes after tensor data")

    pretrained = state.get("pretrained") if header["has_pretrained"] else None
    with torch.random.fork_rng(devices=[]):
        network = BiaffineNetwork(
            parser.vocab_, parser._network_config(),
            None if pretrained is None else pretrained.numpy(),
        )
    network.to(_DTYPES[parser.dtype])
    network.load_state_dict({k: v.to(_DTYPES[parser.dtype]) for k, v in state.items()})
    network.eval()
    parser.network_ = network
    parser.history_ = header.get("history", [])
    return parser
