# JSON ヘッダ1行 + float64 little-endian の W0, b0, W1, b1, ...
import json

import numpy as np

from ..utils.errors import ParseError
from .mlp import Mlp

FORMAT_NAME = "cilfair-mlp"
FORMAT_VERSION = 1
_DTYPE = np.dtype('<f8')


def save_checkpoint(net: Mlp, path: str) -> None:
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "layer_sizes": list(net.layer_sizes)}
    with open(path, 'wb') as f:
        f.write(json.dumps(header, sort_keys=True).encode('utf-8') + b"\n")
        for w, b in zip(net.weights, net.biases):
            f.write(np.ascontiguousarray(w, dtype=_DTYPE).tobytes())
            f.write(np.ascontiguousarray(b, dtype=_DTYPE).tobytes())


def load_checkpoint(path: str) -> Mlp:
    with open(path, 'rb') as f:
        header_line = f.readline()
        payload = f.read()
    try:
        header = json.loads(header_line.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"invalid checkpoint header: {e}", line=1, path=path)
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise ParseError("unsupported checkpoint format", line=1, path=path)

    sizes = [int(s) for s in header["layer_sizes"]]
    expected = sum(o * i + o for i, o in zip(sizes[:-1], sizes[1:])) * _DTYPE.itemsize
    if len(payload) != expected:
        raise ParseError(f"checkpoint payload has {len(payload)} bytes, expected {expected}", path=path)

    values = np.frombuffer(payload, dtype=_DTYPE).astype(np.float64)
    weights, biases, offset = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(values[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in).copy())
        offset += fan_out * fan_in
        biases.append(values[offset:offset + fan_out].copy())
        offset += fan_out
    return Mlp(tuple(sizes), weights, biases)
