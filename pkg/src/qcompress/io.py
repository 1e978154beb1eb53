"""Fixture parsing and report writing."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .hilbert import DensityMatrix
from .oneway import BUILTIN_FIXTURES, OneWayProtocol, RelationTable


def encode_complex(a) -> Any:
    """Nested lists with each complex entry written as [re, im]."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [encode_complex(row) for row in a]


def decode_complex(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex(obj)
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def content_hash(data: bytes) -> str:
    """Hash of ``data`` the way git hashes a blob."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(rows: Iterable[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_cell(r.get(k)) for k in columns})
    return buf.getvalue()


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def jsonl_text(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(jsonable(r), sort_keys=True) + "\n" for r in rows)


def fixture_path(name: str) -> Path:
    """Path of a fixture shipped with the package."""
    return Path(str(resources.files("qcompress") / "fixtures" / name))


def read_fixture_bytes(path: str | Path) -> tuple[bytes, Path]:
    p = Path(path)
    if not p.exists() and not p.is_absolute():
        shipped = fixture_path(p.name)
        if shipped.exists():
            p = shipped
    return p.read_bytes(), p


def load_state_pair(path: str | Path) -> tuple[DensityMatrix, DensityMatrix, str]:
    """A {"rho": ..., "sigma": ...} fixture; returns the states and the input hash."""
    data, _ = read_fixture_bytes(path)
    obj = json.loads(data)
    try:
        rho = DensityMatrix(decode_complex(obj["rho"]))
        sigma = DensityMatrix(decode_complex(obj["sigma"]))
    except KeyError as e:
        raise ValueError(f"state-pair fixture is missing field {e}") from None
    return rho, sigma, content_hash(data)


def state_pair_json(rho: DensityMatrix, sigma: DensityMatrix) -> str:
    return dumps({"rho": rho.matrix, "sigma": sigma.matrix})


def protocol_to_json(p: OneWayProtocol, rel: RelationTable) -> str:
    obj = {
        "dims": p.dims,
        "shared_state": encode_complex(p.shared_state),
        "U": {str(x): encode_complex(u) for x, u in sorted(p.U.items())},
        "V": {str(y): encode_complex(v) for y, v in sorted(p.V.items())},
        "relation": sorted([list(t) for t in rel.valid]),
        "mu": {f"{x},{y}": w for (x, y), w in sorted(rel.mu.items())},
    }
    return dumps(obj)


def protocol_from_obj(obj: dict) -> tuple[OneWayProtocol, RelationTable]:
    for key in ("dims", "shared_state", "U", "V", "relation", "mu"):
        if key not in obj:
            raise ValueError(f"protocol fixture is missing field {key!r}")
    dims = dict(obj["dims"])
    dims.setdefault("Z", 2)
    p = OneWayProtocol(
        dims=dims,
        shared_state=decode_complex(obj["shared_state"]),
        U={int(x): decode_complex(u) for x, u in obj["U"].items()},
        V={int(y): decode_complex(v) for y, v in obj["V"].items()},
    )
    mu = {}
    for k, w in obj["mu"].items():
        x, y = (int(s) for s in k.split(","))
        mu[(x, y)] = float(w)
    rel = RelationTable(valid={tuple(t) for t in obj["relation"]}, mu=mu)
    return p, rel


def load_protocol(name_or_path: str) -> tuple[OneWayProtocol, RelationTable, str]:
    """A built-in fixture name (``equality``, ``index``) or a JSON fixture path."""
    if name_or_path in BUILTIN_FIXTURES:
        p, rel = BUILTIN_FIXTURES[name_or_path]()
        return p, rel, content_hash(protocol_to_json(p, rel).encode())
    data, _ = read_fixture_bytes(name_or_path)
    p, rel = protocol_from_obj(json.loads(data))
    return p, rel, content_hash(data)
