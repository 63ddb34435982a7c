"""Text and binary file formats: matrices, angle programs, checkpoints and configs.

Matrix files are plain text: the first line holds ``n``, then ``n`` rows of
``n`` whitespace-separated ``re,im`` pairs. Angle programs hold one
``i j theta phi`` line per rotation (in application order) and a final
``D w_0 ... w_{n-1}`` line with the diagonal phases. Blank lines and lines
starting with ``#`` are ignored in both.
"""

import dataclasses
import json
import os

import numpy as np

from . import unitary
from .cell import EurnnCell, VanillaCell
from .errors import ConfigError, ParseError

CHECKPOINT_VERSION = 1


def _fmt(x):
    return repr(float(x))


def _content_lines(path):
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read file ({exc.strerror})", path) from exc
    return [(no, ln.strip()) for no, ln in enumerate(lines, 1)
            if ln.strip() and not ln.lstrip().startswith("#")]


def _float(tok, path, no):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", path, no) from None


def _int(tok, path, no):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"not an integer: {tok!r}", path, no) from None


# --- matrices --------------------------------------------------------------

def format_matrix(m):
    m = np.asarray(m, dtype=np.complex128)
    rows = [" ".join(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in row) for row in m]
    return "\n".join([str(m.shape[0])] + rows) + "\n"


def write_matrix(path, m):
    with open(path, "w") as fh:
        fh.write(format_matrix(m))


def read_matrix(path):
    lines = _content_lines(path)
    if not lines:
        raise ParseError("empty matrix file", path, 1)
    no, first = lines[0]
    n = _int(first, path, no)
    if n < 1:
        raise ParseError(f"matrix size must be positive, got {n}", path, no)
    if len(lines) - 1 != n:
        bad = lines[n + 1][0] if len(lines) - 1 > n else (lines[-1][0] + 1)
        raise ParseError(f"expected {n} matrix rows, found {len(lines) - 1}", path, bad)
    m = np.empty((n, n), dtype=np.complex128)
    for r, (no, text) in enumerate(lines[1:]):
        cells = text.split()
        if len(cells) != n:
            raise ParseError(f"expected {n} entries, found {len(cells)}", path, no)
        for c, cell in enumerate(cells):
            parts = cell.split(",")
            if len(parts) != 2:
                raise ParseError(f"entry {c + 1} is not a re,im pair: {cell!r}", path, no)
            m[r, c] = complex(_float(parts[0], path, no), _float(parts[1], path, no))
    return m


# --- angle programs --------------------------------------------------------

def format_program(p):
    out = [f"{i} {j} {_fmt(t)} {_fmt(ph)}" for (i, j), t, ph in p.rotations]
    out.append("D " + " ".join(_fmt(w) for w in p.diag.w))
    return "\n".join(out) + "\n"


def write_program(path, p):
    with open(path, "w") as fh:
        fh.write(format_program(p))


def read_program(path):
    lines = _content_lines(path)
    if not lines or not lines[-1][1].startswith("D"):
        raise ParseError("missing final 'D w...' line", path, lines[-1][0] if lines else 1)
    no, last = lines[-1]
    w = np.array([_float(t, path, no) for t in last.split()[1:]])
    n = len(w)
    if n < 1:
        raise ParseError("diagonal line has no phases", path, no)
    rotations = []
    for no, text in lines[:-1]:
        toks = text.split()
        if len(toks) != 4:
            raise ParseError(f"expected 'i j theta phi', found {len(toks)} fields", path, no)
        i, j = _int(toks[0], path, no), _int(toks[1], path, no)
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ParseError(f"pair ({i}, {j}) invalid for n = {n}", path, no)
        rotations.append(((i, j), _float(toks[2], path, no), _float(toks[3], path, no)))
    return unitary.AngleProgram(n, rotations, unitary.DiagonalPhase(n, w))


# --- configs ---------------------------------------------------------------

def _coerce(name, typ, raw, where=None):
    try:
        if typ in (bool, "bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where + ': ' if where else ''}bad value for {name}: {raw!r}") from None


def read_config(path, cls):
    """Parse ``key = value`` lines into a dict of typed values for dataclass ``cls``."""
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    out = {}
    for no, text in _content_lines(path):
        if "=" not in text:
            raise ParseError("expected key=value", path, no)
        key, raw = (s.strip() for s in text.split("=", 1))
        if key not in types:
            raise ParseError(f"unknown key {key!r}", path, no)
        out[key] = _coerce(key, types[key], raw, f"{path}:{no}")
    return out


def format_config(cfg):
    """Every field of a dataclass as ``key=value``, in declaration order."""
    rows = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        rows.append(f"{f.name}={_fmt(v) if isinstance(v, float) else v}")
    return "\n".join(rows) + "\n"


def write_config(path, cfg):
    with open(path, "w") as fh:
        fh.write(format_config(cfg))


# --- checkpoints -----------------------------------------------------------

def save_checkpoint(path, cell, config=None):
    """Versioned .npz holding every parameter array; reload is bit-exact."""
    meta = {"version": CHECKPOINT_VERSION, "kind": cell.kind}
    if cell.kind == "eurnn":
        meta["style"] = cell.structure.style
        meta["capacity"] = cell.structure.capacity
    if config is not None:
        meta["config"] = dataclasses.asdict(config)
    arrays = {f"p_{k}": np.asarray(v) for k, v in cell.params().items()}
    tmp = path + ".tmp.npz"
    np.savez(tmp, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Return ``(cell, meta)``."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        p = {k[2:]: z[k].copy() for k in z.files if k.startswith("p_")}
    if meta["kind"] == "vanilla":
        return VanillaCell(p["u"], p["w"], p["b"], p["v"], p["c"]), meta
    n = p["u"].shape[0]
    structure = unitary.fft(n) if meta["style"] == "fft" else unitary.tunable(n, meta["capacity"])
    L = len(structure.layers)
    cell = EurnnCell(p["u"], structure, [p[f"theta{l}"] for l in range(L)],
                     [p[f"phi{l}"] for l in range(L)], p["omega"], p["b"], p["v"], p["c"])
    return cell, meta
