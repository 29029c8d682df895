"""Versioned plain-text container for model parameters.

Every trained object (MLP, RBF, SVM, fusion) is written as::

    mifusion <kind> v1
    scalar <name> <int|float|bool|str> <value>
    array <name> <float|int> <dim,dim,...>
    <space separated values, row-major>
    end

Floats are stored with :meth:`float.hex`, so a dump/load cycle is bit-exact
and dumping the same object twice gives identical bytes.
"""

import numpy as np

from .errors import FormatError

FORMAT_VERSION = 1


def _fmt_scalar(value):
    if isinstance(value, (bool, np.bool_)):
        return "bool", "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return "int", str(int(value))
    if isinstance(value, (float, np.floating)):
        return "float", float(value).hex()
    if isinstance(value, str):
        if any(c.isspace() for c in value) or not value:
            raise ValueError(f"string scalar must be a non-empty token: {value!r}")
        return "str", value
    raise TypeError(f"unsupported scalar type {type(value).__name__}")


def dumps(kind, scalars, arrays):
    """Render named scalars and arrays of one object as text."""
    lines = [f"mifusion {kind} v{FORMAT_VERSION}"]
    for name, value in scalars.items():
        typ, text = _fmt_scalar(value)
        lines.append(f"scalar {name} {typ} {text}")
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if np.issubdtype(arr.dtype, np.integer):
            typ, values = "int", [str(int(v)) for v in arr.ravel()]
        else:
            typ, values = "float", [float(v).hex() for v in arr.astype(float).ravel()]
        shape = ",".join(str(d) for d in arr.shape) or "-"
        lines.append(f"array {name} {typ} {shape}")
        lines.append(" ".join(values))
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads(text, kind):
    """Parse text written by :func:`dumps`.

    Returns
    -------
    scalars, arrays : dict, dict
    """
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty model file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "mifusion":
        raise FormatError(f"not a mifusion model file: {lines[0]!r}")
    if head[1] != kind:
        raise FormatError(f"expected a '{kind}' model, found '{head[1]}'")
    if head[2] != f"v{FORMAT_VERSION}":
        raise FormatError(f"unsupported format version {head[2]}")

    scalars, arrays = {}, {}
    i = 1
    while i < len(lines):
        parts = lines[i].split(" ", 3)
        tag = parts[0]
        if tag == "end":
            return scalars, arrays
        if tag == "scalar" and len(parts) == 4:
            _, name, typ, raw = parts
            if typ == "int":
                scalars[name] = int(raw)
            elif typ == "float":
                scalars[name] = float.fromhex(raw)
            elif typ == "bool":
                scalars[name] = raw == "1"
            elif typ == "str":
                scalars[name] = raw
            else:
                raise FormatError(f"line {i + 1}: unknown scalar type {typ}")
            i += 1
        elif tag == "array" and len(parts) == 4:
            _, name, typ, shape_txt = parts
            shape = () if shape_txt == "-" else tuple(int(d) for d in shape_txt.split(","))
            tokens = lines[i + 1].split() if i + 1 < len(lines) else []
            if typ == "int":
                values = np.array([int(t) for t in tokens], dtype=np.int64)
            elif typ == "float":
                values = np.array([float.fromhex(t) for t in tokens], dtype=float)
            else:
                raise FormatError(f"line {i + 1}: unknown array type {typ}")
            if values.size != int(np.prod(shape)):
                raise FormatError(f"array '{name}': expected {int(np.prod(shape))} values, got {values.size}")
            arrays[name] = values.reshape(shape)
            i += 2
        else:
            raise FormatError(f"line {i + 1}: unrecognised entry {lines[i]!r}")
    raise FormatError("missing 'end' marker")
