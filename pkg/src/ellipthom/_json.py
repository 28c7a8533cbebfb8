"""Canonical JSON emission.

Output files have to be byte-reproducible: the round-trip load -> dump must
leave the bytes unchanged, and two runs with the same inputs must produce the
same file.  The stdlib encoder gets most of the way there but leaves float
formatting up to repr and key order up to the caller, so this module pins both:
keys are sorted, floats go through %.17g (enough digits to round-trip any
double), separators carry no whitespace, and the file ends in a single \\n.

Non-finite floats are rejected outright -- a NaN in a result file means a bug
upstream, and JSON has no portable spelling for it anyway.
"""

import json

import numpy as np

__all__ = ["dumps_canonical", "dump_canonical", "load_json"]


def _format_float(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot be serialized")
    if x == 0.0:
        # normalize -0.0: "%-.17g" would print "-0", which reloads as the
        # integer 0 and would re-serialize differently
        x = 0.0
    return "%.17g" % x


def _emit(obj, out: list) -> None:
    # bool is a subclass of int, so it has to be tested first
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out)
    elif isinstance(obj, dict):
        keys = list(obj.keys())
        if any(not isinstance(k, str) for k in keys):
            raise TypeError("canonical JSON requires string keys")
        out.append("{")
        for i, k in enumerate(sorted(keys)):
            if i:
                out.append(",")
            out.append(json.dumps(k, ensure_ascii=False))
            out.append(":")
            _emit(obj[k], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _emit(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot canonically serialize {type(obj).__name__}")


def dumps_canonical(obj) -> str:
    """Serialize obj to a canonical JSON string (no trailing newline)."""
    out = []
    _emit(obj, out)
    return "".join(out)


def dump_canonical(obj, path) -> None:
    """Write obj to path as canonical JSON, UTF-8, LF line ending."""
    text = dumps_canonical(obj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.write("\n")


def load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
