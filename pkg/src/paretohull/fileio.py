"""Deterministic text output helpers shared by the experiment commands.

All floating-point text goes through :func:`fmt` (17 significant digits,
round-trip safe) and all files are written to a temporary sibling and
renamed into place, so interrupted runs never leave partial outputs and
identical runs produce byte-identical files.
"""

import os


def fmt(x):
    """Format a float with 17 significant digits (exact round-trip)."""
    return format(float(x), ".17g")


def dump_json(obj, indent=0):
    """Serialize to JSON with sorted keys and 17-digit floats."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{inner}{dump_json(str(k))}: {dump_json(v, indent + 1)}"
            for k, v in sorted(obj.items())
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{dump_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def atomic_write_text(path, text):
    """Write text via a temporary file and rename on success."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, obj):
    atomic_write_text(path, dump_json(obj) + "\n")


def write_csv(path, header, rows):
    """Write a CSV with a header line; cells must already be strings."""
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; returns (header, rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows
