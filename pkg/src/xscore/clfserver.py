"""Reference external classifier: serves a truth-table CSV over the line
protocol.

Usage: ``python -m xscore.clfserver TABLE.csv``.  Emits the handshake
``xscore-clf v1 n=<width>``, then answers each request line of <width>
'0'/'1' characters with a single '0' or '1' line.  Exits non-zero on a
malformed request.
"""
from __future__ import annotations

import sys

from .classify import PROTOCOL_HANDSHAKE, Entity, load_truth_table_csv


def serve(table_path: str, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    space, classifier = load_truth_table_csv(table_path)
    stdout.write(f"{PROTOCOL_HANDSHAKE} n={space.width}\n")
    stdout.flush()
    for line in stdin:
        request = line.strip()
        if not request:
            continue
        if len(request) != space.width or any(c not in "01" for c in request):
            print(f"malformed request {request!r}", file=sys.stderr)
            return 1
        stdout.write(f"{classifier.label(Entity.from_bits(request))}\n")
        stdout.flush()
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m xscore.clfserver TABLE.csv", file=sys.stderr)
        return 2
    return serve(argv[0])


if __name__ == "__main__":
    sys.exit(main())
