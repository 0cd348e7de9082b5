"""Collects one PASS/FAIL line per acceptance criterion during a test session."""

from contextlib import contextmanager

LINES: list[str] = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {number}: {title} -- {detail}"
    LINES.append(line)
    print(line)


@contextmanager
def criterion(number: int, title: str):
    """Set ``rec["ok"]`` and ``rec["detail"]`` inside the block; an exception logs a FAIL line."""
    rec = {}
    try:
        yield rec
    except Exception as e:
        report(number, title, False, f"{type(e).__name__}: {e}")
        raise
    report(number, title, bool(rec["ok"]), rec["detail"])
