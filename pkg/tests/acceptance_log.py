"""Collects one pass/fail line per acceptance criterion for the terminal summary."""
LINES = []


def record(number: int, title: str, passed: bool, detail: str) -> str:
    line = f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    LINES.append(line)
    print(line)
    return line
