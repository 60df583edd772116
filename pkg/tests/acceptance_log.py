"""Collects one verdict line per acceptance criterion for the end-of-run summary."""

LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> bool:
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion:>2}: {detail}"
    LINES.append(line)
    print(line)
    return passed
