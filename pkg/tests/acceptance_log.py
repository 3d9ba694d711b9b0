"""Collects one verdict line per acceptance criterion for the terminal summary."""
RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[n])
