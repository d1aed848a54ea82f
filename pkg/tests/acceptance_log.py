"""Verdicts recorded by the acceptance tests, printed in the terminal summary."""

RESULTS: dict[int, tuple[str, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = ("PASS" if ok else "FAIL", detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
