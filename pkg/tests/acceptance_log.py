"""Collects one verdict line per acceptance criterion for the terminal summary."""

_results: dict[str, tuple[bool, str]] = {}


def record(key: str, ok: bool, detail: str = "") -> None:
    prev = _results.get(key)
    if prev is not None:
        ok = ok and prev[0]
        detail = f"{prev[1]}; {detail}" if prev[1] else detail
    _results[key] = (ok, detail)
    print(line(key))


def line(key: str) -> str:
    ok, detail = _results[key]
    return f"{key}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()


def lines() -> list[str]:
    return [line(k) for k in sorted(_results, key=lambda k: int(k.split()[-1]))]
