from typing import Optional


def mean(values: list[float]) -> float:
    return sum(values) / len(values)


def broken_concat(n: int) -> str:
    total = len(str(n)) + "a"  # inherited bug
    return str(total)


def broken_len() -> int:
    return len(5)


def broken_attr(name: str) -> Optional[str]:
    if not name:
        return None
    return "abc".nope()
