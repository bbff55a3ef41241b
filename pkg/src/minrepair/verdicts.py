"""Judge verdict vocabulary."""

AC = "AC"
WA = "WA"
RE = "RE"
TLE = "TLE"
MLE = "MLE"
CE = "CE"

VERDICTS = (AC, WA, RE, TLE, MLE, CE)

# Everything except a compile error at least parsed.
COMPILABLE_VERDICTS = frozenset(v for v in VERDICTS if v != CE)


def is_verdict(value) -> bool:
    return value in VERDICTS
